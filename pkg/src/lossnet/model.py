"""Network description and derived static quantities.

A network is a finite set of capacitated nodes visited by several classes
of customers.  Class ``r`` customers arrive according to a Poisson stream,
enter at a random node, dwell at each visited node for an exponential time
and then either move to another node, leave the network, or end their call.
A customer offered to a node with no free capacity is dropped.

This module owns the immutable :class:`NetworkSpec`, its JSON wire format,
validation, and the static per-class quantities (offered load, continuation
probability, reachable node sets) everything downstream builds on.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EXIT = "exit"


class SpecFormatError(ValueError):
    """Raised when a network document cannot be parsed at all."""


@dataclass(frozen=True)
class NetworkSpec:
    """Immutable description of a multi-class loss network.

    Arrays are indexed by dense node/class indices in document order.
    ``routing[r, i, j]`` is the probability that a class ``r`` customer
    whose dwell time at node ``i`` expires moves to node ``j``;
    ``exit_prob[r, i]`` is the probability it leaves the network instead.
    The diagonal of each routing matrix is zero and every row satisfies
    ``routing[r, i, :].sum() + exit_prob[r, i] == 1``.
    """

    node_ids: tuple[str, ...]
    capacity: np.ndarray          # (n,) float, per-node capacity on the fluid scale
    class_ids: tuple[str, ...]
    arrival_rate: np.ndarray      # (m,) float, lambda_r
    service_rate: np.ndarray      # (m,) float, mu_r (call completion)
    move_rate: np.ndarray         # (m,) float, gamma_r (dwell expiry)
    entry: np.ndarray             # (m, n) float, entry distribution q_r
    routing: np.ndarray           # (m, n, n) float, node-to-node moves
    exit_prob: np.ndarray         # (m, n) float, move to the outside

    def __post_init__(self):
        for name in ("capacity", "arrival_rate", "service_rate", "move_rate",
                     "entry", "routing", "exit_prob"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_classes(self) -> int:
        return len(self.class_ids)

    def node_index(self, node_id: str) -> int:
        return self.node_ids.index(node_id)

    def class_index(self, class_id: str) -> int:
        return self.class_ids.index(class_id)


@dataclass(frozen=True)
class DerivedParams:
    """Static per-class quantities derived from a valid spec.

    ``load[r]`` is lambda_r / (gamma_r + mu_r), the stationary occupancy a
    class would build up at a single unblocked node.  ``continuation[r]`` is
    gamma_r / (gamma_r + mu_r), the probability that a dwell period ends with
    a move attempt rather than call completion.  ``reachable[r, i]`` marks
    the nodes class ``r`` can visit with positive probability.
    """

    load: np.ndarray          # (m,)
    continuation: np.ndarray  # (m,)
    reachable: np.ndarray     # (m, n) bool

    def __post_init__(self):
        for name in ("load", "continuation", "reachable"):
            arr = getattr(self, name)
            arr.setflags(write=False)


def validate(spec: NetworkSpec) -> list[str]:
    """Check every model invariant; return one message per violation.

    An empty list means the spec is valid.  Violations are data, not
    exceptions: callers decide whether to stop.
    """
    bad: list[str] = []
    n, m = spec.n_nodes, spec.n_classes
    atol = 1e-9

    if n == 0:
        bad.append("network has no nodes")
    if m == 0:
        bad.append("network has no classes")
    if len(set(spec.node_ids)) != n:
        bad.append("duplicate node ids")
    if len(set(spec.class_ids)) != m:
        bad.append("duplicate class ids")

    for i, c in enumerate(spec.capacity):
        if not c > 0:
            bad.append(f"node {spec.node_ids[i]}: capacity must be positive, got {c}")

    for r, cid in enumerate(spec.class_ids):
        if not spec.arrival_rate[r] > 0:
            bad.append(f"class {cid}: arrival rate must be positive, got {spec.arrival_rate[r]}")
        if spec.service_rate[r] < 0:
            bad.append(f"class {cid}: service rate must be nonnegative")
        if spec.move_rate[r] < 0:
            bad.append(f"class {cid}: move rate must be nonnegative")
        if not spec.move_rate[r] + spec.service_rate[r] > 0:
            bad.append(f"class {cid}: move rate + service rate must be positive "
                       "(the per-class load would be infinite)")

        q = spec.entry[r]
        if np.any(q < -atol):
            bad.append(f"class {cid}: entry distribution has negative mass")
        if abs(q.sum() - 1.0) > atol:
            bad.append(f"class {cid}: entry distribution sums to {q.sum():.6g}, expected 1")

        for i, nid in enumerate(spec.node_ids):
            row = spec.routing[r, i]
            if np.any(row < -atol) or spec.exit_prob[r, i] < -atol:
                bad.append(f"class {cid}: negative routing probability at node {nid}")
            if spec.routing[r, i, i] > atol:
                bad.append(f"class {cid}: nonzero diagonal routing at node {nid}")
            total = row.sum() + spec.exit_prob[r, i]
            if abs(total - 1.0) > atol:
                bad.append(f"class {cid}: routing row at node {nid} sums to {total:.6g}, "
                           "expected 1 (missing mass is not sent to exit implicitly)")

    if not bad:
        covered = np.zeros(n, dtype=bool)
        for r in range(m):
            covered |= _reachable_mask(spec, r)
        for i in np.flatnonzero(~covered):
            bad.append(f"node {spec.node_ids[i]} is unreachable by every class")

    return bad


def require_valid(spec: NetworkSpec) -> NetworkSpec:
    """Raise ValueError listing all violations; return the spec unchanged."""
    bad = validate(spec)
    if bad:
        raise ValueError("invalid network spec:\n" + "\n".join(f"  - {b}" for b in bad))
    return spec


def _reachable_mask(spec: NetworkSpec, r: int) -> np.ndarray:
    """Boolean mask of nodes class r visits with positive probability."""
    n = spec.n_nodes
    seen = np.zeros(n, dtype=bool)
    queue = deque(np.flatnonzero(spec.entry[r] > 0))
    seen[list(queue)] = True
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(spec.routing[r, i] > 0):
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return seen


def reachable_set(spec: NetworkSpec, class_id: str | int) -> frozenset[str]:
    """Nodes a class can visit: closure of its entry support under routing."""
    r = class_id if isinstance(class_id, int) else spec.class_index(class_id)
    return frozenset(spec.node_ids[i] for i in np.flatnonzero(_reachable_mask(spec, r)))


def derived(spec: NetworkSpec) -> DerivedParams:
    """Compute per-class load, continuation probability and reachable sets."""
    total = spec.move_rate + spec.service_rate
    mask = np.stack([_reachable_mask(spec, r) for r in range(spec.n_classes)])
    return DerivedParams(
        load=np.asarray(spec.arrival_rate / total),
        continuation=np.asarray(spec.move_rate / total),
        reachable=mask,
    )


# ---------------------------------------------------------------------------
# JSON wire format
#
# {
#   "nodes":   [{"id": "1", "capacity": 1.0}, ...],
#   "classes": [{"id": "a", "lambda": 1.0, "mu": 0.0, "gamma": 1.0,
#                "entry":   {"1": 1.0},
#                "routing": {"1": {"2": 1.0}, "2": {"exit": 1.0}}}, ...]
# }
#
# A node absent from a class's routing map routes to "exit" with probability
# one.  A row that is present but sums to less than one is a validation
# error; the missing mass is never completed to "exit" silently.
# ---------------------------------------------------------------------------

def spec_from_dict(doc: dict) -> NetworkSpec:
    """Build a NetworkSpec from its JSON document form.

    Structural problems (missing keys, unknown ids, wrong types) raise
    SpecFormatError.  Numeric invariants are left to :func:`validate`.
    """
    try:
        nodes = doc["nodes"]
        classes = doc["classes"]
        node_ids = tuple(str(nd["id"]) for nd in nodes)
        capacity = np.array([float(nd["capacity"]) for nd in nodes])
    except (KeyError, TypeError) as exc:
        raise SpecFormatError(f"malformed network document: {exc}") from exc

    n, m = len(node_ids), len(classes)
    index = {nid: i for i, nid in enumerate(node_ids)}
    if len(index) != n:
        raise SpecFormatError("duplicate node ids")

    class_ids = []
    lam = np.zeros(m)
    mu = np.zeros(m)
    gamma = np.zeros(m)
    entry = np.zeros((m, n))
    routing = np.zeros((m, n, n))
    exit_prob = np.zeros((m, n))

    for r, cd in enumerate(classes):
        try:
            class_ids.append(str(cd["id"]))
            lam[r] = float(cd["lambda"])
            mu[r] = float(cd["mu"])
            gamma[r] = float(cd["gamma"])
            entry_map = cd["entry"]
            routing_map = cd.get("routing", {})
        except (KeyError, TypeError) as exc:
            raise SpecFormatError(f"malformed class entry {r}: {exc}") from exc

        for nid, p in entry_map.items():
            if nid not in index:
                raise SpecFormatError(f"class {class_ids[r]}: unknown entry node {nid!r}")
            entry[r, index[nid]] = float(p)

        seen_rows = set()
        for nid, row in routing_map.items():
            if nid not in index:
                raise SpecFormatError(f"class {class_ids[r]}: unknown routing node {nid!r}")
            seen_rows.add(index[nid])
            for target, p in row.items():
                if target == EXIT:
                    exit_prob[r, index[nid]] = float(p)
                elif target in index:
                    routing[r, index[nid], index[target]] = float(p)
                else:
                    raise SpecFormatError(
                        f"class {class_ids[r]}: unknown routing target {target!r}")
        # nodes without a routing row leave the network on dwell expiry
        for i in range(n):
            if i not in seen_rows:
                exit_prob[r, i] = 1.0

    return NetworkSpec(
        node_ids=node_ids, capacity=capacity, class_ids=tuple(class_ids),
        arrival_rate=lam, service_rate=mu, move_rate=gamma,
        entry=entry, routing=routing, exit_prob=exit_prob,
    )


def spec_to_dict(spec: NetworkSpec) -> dict:
    """Inverse of :func:`spec_from_dict` (routing rows always explicit)."""
    nodes = [{"id": nid, "capacity": float(c)}
             for nid, c in zip(spec.node_ids, spec.capacity)]
    classes = []
    for r, cid in enumerate(spec.class_ids):
        entry = {spec.node_ids[i]: float(p)
                 for i, p in enumerate(spec.entry[r]) if p > 0}
        routing = {}
        for i, nid in enumerate(spec.node_ids):
            row = {spec.node_ids[j]: float(p)
                   for j, p in enumerate(spec.routing[r, i]) if p > 0}
            if spec.exit_prob[r, i] > 0:
                row[EXIT] = float(spec.exit_prob[r, i])
            routing[nid] = row
        classes.append({
            "id": cid,
            "lambda": float(spec.arrival_rate[r]),
            "mu": float(spec.service_rate[r]),
            "gamma": float(spec.move_rate[r]),
            "entry": entry,
            "routing": routing,
        })
    return {"nodes": nodes, "classes": classes}


def load_spec(path: str | Path) -> NetworkSpec:
    """Read a network document from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecFormatError(f"{path}: not valid JSON ({exc})") from exc
    return spec_from_dict(doc)


def save_spec(spec: NetworkSpec, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")
