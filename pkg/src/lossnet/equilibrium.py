"""Equilibrium computation and cross-verification for the network flow.

A stationary point of the throttled dynamics admits three independent
descriptions, all implemented here:

  * a fixed point of a per-node capacity-clip map applied to the
    unthrottled demand (``equilibrium_map``), found by damped iteration or
    by integrating the flow to stationarity (``solve_equilibrium``);
  * a per-node acceptance vector t in (0, 1]^n from which the full state
    is recovered by solving one linear visit-count system per class
    (``occupancy_from_acceptance``), with a path-sampling Monte-Carlo
    estimator of the same quantity as an independent check;
  * closed forms for chain and loop routes (``route_occupancy``) and for
    the symmetric two-node network (``two_node_closed_form``).

Uniqueness of the equilibrium is probed numerically from random starts
(``uniqueness_probe``); the underlying monotonicity quantity that makes
uniqueness provable is exposed as ``monotonicity_functional``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import NetworkSpec, derived, spec_from_dict
from .fluid import (CAP_TOL, _check_state, acceptance, integrate,
                    offered_inflow, random_state, vector_field)


class ConvergenceError(RuntimeError):
    """An iterative solve ran out of budget before meeting its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} "
                         f"after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class DivergentVisitsError(ValueError):
    """The visit series for an acceptance vector fails to converge.

    Raised when the per-class linear system is singular or produces a
    negative solution, which happens exactly when expected visit counts
    blow up (for example a loop route with no leak and acceptance 1
    everywhere).  Such an acceptance vector has no associated occupancy.
    """


def capacity_clip(limit: float, u) -> np.ndarray:
    """Scale a nonnegative vector down so its sum does not exceed limit.

    Returns u unchanged when it already fits (including the all-zero
    vector), otherwise u * limit/sum(u).
    """
    if limit <= 0:
        raise ValueError("limit must be positive")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("components must be nonnegative")
    s = u.sum()
    if s <= limit:
        return u.copy()
    return u * (limit / s)


def unthrottled_demand(spec: NetworkSpec, x: np.ndarray) -> np.ndarray:
    """Per-(class, node) occupancy each node would hold with no throttling.

    The offered inflow at the current state divided by the per-class
    departure rate; the equilibrium map clips this to capacity.
    """
    x = np.asarray(x, dtype=float)
    rates = spec.move_rate + spec.service_rate
    return offered_inflow(spec, x) / rates[:, None]


def equilibrium_map(spec: NetworkSpec, x: np.ndarray,
                    cap_tol: float = CAP_TOL) -> np.ndarray:
    """One application of the capacity-clip map whose fixed points are
    exactly the stationary points of the flow."""
    x = _check_state(spec, x, cap_tol)
    demand = unthrottled_demand(spec, x)
    out = np.empty_like(demand)
    for i in range(spec.n_nodes):
        out[:, i] = capacity_clip(spec.capacity[i], demand[:, i])
    return out


def acceptance_from_state(spec: NetworkSpec, x: np.ndarray,
                          snap_tol: float = 1e-9) -> np.ndarray:
    """Per-node acceptance factors implied by a (near-)stationary state.

    t_i = min(1, capacity_i / unthrottled demand); values within snap_tol
    of 1 are snapped to exactly 1 so that a barely-saturated node is not
    reported as throttling.  Nodes with zero demand get t_i = 1.
    """
    demand = unthrottled_demand(spec, x).sum(axis=0)
    t = np.where(demand > 0,
                 np.minimum(1.0, spec.capacity / np.where(demand > 0, demand, 1.0)),
                 1.0)
    t[np.abs(t - 1.0) <= snap_tol] = 1.0
    return t


def complementarity_defect(spec: NetworkSpec, x: np.ndarray,
                           t: np.ndarray) -> float:
    """Max over nodes of |(1 - t_i) * (capacity_i - total_i)|.

    Zero at an equilibrium: every node either accepts everything (t=1) or
    sits exactly at capacity.
    """
    total = np.asarray(x, dtype=float).sum(axis=0)
    return float(np.max(np.abs((1.0 - t) * (spec.capacity - total))))


@dataclass(frozen=True)
class EquilibriumPoint:
    """A converged stationary point with its verification numbers."""

    x: np.ndarray              # occupancy, shape (n_classes, n_nodes)
    t: np.ndarray              # per-node acceptance factors, shape (n,)
    flow_acceptance: np.ndarray    # flow throttle evaluated at x, shape (n,)
    residual: float        # sup-norm of the vector field at x
    map_residual: float    # sup-norm of x - equilibrium_map(x)
    method: str
    iterations: int

    @property
    def node_totals(self) -> np.ndarray:
        return self.x.sum(axis=0)

    @property
    def saturated(self) -> np.ndarray:
        return self.t < 1.0

    @property
    def blocking(self) -> np.ndarray:
        return 1.0 - self.t


def _finish_point(spec, x, method, iterations, tol) -> EquilibriumPoint:
    residual = float(np.max(np.abs(vector_field(spec, x))))
    map_residual = float(np.max(np.abs(x - equilibrium_map(spec, x))))
    t = acceptance_from_state(spec, x)
    defect = complementarity_defect(spec, x, t)
    check_tol = 10.0 * tol * max(1.0, float(spec.capacity.max()))
    if defect > check_tol:
        raise ConvergenceError(
            f"converged state fails the complementarity check "
            f"(defect {defect:.3e} > {check_tol:.3e})", residual, iterations)
    # the throttle evaluated with a saturation window wide enough to see
    # a boundary approached only to within the solve tolerance
    sat_window = max(CAP_TOL, 10.0 * tol)
    throttle = acceptance(spec, x, cap_tol=sat_window)
    return EquilibriumPoint(x=x, t=t, flow_acceptance=throttle,
                            residual=residual, map_residual=map_residual,
                            method=method, iterations=iterations)


def solve_equilibrium(spec: NetworkSpec, method: str = "ode",
                      tol: float = 1e-10, max_iter: int = 50_000,
                      damping: float = 0.5, x0=None, seed=None,
                      dt: float = 0.01, chunk_time: float = 5.0,
                      max_time: float = 500.0) -> EquilibriumPoint:
    """Find the stationary point of the flow for a valid spec.

    method "ode" integrates the flow until the vector field vanishes;
    method "phi" runs the damped clip-map iteration
    x <- (1-damping) x + damping * map(x).  Both stop only once the field
    and the map defect are below tol, and both verify complementarity
    before returning.  The start point is x0 if given, else a random
    feasible state when seed is given, else empty.

    Raises ConvergenceError when the budget (max_iter map steps, or
    max_time flow time) is exhausted first.
    """
    if x0 is not None:
        x = np.asarray(x0, dtype=float)
    elif seed is not None:
        x = random_state(spec, np.random.default_rng(seed))
    else:
        x = np.zeros((spec.n_classes, spec.n_nodes))
    x = _check_state(spec, x)

    if method == "phi":
        if not 0 < damping <= 1:
            raise ValueError("damping must be in (0, 1]")
        for k in range(1, max_iter + 1):
            fx = equilibrium_map(spec, x)
            x = (1.0 - damping) * x + damping * fx
            map_defect = float(np.max(np.abs(x - equilibrium_map(spec, x))))
            if map_defect <= tol:
                field = float(np.max(np.abs(vector_field(spec, x))))
                if field <= tol:
                    return _finish_point(spec, x, "phi", k, tol)
        raise ConvergenceError("clip-map iteration did not converge",
                               float(np.max(np.abs(x - equilibrium_map(spec, x)))),
                               max_iter)

    if method == "ode":
        steps_per_chunk = max(1, int(round(chunk_time / dt)))
        steps = 0
        max_steps = int(round(max_time / dt))
        while steps < max_steps:
            path = integrate(spec, x, chunk_time, dt=dt,
                             record_every=steps_per_chunk)
            x = path.final
            steps += steps_per_chunk
            field = float(np.max(np.abs(vector_field(spec, x))))
            if field <= tol:
                map_defect = float(np.max(np.abs(x - equilibrium_map(spec, x))))
                if map_defect <= tol:
                    return _finish_point(spec, x, "ode", steps, tol)
        raise ConvergenceError("flow integration did not reach stationarity "
                               f"within time {max_time:g}",
                               float(np.max(np.abs(vector_field(spec, x)))),
                               steps)

    raise ValueError(f"unknown method {method!r}; expected 'ode' or 'phi'")


def occupancy_from_acceptance(spec: NetworkSpec, t,
                              neg_tol: float = 1e-12) -> np.ndarray:
    """Occupancy state generated by an acceptance vector t in (0, 1]^n.

    For each class, expected admission-weighted visit counts solve a
    linear system driven by the entry distribution over the class's
    reachable nodes; the occupancy is load * t_i * visits_i.  Raises
    DivergentVisitsError when the system is singular or produces negative
    counts, i.e. when the visit series diverges and t generates no state.
    """
    t = np.asarray(t, dtype=float)
    if t.shape != (spec.n_nodes,):
        raise ValueError(f"t must have shape {(spec.n_nodes,)}")
    if np.any(t <= 0) or np.any(t > 1):
        raise ValueError("acceptance factors must lie in (0, 1]")
    params = derived(spec)
    x = np.zeros((spec.n_classes, spec.n_nodes))
    for r in range(spec.n_classes):
        idx = np.flatnonzero(params.reachable[r])
        q = spec.entry[r, idx]
        hop = params.continuation[r] * t[idx, None] * spec.routing[r][np.ix_(idx, idx)]
        a = np.eye(idx.size) - hop.T
        try:
            y = np.linalg.solve(a, q)
        except np.linalg.LinAlgError as exc:
            raise DivergentVisitsError(
                f"visit counts for class {spec.class_ids[r]!r} diverge: "
                f"singular system ({exc})") from exc
        if not np.all(np.isfinite(y)) or np.any(y < -neg_tol):
            raise DivergentVisitsError(
                f"visit counts for class {spec.class_ids[r]!r} diverge: "
                f"negative or non-finite solution (min {y.min():.3g})")
        defect = float(np.max(np.abs(a @ y - q)))
        if defect > 1e-9 * max(1.0, float(np.max(np.abs(y)))):
            raise DivergentVisitsError(
                f"visit counts for class {spec.class_ids[r]!r} are unreliable: "
                f"solve residual {defect:.3e}")
        x[r, idx] = params.load[r] * t[idx] * np.maximum(y, 0.0)
    return x


def supports_acceptance(spec: NetworkSpec, t) -> bool:
    """Whether the acceptance vector t generates a finite occupancy."""
    try:
        occupancy_from_acceptance(spec, t)
    except DivergentVisitsError:
        return False
    return True


def node_totals(spec: NetworkSpec, t) -> np.ndarray:
    """Per-node total occupancy generated by an acceptance vector."""
    return occupancy_from_acceptance(spec, t).sum(axis=0)


def _routing_cumulative(spec: NetworkSpec, r: int) -> np.ndarray:
    """Row-wise cumulative routing probabilities with exit appended."""
    ext = np.concatenate([spec.routing[r], spec.exit_prob[r][:, None]], axis=1)
    return np.cumsum(ext, axis=1)


def occupancy_from_acceptance_mc(spec: NetworkSpec, t, n_paths: int = 10_000,
                                 seed=0, max_hops: int = 100_000):
    """Monte-Carlo estimate of occupancy_from_acceptance by path sampling.

    Simulates, per class, n_paths customer journeys: enter at a node drawn
    from the entry law, get admitted with probability t_i (a rejection
    ends the journey), then repeatedly either finish (one minus the
    continuation probability) or hop along the routing law and face
    admission again.  The occupancy estimate is load times the mean
    admitted-visit count per node.  Returns (estimate, standard_error),
    both shaped (n_classes, n_nodes).
    """
    t = np.asarray(t, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = derived(spec)
    n = spec.n_nodes
    est = np.zeros((spec.n_classes, n))
    se = np.zeros((spec.n_classes, n))
    for r in range(spec.n_classes):
        entry_cum = np.cumsum(spec.entry[r])
        route_cum = _routing_cumulative(spec, r)
        beta = params.continuation[r]
        counts = np.zeros((n_paths, n))
        pos = np.searchsorted(entry_cum, rng.random(n_paths), side="right")
        pos = np.minimum(pos, n - 1)
        active = np.arange(n_paths)
        hops = 0
        while active.size:
            if hops >= max_hops:
                raise RuntimeError(f"paths did not terminate within {max_hops} hops")
            hops += 1
            admitted = rng.random(active.size) < t[pos]
            active = active[admitted]
            pos = pos[admitted]
            np.add.at(counts, (active, pos), 1.0)
            if active.size == 0:
                break
            moving = rng.random(active.size) < beta
            active = active[moving]
            pos = pos[moving]
            if active.size == 0:
                break
            draws = rng.random(active.size)
            dest = (draws[:, None] >= route_cum[pos]).sum(axis=1)
            stay = dest < n
            active = active[stay]
            pos = dest[stay]
        per_path = params.load[r] * counts
        est[r] = per_path.mean(axis=0)
        se[r] = per_path.std(axis=0, ddof=1) / math.sqrt(n_paths)
    return est, se


def monotonicity_functional(spec: NetworkSpec, t, tprime) -> float:
    """The sign-definite pairing that forces equilibrium uniqueness.

    sum_i log(t'_i / t_i) * (totals_i(t') - totals_i(t)) over nodes; both
    vectors must generate finite occupancies.  Nonnegative for every such
    pair, and zero only when t = t' on every node some class can reach.
    """
    t = np.asarray(t, dtype=float)
    tprime = np.asarray(tprime, dtype=float)
    s = node_totals(spec, t)
    sprime = node_totals(spec, tprime)
    return float(np.sum(np.log(tprime / t) * (sprime - s)))


def monotonicity_functional_mc(spec: NetworkSpec, t, tprime,
                               n_paths: int = 10_000, seed=0,
                               max_hops: int = 100_000,
                               tail_tol: float = 1e-15):
    """Path-sampling estimate of monotonicity_functional.

    Along each sampled routing journey the functional contributes a
    sequence-divergence term built from the acceptance factors scaled by
    the continuation probability; averaging these per class and weighting
    by load/continuation reproduces the exact value.  Classes that never
    move contribute a closed-form single-visit term with zero variance.
    Returns (estimate, standard_error).
    """
    t = np.asarray(t, dtype=float)
    tprime = np.asarray(tprime, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = derived(spec)
    n = spec.n_nodes
    total = 0.0
    var = 0.0
    for r in range(spec.n_classes):
        beta = params.continuation[r]
        load = params.load[r]
        if beta == 0.0:
            total += load * float(np.sum(
                spec.entry[r] * np.log(tprime / t) * (tprime - t)))
            continue
        entry_cum = np.cumsum(spec.entry[r])
        route_cum = _routing_cumulative(spec, r)
        pos = np.searchsorted(entry_cum, rng.random(n_paths), side="right")
        pos = np.minimum(pos, n - 1)
        values = np.zeros(n_paths)
        prod_u = np.ones(n_paths)
        prod_v = np.ones(n_paths)
        active = np.arange(n_paths)
        hops = 0
        while active.size:
            if hops >= max_hops:
                raise RuntimeError(f"paths did not terminate within {max_hops} hops")
            hops += 1
            u = beta * t[pos]
            v = beta * tprime[pos]
            prod_u[active] *= u
            prod_v[active] *= v
            values[active] += np.log(v / u) * (prod_v[active] - prod_u[active])
            keep = (prod_u[active] > tail_tol) | (prod_v[active] > tail_tol)
            active = active[keep]
            pos = pos[keep]
            if active.size == 0:
                break
            draws = rng.random(active.size)
            dest = (draws[:, None] >= route_cum[pos]).sum(axis=1)
            stay = dest < n
            active = active[stay]
            pos = dest[stay]
        weight = load / beta
        total += weight * float(values.mean())
        var += weight ** 2 * float(values.var(ddof=1)) / n_paths
    return total, math.sqrt(var)


def route_occupancy(load: float, continuation: float, t_route,
                    cyclic: bool = False) -> np.ndarray:
    """Closed-form occupancy along a single deterministic route.

    t_route lists the acceptance factors at the visited nodes in order.
    For an open chain (enter at the first node, exit after the last) the
    occupancy at position p is load * continuation^p * prod(t up to p).
    For a loop the journey re-enters position 0 after the last node and
    the same products are summed over laps, giving the chain value divided
    by (1 - continuation^len * prod(t)); raises DivergentVisitsError when
    that series diverges.
    """
    t_route = np.asarray(t_route, dtype=float)
    if np.any(t_route <= 0) or np.any(t_route > 1):
        raise ValueError("acceptance factors must lie in (0, 1]")
    if not 0 <= continuation <= 1:
        raise ValueError("continuation must lie in [0, 1]")
    powers = continuation ** np.arange(len(t_route))
    chain = load * powers * np.cumprod(t_route)
    if not cyclic:
        return chain
    lap = continuation ** len(t_route) * float(np.prod(t_route))
    if lap >= 1.0:
        raise DivergentVisitsError(
            f"loop visit series diverges: per-lap factor {lap:g} >= 1")
    return chain / (1.0 - lap)


@dataclass(frozen=True)
class TwoNodeEquilibrium:
    """Explicit equilibrium of the symmetric two-node crossing network."""

    t: np.ndarray        # acceptance factors (t1, t2)
    x: np.ndarray        # occupancy, shape (2 classes, 2 nodes)
    case: int            # 1 both free, 2 node-2 saturated, 3 node-1, 4 both
    case_name: str

    @property
    def node_totals(self) -> np.ndarray:
        return self.x.sum(axis=0)


_TWO_NODE_CASES = {1: "both_free", 2: "node2_saturated",
                   3: "node1_saturated", 4: "both_saturated"}


def _positive_root(a: float, b: float, c: float) -> float:
    """Positive root of a*x^2 + b*x - c = 0 with a, c > 0, evaluated in the
    cancellation-free form."""
    disc = math.sqrt(b * b + 4.0 * a * c)
    if b >= 0:
        return 2.0 * c / (b + disc)
    return (disc - b) / (2.0 * a)


def two_node_case(load1: float, load2: float, cap1: float, cap2: float) -> int:
    """Which of the four saturation regimes the parameters fall in.

    The network: two nodes, one class entering at each node, crossing to
    the other node and then leaving, with no service completion en route
    (every admitted customer makes the second hop).  Exactly one regime
    applies; a tolerance-free tie between regimes raises ValueError.
    """
    if min(load1, load2, cap1, cap2) <= 0:
        raise ValueError("all parameters must be positive")
    s = load1 + load2
    flags = []
    # both nodes below capacity at full acceptance
    flags.append(s <= cap1 and s <= cap2)
    # node 2 pinned at capacity, node 1 free
    t2 = cap2 / s
    flags.append(s > cap2 and load1 + load2 * t2 <= cap1)
    # node 1 pinned at capacity, node 2 free
    t1 = cap1 / s
    flags.append(s > cap1 and load2 + load1 * t1 <= cap2)
    # both pinned: the coupled quadratic has its roots inside (0, 1)
    t1q = _positive_root(load1 ** 2,
                         load1 * load2 + cap2 * load2 - cap1 * load1,
                         cap1 * load2)
    t2q = cap2 / (load2 + load1 * t1q)
    flags.append(0.0 < t1q < 1.0 and 0.0 < t2q < 1.0)
    if sum(flags) != 1:
        raise ValueError(f"saturation regimes not uniquely determined: {flags}")
    return flags.index(True) + 1


def two_node_closed_form(load1: float, load2: float,
                         cap1: float, cap2: float) -> TwoNodeEquilibrium:
    """Explicit equilibrium for the two-node crossing network.

    Class 1 enters node 1 and hops to node 2; class 2 enters node 2 and
    hops to node 1; admitted customers always complete both hops.  The
    four regimes (which nodes sit at capacity) are selected exactly and
    solved in closed form; the saturated-saturated regime reduces to a
    quadratic in t1.
    """
    case = two_node_case(load1, load2, cap1, cap2)
    s = load1 + load2
    if case == 1:
        t1, t2 = 1.0, 1.0
    elif case == 2:
        t1, t2 = 1.0, cap2 / s
    elif case == 3:
        t1, t2 = cap1 / s, 1.0
    else:
        t1 = _positive_root(load1 ** 2,
                            load1 * load2 + cap2 * load2 - cap1 * load1,
                            cap1 * load2)
        t2 = cap2 / (load2 + load1 * t1)
    x = np.array([[load1 * t1, load1 * t1 * t2],
                  [load2 * t2 * t1, load2 * t2]])
    return TwoNodeEquilibrium(t=np.array([t1, t2]), x=x, case=case,
                              case_name=_TWO_NODE_CASES[case])


def two_node_spec(load1: float, load2: float, cap1: float, cap2: float) -> NetworkSpec:
    """NetworkSpec realizing the two-node crossing network.

    Unit move rate and zero service rate, so the load parameters equal the
    arrival rates and every admitted customer completes both hops.
    """
    return spec_from_dict({
        "nodes": [{"id": "n1", "capacity": cap1}, {"id": "n2", "capacity": cap2}],
        "classes": [
            {"id": "fwd", "lambda": load1, "mu": 0.0, "gamma": 1.0,
             "entry": {"n1": 1.0},
             "routing": {"n1": {"n2": 1.0}, "n2": {"exit": 1.0}}},
            {"id": "rev", "lambda": load2, "mu": 0.0, "gamma": 1.0,
             "entry": {"n2": 1.0},
             "routing": {"n2": {"n1": 1.0}, "n1": {"exit": 1.0}}},
        ],
    })


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of the multi-start uniqueness probe."""

    points: list            # converged EquilibriumPoint per successful start
    max_spread: float       # max pairwise sup-distance between states
    t_spread: float         # max pairwise sup-distance between t vectors
    n_failed: int           # starts whose solve did not converge
    tol: float
    verdict: str            # "pass", "fail", or "inconclusive"


def uniqueness_probe(spec: NetworkSpec, n_starts: int = 20, tol: float = 1e-6,
                     seed: int = 0, method: str = "ode",
                     solver_tol: float = 1e-9, **solver_kwargs) -> ProbeResult:
    """Solve from many random feasible starts and measure the spread.

    A spread within tol supports uniqueness (it can never prove it); a
    failed start makes the probe inconclusive rather than a refutation,
    since the flow is not guaranteed to converge from everywhere.
    """
    rng = np.random.default_rng(seed)
    points = []
    n_failed = 0
    for _ in range(n_starts):
        x0 = random_state(spec, rng)
        try:
            points.append(solve_equilibrium(spec, method=method, tol=solver_tol,
                                            x0=x0, **solver_kwargs))
        except ConvergenceError:
            n_failed += 1
    max_spread = 0.0
    t_spread = 0.0
    for a in range(len(points)):
        for b in range(a + 1, len(points)):
            max_spread = max(max_spread, float(
                np.max(np.abs(points[a].x - points[b].x))))
            t_spread = max(t_spread, float(
                np.max(np.abs(points[a].t - points[b].t))))
    if n_failed:
        verdict = "inconclusive"
    elif max_spread <= tol:
        verdict = "pass"
    else:
        verdict = "fail"
    return ProbeResult(points=points, max_spread=max_spread, t_spread=t_spread,
                       n_failed=n_failed, tol=tol, verdict=verdict)
