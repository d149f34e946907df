"""Deterministic mass-balance dynamics for the scaled network.

State is an array x of shape (n_classes, n_nodes): x[r, i] is the mass of
class-r customers at node i, in units of the capacity scale.  Mass flows
in through external arrivals and transfers, and out through service
completion and moves.  A full node throttles every incoming stream by a
common acceptance factor chosen so the node's total never exceeds its
capacity: while saturated, admissions are limited to the rate at which
departures free space, which makes the flow tangent to the capacity
boundary rather than bouncing off it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NetworkSpec, derived

CAP_TOL = 1e-9


def _check_state(spec: NetworkSpec, x, cap_tol: float = CAP_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n_classes, spec.n_nodes):
        raise ValueError(f"state must have shape {(spec.n_classes, spec.n_nodes)}, "
                         f"got {x.shape}")
    if np.any(x < -cap_tol):
        r, i = np.unravel_index(np.argmin(x), x.shape)
        raise ValueError(f"negative mass {x[r, i]:.3g} for class "
                         f"{spec.class_ids[r]!r} at node {spec.node_ids[i]!r}")
    total = x.sum(axis=0)
    over = total - spec.capacity
    if np.any(over > cap_tol):
        i = int(np.argmax(over))
        raise ValueError(f"node {spec.node_ids[i]!r} exceeds capacity: "
                         f"total {total[i]:.12g} > {spec.capacity[i]:.12g}")
    return x


def offered_inflow(spec: NetworkSpec, x: np.ndarray) -> np.ndarray:
    """Per-(class, node) inflow rate before acceptance throttling.

    Sum of external arrivals routed to the node and transfer attempts from
    every other node, shape (n_classes, n_nodes).
    """
    x = np.asarray(x, dtype=float)
    external = spec.arrival_rate[:, None] * spec.entry
    transfers = spec.move_rate[:, None] * np.einsum("rj,rji->ri", x, spec.routing)
    return external + transfers


def release_rate(spec: NetworkSpec, x: np.ndarray) -> np.ndarray:
    """Per-(class, node) rate at which customers leave and free capacity."""
    x = np.asarray(x, dtype=float)
    return (spec.move_rate + spec.service_rate)[:, None] * x


@dataclass(frozen=True)
class NodeFlow:
    """Aggregate per-node flow quantities at a given state."""

    total: np.ndarray       # occupancy summed over classes, shape (n,)
    inflow: np.ndarray      # offered admission rate, shape (n,)
    outflow: np.ndarray     # capacity release rate, shape (n,)
    rho: np.ndarray         # outflow/inflow, nan where inflow is 0
    saturated: np.ndarray   # bool, total within cap_tol of capacity
    acceptance: np.ndarray  # throttle factor in (0, 1], shape (n,)


def _throttle(total, inflow, outflow, capacity, cap_tol):
    saturated = total >= capacity - cap_tol
    ratio = np.where(inflow > 0, outflow / np.where(inflow > 0, inflow, 1.0), np.inf)
    # an idle inlet needs no throttling, so a saturated node with zero
    # offered inflow keeps acceptance 1
    accept = np.where(saturated, np.minimum(ratio, 1.0), 1.0)
    return saturated, accept


def node_flows(spec: NetworkSpec, x: np.ndarray, cap_tol: float = CAP_TOL) -> NodeFlow:
    x = _check_state(spec, x, cap_tol)
    total = x.sum(axis=0)
    inflow = offered_inflow(spec, x).sum(axis=0)
    outflow = release_rate(spec, x).sum(axis=0)
    saturated, accept = _throttle(total, inflow, outflow, spec.capacity, cap_tol)
    rho = np.where(inflow > 0, outflow / np.where(inflow > 0, inflow, 1.0), np.nan)
    return NodeFlow(total=total, inflow=inflow, outflow=outflow, rho=rho,
                    saturated=saturated, acceptance=accept)


def acceptance(spec: NetworkSpec, x: np.ndarray, cap_tol: float = CAP_TOL) -> np.ndarray:
    """Per-node acceptance factor at state x, shape (n,).

    1 strictly inside the capacity region; on a saturated node, the ratio
    of release rate to offered inflow capped at 1 (and 1 again if nothing
    is offered).
    """
    return node_flows(spec, x, cap_tol).acceptance


def vector_field(spec: NetworkSpec, x: np.ndarray, cap_tol: float = CAP_TOL) -> np.ndarray:
    """Time derivative of the mass state, shape (n_classes, n_nodes)."""
    x = _check_state(spec, x, cap_tol)
    inflow = offered_inflow(spec, x)
    release = release_rate(spec, x)
    _, accept = _throttle(x.sum(axis=0), inflow.sum(axis=0), release.sum(axis=0),
                          spec.capacity, cap_tol)
    return inflow * accept[None, :] - release


@dataclass(frozen=True)
class FreeCapacityLaw:
    """Stationary behavior of a node's free capacity at a frozen state.

    On the event-rate scale, a node's free space gains a unit whenever a
    customer leaves and loses one on each admission, a birth-death process
    with birth rate proportional to the node's release rate and death rate
    proportional to its offered inflow.  When admissions strictly dominate
    the process is positive recurrent and free space is geometrically
    distributed; otherwise free space drifts away (the node cannot stay
    pinned at capacity).
    """

    ergodic: bool
    parameter: float | None  # geometric parameter outflow/inflow if ergodic
    inflow: float
    outflow: float


def free_capacity_analysis(spec: NetworkSpec, x: np.ndarray, node,
                           cap_tol: float = CAP_TOL) -> FreeCapacityLaw:
    """Classify the free-capacity birth-death process at one node.

    ``node`` is a node id or index.  Ergodicity requires the offered
    inflow to strictly exceed the release rate; the equality case is null
    recurrent and reported as not ergodic.
    """
    i = spec.node_index(node) if isinstance(node, str) else int(node)
    flows = node_flows(spec, x, cap_tol)
    inflow = float(flows.inflow[i])
    outflow = float(flows.outflow[i])
    ergodic = inflow > outflow
    return FreeCapacityLaw(ergodic=ergodic,
                           parameter=outflow / inflow if ergodic else None,
                           inflow=inflow, outflow=outflow)


def node_total_drift(spec: NetworkSpec, x: np.ndarray, cap_tol: float = CAP_TOL) -> np.ndarray:
    """Net drift of each node's total occupancy; zero on a throttled node."""
    return vector_field(spec, x, cap_tol).sum(axis=0)


def project_state(spec: NetworkSpec, x: np.ndarray) -> np.ndarray:
    """Pull a state back into the feasible region.

    Negative entries are clipped to zero and any node whose total exceeds
    capacity has its class masses rescaled proportionally.  Integration
    steps land at most O(dt * rates) outside the region, so the projection
    is a small correction, not a source of dynamics.
    """
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    total = x.sum(axis=0)
    over = total > spec.capacity
    if np.any(over):
        scale = np.ones_like(total)
        scale[over] = spec.capacity[over] / total[over]
        x = x * scale[None, :]
    return x


@dataclass(frozen=True)
class FluidPath:
    """Sampled trajectory of the deterministic flow."""

    times: np.ndarray   # (T,)
    states: np.ndarray  # (T, n_classes, n_nodes)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def at(self, t) -> np.ndarray:
        """Linear interpolation of the state at time(s) t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        flat = self.states.reshape(len(self.times), -1)
        out = np.empty((len(t), flat.shape[1]))
        for k in range(flat.shape[1]):
            out[:, k] = np.interp(t, self.times, flat[:, k])
        return out.reshape((len(t),) + self.states.shape[1:])


def integrate(spec: NetworkSpec, x0: np.ndarray, horizon: float,
              dt: float = 0.01, record_every: int = 1,
              cap_tol: float = CAP_TOL) -> FluidPath:
    """Integrate the flow from x0 over [0, horizon] with fixed-step RK4.

    Stage evaluations are projected into the feasible region before the
    field is applied, and so is the completed step, keeping every recorded
    state feasible.  ``record_every`` keeps one state per that many steps
    (the initial and final states are always kept).
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if record_every < 1:
        raise ValueError("record_every must be at least 1")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.n_classes, spec.n_nodes):
        raise ValueError(f"state must have shape {(spec.n_classes, spec.n_nodes)}")
    x = project_state(spec, x0)
    n_steps = int(round(horizon / dt))
    times = [0.0]
    states = [x]

    def field(y):
        return vector_field(spec, project_state(spec, y), cap_tol)

    for step in range(n_steps):
        k1 = field(x)
        k2 = field(x + 0.5 * dt * k1)
        k3 = field(x + 0.5 * dt * k2)
        k4 = field(x + dt * k3)
        x = project_state(spec, x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))
        if (step + 1) % record_every == 0 or step == n_steps - 1:
            times.append((step + 1) * dt)
            states.append(x)
    return FluidPath(times=np.asarray(times), states=np.asarray(states))


def random_state(spec: NetworkSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw a state uniformly from the feasible region, node by node.

    For each node the class masses are uniform on the solid simplex
    {sum_r x_r <= capacity} restricted to the classes that can actually
    reach the node (a flat Dirichlet draw with one slack coordinate);
    unreachable (class, node) coordinates stay zero.
    """
    reach = derived(spec).reachable
    x = np.zeros((spec.n_classes, spec.n_nodes))
    for i in range(spec.n_nodes):
        classes = np.flatnonzero(reach[:, i])
        if classes.size == 0:
            continue
        weights = rng.dirichlet(np.ones(classes.size + 1))
        x[classes, i] = spec.capacity[i] * weights[:-1]
    return x
