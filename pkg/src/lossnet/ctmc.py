"""Exact stochastic simulation of the finite-capacity network at scale N.

The process holds integer per-(class, node) counts; nodes have capacity
floor(c_i * N) and arrival rates are scaled by N.  Events are drawn with
the aggregated-rate (Gillespie) method: one exponential clock at the total
event rate, then a categorical draw over event kinds in a fixed order
(arrivals by class then node, departures by class then node, then the
destination).  A blocked arrival leaves the state unchanged; a blocked
transfer removes the customer.  Both are tallied per node so empirical
acceptance fractions can be compared with the deterministic throttle.

Total rates are recomputed from the integer counts at every event, so no
floating-point drift accumulates over long runs.  Per-node dwell times at
each occupancy level and per-coordinate occupancy integrals are tracked
lazily (flushed only when the touched quantity changes), keeping the
per-event cost constant.

For instances whose state space is small enough to enumerate, the exact
generator matrix and its stationary law provide an independent oracle for
the simulator.
"""

from __future__ import annotations

from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .model import NetworkSpec, derived

RNG_BLOCK = 8192


def scaled_capacities(spec: NetworkSpec, scale: int) -> np.ndarray:
    """Integer node capacities floor(c_i * N) at scale N."""
    if scale < 1:
        raise ValueError("scale must be a positive integer")
    return np.floor(spec.capacity * scale + 1e-12).astype(np.int64)


@dataclass(frozen=True)
class SimState:
    """Integer occupancy counts with their scale and clock."""

    counts: np.ndarray  # (n_classes, n_nodes) nonnegative integers
    scale: int
    clock: float = 0.0


def empty_state(spec: NetworkSpec, scale: int) -> SimState:
    return SimState(counts=np.zeros((spec.n_classes, spec.n_nodes), dtype=np.int64),
                    scale=scale)


def check_sim_state(spec: NetworkSpec, state: SimState) -> None:
    """Raise unless the state is reachable by the dynamics at its scale."""
    counts = np.asarray(state.counts)
    if counts.shape != (spec.n_classes, spec.n_nodes):
        raise ValueError(f"counts must have shape {(spec.n_classes, spec.n_nodes)}")
    if np.any(counts < 0) or not np.issubdtype(counts.dtype, np.integer):
        raise ValueError("counts must be nonnegative integers")
    caps = scaled_capacities(spec, state.scale)
    totals = counts.sum(axis=0)
    if np.any(totals > caps):
        i = int(np.argmax(totals - caps))
        raise ValueError(f"node {spec.node_ids[i]!r} holds {totals[i]} customers "
                         f"but capacity at this scale is {caps[i]}")
    reach = derived(spec).reachable
    if np.any(counts[~reach] != 0):
        r, i = [int(v[0]) for v in np.nonzero(counts * ~reach)]
        raise ValueError(f"class {spec.class_ids[r]!r} cannot reach node "
                         f"{spec.node_ids[i]!r} but has count {counts[r, i]}")


@dataclass(frozen=True)
class Trajectory:
    """A sampled simulation path with its event accounting.

    states are rescaled (counts / N) on the sample grid.  The four counter
    arrays hold per-node event totals over [warmup, horizon];
    counter_series holds their cumulative values at each sample time in
    the order (arrivals_offered, arrivals_accepted, transfers_offered,
    transfers_accepted).  occupancy_series is the running time integral of
    the rescaled state, so windowed time averages are exact differences.
    level_time[i] gives the total time node i spent at each occupancy
    level (0 .. capacity) over [warmup, horizon].
    """

    times: np.ndarray              # (T,)
    states: np.ndarray             # (T, n_classes, n_nodes)
    arrivals_offered: np.ndarray   # (n,)
    arrivals_accepted: np.ndarray  # (n,)
    transfers_offered: np.ndarray  # (n,)
    transfers_accepted: np.ndarray # (n,)
    counter_series: np.ndarray     # (T, 4, n)
    occupancy_series: np.ndarray   # (T, n_classes, n_nodes)
    level_time: tuple              # per node, array of length cap+1
    scale: int
    horizon: float
    warmup: float
    event_count: int
    seed_key: tuple


def simulate(spec: NetworkSpec, scale: int, horizon: float,
             initial="empty", seed=0, sample_dt=None,
             warmup: float = 0.0) -> Trajectory:
    """Simulate the network at scale N over [0, horizon].

    ``initial`` is "empty" or a SimState at the same scale.  ``seed`` is
    an integer or tuple fed to a counter-based generator, so (seed,
    replica) tuples give independent replica streams.  States are sampled
    on a fixed grid (default horizon/500); counters and level dwell times
    accrue from ``warmup`` onward.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if not 0 <= warmup < horizon:
        raise ValueError("warmup must lie in [0, horizon)")
    caps_arr = scaled_capacities(spec, scale)
    if initial == "empty":
        init = empty_state(spec, scale)
    elif isinstance(initial, SimState):
        init = initial
        if init.scale != scale:
            raise ValueError("initial state has a different scale")
    else:
        init = SimState(counts=np.asarray(initial, dtype=np.int64), scale=scale)
    check_sim_state(spec, init)

    m, n = spec.n_classes, spec.n_nodes
    if sample_dt is None:
        sample_dt = horizon / 500.0
    n_samples = max(1, int(round(horizon / sample_dt)))
    grid = np.linspace(0.0, horizon, n_samples + 1)

    seed_key = seed if isinstance(seed, tuple) else (seed,)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_key)))

    # flat-list state for the hot loop
    caps = caps_arr.tolist()
    x = init.counts.reshape(-1).tolist()                  # index r*n + i
    node_tot = init.counts.sum(axis=0).tolist()
    class_tot = init.counts.sum(axis=1).tolist()
    w = (spec.move_rate + spec.service_rate).tolist()     # per-customer rate
    service_frac = [float(spec.service_rate[r] / w[r]) for r in range(m)]
    lam_flat = (spec.arrival_rate[:, None] * spec.entry * scale).reshape(-1)
    arrival_cum = np.cumsum(lam_flat).tolist()
    # the arrival branch threshold must be the same float as the last
    # cumulative entry, or a draw could fall between the two
    lam_total = arrival_cum[-1]
    route_cum = [np.cumsum(np.concatenate(
        [spec.routing[r], spec.exit_prob[r][:, None]], axis=1), axis=1).tolist()
        for r in range(m)]

    # counters (from warmup on)
    arr_off = [0] * n
    arr_acc = [0] * n
    tr_off = [0] * n
    tr_acc = [0] * n

    # lazy exact accounting
    level_time = [np.zeros(caps[i] + 1) for i in range(n)]
    level_last = [0.0] * n
    integral = [0.0] * (m * n)   # unscaled integral of each coordinate
    int_last = [0.0] * (m * n)

    # sample-grid storage
    T = len(grid)
    states_out = np.empty((T, m, n))
    counters_out = np.zeros((T, 4, n), dtype=np.int64)
    occupancy_out = np.empty((T, m, n))

    uni = rng.random(RNG_BLOCK)
    exp = rng.standard_exponential(RNG_BLOCK)
    iu = ie = 0

    def next_u():
        nonlocal uni, iu
        if iu >= RNG_BLOCK:
            uni = rng.random(RNG_BLOCK)
            iu = 0
        v = uni[iu]
        iu += 1
        return v

    def next_exp():
        nonlocal exp, ie
        if ie >= RNG_BLOCK:
            exp = rng.standard_exponential(RNG_BLOCK)
            ie = 0
        v = exp[ie]
        ie += 1
        return v

    def touch_node(i, now):
        span = min(now, horizon) - max(level_last[i], warmup)
        if span > 0:
            level_time[i][node_tot[i]] += span
        level_last[i] = now

    def touch_coord(k, now):
        integral[k] += x[k] * (now - int_last[k])
        int_last[k] = now

    def flush_grid(k_grid, now):
        # record every grid point strictly before now (state is constant
        # on the interval since the previous event)
        while k_grid < T and grid[k_grid] < now:
            g = grid[k_grid]
            for k in range(m * n):
                integral[k] += x[k] * (g - int_last[k])
                int_last[k] = g
            row = np.asarray(x, dtype=float).reshape(m, n)
            assert np.all(row.sum(axis=0) <= caps_arr) and np.all(row >= 0)
            states_out[k_grid] = row / scale
            occupancy_out[k_grid] = np.asarray(integral).reshape(m, n) / scale
            counters_out[k_grid, 0] = arr_off
            counters_out[k_grid, 1] = arr_acc
            counters_out[k_grid, 2] = tr_off
            counters_out[k_grid, 3] = tr_acc
            k_grid += 1
        return k_grid

    t = 0.0
    k_grid = 0
    events = 0
    while True:
        rate = lam_total
        for r in range(m):
            rate += class_tot[r] * w[r]
        t_new = t + next_exp() / rate
        if t_new >= horizon:
            k_grid = flush_grid(k_grid, horizon + 1.0)
            for i in range(n):
                touch_node(i, horizon)
            break
        k_grid = flush_grid(k_grid, t_new)
        events += 1
        counted = t_new >= warmup
        u = next_u() * rate
        if u < lam_total:
            idx = bisect_right(arrival_cum, u)
            if idx >= m * n:
                idx = m * n - 1
            r, i = divmod(idx, n)
            if counted:
                arr_off[i] += 1
            if node_tot[i] < caps[i]:
                if counted:
                    arr_acc[i] += 1
                touch_node(i, t_new)
                touch_coord(idx, t_new)
                x[idx] += 1
                node_tot[i] += 1
                class_tot[r] += 1
        else:
            v = u - lam_total
            r = m - 1
            acc = 0.0
            for rr in range(m):
                acc += class_tot[rr] * w[rr]
                if v < acc:
                    r = rr
                    break
            if class_tot[r] == 0:  # rounding fell past the populated classes
                r = max(rr for rr in range(m) if class_tot[rr] > 0)
            v_r = (v - (acc - class_tot[r] * w[r])) / w[r]
            i = -1
            ci = 0
            base = r * n
            for ii in range(n):
                ci += x[base + ii]
                if v_r < ci:
                    i = ii
                    break
            if i < 0:  # rounding fell off the end; take the last occupied node
                for ii in range(n - 1, -1, -1):
                    if x[base + ii] > 0:
                        i = ii
                        break
            k = base + i
            if service_frac[r] > 0.0 and next_u() < service_frac[r]:
                dest = n  # service completion leaves the network
            else:
                ud = next_u()
                row = route_cum[r][i]
                dest = n
                for jj in range(n + 1):
                    if ud < row[jj]:
                        dest = jj
                        break
            if dest >= n:
                touch_node(i, t_new)
                touch_coord(k, t_new)
                x[k] -= 1
                node_tot[i] -= 1
                class_tot[r] -= 1
            else:
                j = dest
                if counted:
                    tr_off[j] += 1
                if node_tot[j] < caps[j]:
                    if counted:
                        tr_acc[j] += 1
                    touch_node(i, t_new)
                    touch_node(j, t_new)
                    touch_coord(k, t_new)
                    touch_coord(base + j, t_new)
                    x[k] -= 1
                    x[base + j] += 1
                    node_tot[i] -= 1
                    node_tot[j] += 1
                else:
                    # destination full: the transfer is lost and the
                    # customer leaves the network
                    touch_node(i, t_new)
                    touch_coord(k, t_new)
                    x[k] -= 1
                    node_tot[i] -= 1
                    class_tot[r] -= 1
        t = t_new

    return Trajectory(
        times=grid,
        states=states_out,
        arrivals_offered=np.asarray(arr_off, dtype=np.int64),
        arrivals_accepted=np.asarray(arr_acc, dtype=np.int64),
        transfers_offered=np.asarray(tr_off, dtype=np.int64),
        transfers_accepted=np.asarray(tr_acc, dtype=np.int64),
        counter_series=counters_out,
        occupancy_series=occupancy_out,
        level_time=tuple(level_time),
        scale=scale,
        horizon=horizon,
        warmup=warmup,
        event_count=events,
        seed_key=seed_key,
    )


def _replica_args(args):
    spec, scale, horizon, seed, k, sample_dt, warmup = args
    return simulate(spec, scale, horizon, seed=(seed, k),
                    sample_dt=sample_dt, warmup=warmup)


def replicate(spec: NetworkSpec, scale: int, horizon: float, n_replicas: int,
              seed: int = 0, sample_dt=None, warmup: float = 0.0,
              workers: int = 1) -> list:
    """Independent replicas with per-replica streams keyed by (seed, k).

    ``workers`` > 1 fans the replicas out across processes; results are
    identical and ordered by replica index either way.
    """
    jobs = [(spec, scale, horizon, seed, k, sample_dt, warmup)
            for k in range(n_replicas)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_replica_args, jobs))
    return [_replica_args(job) for job in jobs]


def acceptance_rates(traj: Trajectory, window=None) -> np.ndarray:
    """Per-node fraction of admission attempts (arrivals and transfers)
    that were accepted; nan where nothing was offered.

    ``window=(a, b)`` restricts to attempts between the sample times
    nearest a and b; default is everything after warmup.
    """
    if window is None:
        offered = traj.arrivals_offered + traj.transfers_offered
        accepted = traj.arrivals_accepted + traj.transfers_accepted
    else:
        a, b = window
        ka = int(np.searchsorted(traj.times, a, side="left"))
        kb = int(np.searchsorted(traj.times, b, side="left"))
        kb = min(kb, len(traj.times) - 1)
        delta = traj.counter_series[kb] - traj.counter_series[ka]
        offered = delta[0] + delta[2]
        accepted = delta[1] + delta[3]
    offered = offered.astype(float)
    return np.where(offered > 0, accepted / np.where(offered > 0, offered, 1.0),
                    np.nan)


def occupancy_time_average(traj: Trajectory, window=None) -> np.ndarray:
    """Time-averaged rescaled occupancy over the window (default full run)."""
    if window is None:
        ka, kb = 0, len(traj.times) - 1
    else:
        a, b = window
        ka = int(np.searchsorted(traj.times, a, side="left"))
        kb = min(int(np.searchsorted(traj.times, b, side="left")),
                 len(traj.times) - 1)
    span = traj.times[kb] - traj.times[ka]
    if span <= 0:
        raise ValueError("window spans no time")
    return (traj.occupancy_series[kb] - traj.occupancy_series[ka]) / span


def level_fractions(traj: Trajectory, node: int) -> np.ndarray:
    """Fraction of accrued time node spent at each occupancy level."""
    dwell = traj.level_time[node]
    return dwell / dwell.sum()


def _node_compositions(cap: int, classes: list) -> list:
    """All ways to place 0..cap customers of the given classes on a node."""
    if not classes:
        return [()]
    out = []

    def rec(prefix, remaining, left):
        if not remaining:
            out.append(tuple(prefix))
            return
        for v in range(left + 1):
            rec(prefix + [v], remaining[1:], left - v)

    rec([], classes, cap)
    return out


def build_generator(spec: NetworkSpec, scale: int, max_states: int = 100_000):
    """Enumerate the state space at scale N and build the exact generator.

    Returns (states, Q) where states is the list of (n_classes, n_nodes)
    count tuples (flattened row-major) indexing the sparse rate matrix Q.
    Raises ValueError when the state count would exceed max_states.
    """
    m, n = spec.n_classes, spec.n_nodes
    caps = scaled_capacities(spec, scale)
    reach = derived(spec).reachable
    per_node = []
    total = 1
    for i in range(n):
        classes = [r for r in range(m) if reach[r, i]]
        combos = _node_compositions(int(caps[i]), classes)
        full = []
        for combo in combos:
            row = [0] * m
            for r, v in zip(classes, combo):
                row[r] = v
            full.append(tuple(row))
        per_node.append(full)
        total *= len(full)
        if total > max_states:
            raise ValueError(f"state space exceeds {max_states} states")

    states = []

    def build(i, current):
        if i == n:
            # current[i][r] -> flatten as counts[r][i]
            flat = tuple(current[ii][r] for r in range(m) for ii in range(n))
            states.append(flat)
            return
        for option in per_node[i]:
            build(i + 1, current + [option])

    build(0, [])
    index = {s: k for k, s in enumerate(states)}

    lam = spec.arrival_rate * scale
    rows, cols, vals = [], [], []

    def add(a, b, rate):
        if rate > 0:
            rows.append(a)
            cols.append(b)
            vals.append(rate)

    for s, state in enumerate(states):
        counts = state
        node_tot = [sum(counts[r * n + i] for r in range(m)) for i in range(n)]
        for r in range(m):
            for i in range(n):
                k = r * n + i
                # arrival
                rate_in = lam[r] * spec.entry[r, i]
                if rate_in > 0 and node_tot[i] < caps[i]:
                    target = list(counts)
                    target[k] += 1
                    add(s, index[tuple(target)], rate_in)
                c = counts[k]
                if c == 0:
                    continue
                # departures that remove the customer: service, routed exit,
                # and transfers blocked at a full destination
                leave = spec.service_rate[r] + spec.move_rate[r] * spec.exit_prob[r, i]
                for j in range(n):
                    p = spec.routing[r, i, j]
                    if p == 0:
                        continue
                    if node_tot[j] < caps[j]:
                        target = list(counts)
                        target[k] -= 1
                        target[r * n + j] += 1
                        add(s, index[tuple(target)], c * spec.move_rate[r] * p)
                    else:
                        leave += spec.move_rate[r] * p
                if leave > 0:
                    target = list(counts)
                    target[k] -= 1
                    add(s, index[tuple(target)], c * leave)

    q = scipy.sparse.coo_matrix((vals, (rows, cols)),
                                shape=(len(states), len(states))).tocsr()
    q = q - scipy.sparse.diags(np.asarray(q.sum(axis=1)).ravel())
    return states, q


def stationary(q, tol: float = 1e-12) -> np.ndarray:
    """Stationary law of an irreducible generator: pi q = 0, sum(pi) = 1.

    Solves the transposed system with the normalization replacing one
    equation; raises ValueError when the generator is reducible (singular
    solve, non-finite or negative solution, or residual above tol).
    """
    q = scipy.sparse.csr_matrix(q)
    size = q.shape[0]
    a = q.T.tolil()
    a[size - 1, :] = 1.0
    b = np.zeros(size)
    b[size - 1] = 1.0
    try:
        pi = scipy.sparse.linalg.spsolve(a.tocsc(), b)
    except RuntimeError as exc:
        raise ValueError(f"generator appears reducible: {exc}") from exc
    if not np.all(np.isfinite(pi)) or np.any(pi < -tol):
        raise ValueError("generator appears reducible: no positive stationary law")
    pi = np.maximum(pi, 0.0)
    pi = pi / pi.sum()
    residual = float(np.max(np.abs(pi @ q)))
    if residual > tol * max(1.0, float(np.abs(q.data).max() if q.nnz else 1.0)):
        raise ValueError(f"stationary solve residual {residual:.3e} exceeds "
                         f"tolerance (reducible or ill-conditioned generator)")
    return pi
