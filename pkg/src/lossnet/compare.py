"""Empirical check that scaled simulations approach the fluid path.

Runs replicas at increasing scale from the empty state, measures the
replica-mean sup-norm distance to the fluid trajectory started from the
same (zero) initial condition, and compares windowed per-node acceptance
rates at the largest scale to the equilibrium acceptance factors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ctmc import replicate
from .equilibrium import solve_equilibrium
from .fluid import integrate
from .model import NetworkSpec, require_valid


@dataclass(frozen=True)
class ScalingStudy:
    """Per-scale distances plus the largest-scale acceptance comparison."""

    scales: tuple
    horizon: float
    n_replicas: int
    seed: int
    warmup: float
    grid: np.ndarray               # shared sample times, shape (T,)
    fluid_states: np.ndarray       # (T, n_classes, n_nodes)
    mean_paths: np.ndarray         # (n_scales, T, n_classes, n_nodes)
    sup_distance: np.ndarray       # (n_scales,) replica means
    sup_distance_se: np.ndarray    # (n_scales,) standard errors
    acceptance: np.ndarray         # (n,) pooled empirical, largest scale
    acceptance_target: np.ndarray  # (n,) equilibrium acceptance factors

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.sup_distance) < 0))

    @property
    def acceptance_gap(self) -> float:
        gap = np.abs(self.acceptance - self.acceptance_target)
        return float(np.nanmax(gap))


def _pooled_acceptance(trajectories, warmup: float, horizon: float):
    """Accepted/offered per node, counters summed across replicas."""
    total = None
    for traj in trajectories:
        ka = int(np.searchsorted(traj.times, warmup, side="left"))
        kb = len(traj.times) - 1
        delta = traj.counter_series[kb] - traj.counter_series[ka]
        total = delta if total is None else total + delta
    offered = (total[0] + total[2]).astype(float)
    accepted = (total[1] + total[3]).astype(float)
    return np.where(offered > 0,
                    accepted / np.where(offered > 0, offered, 1.0), np.nan)


def scaling_study(spec: NetworkSpec, scales=(10, 100, 1000),
                  horizon: float = 10.0, n_replicas: int = 20,
                  seed: int = 0, dt: float = 0.01, sample_dt=None,
                  warmup=None, workers: int = 1) -> ScalingStudy:
    """Run the convergence study from the empty initial condition.

    The acceptance comparison window is [warmup, horizon] (default
    warmup horizon/2, past the fill transient); distances use the whole
    horizon.  Replica streams are keyed by (seed, replica), so results
    are reproducible for a fixed configuration.
    """
    require_valid(spec)
    scales = tuple(int(s) for s in scales)
    if not scales or any(s <= 0 for s in scales):
        raise ValueError("scales must be positive integers")
    if sample_dt is None:
        sample_dt = horizon / 100.0
    if warmup is None:
        warmup = horizon / 2.0

    # same grid construction as the simulator, so states line up exactly
    n_samples = max(1, int(round(horizon / sample_dt)))
    grid = np.linspace(0.0, horizon, n_samples + 1)
    x0 = np.zeros((spec.n_classes, spec.n_nodes))
    path = integrate(spec, x0, horizon, dt=dt)
    fluid_states = path.at(grid)

    sup_mean, sup_se, means = [], [], []
    last_trajs = None
    for scale in scales:
        trajs = replicate(spec, scale, horizon, n_replicas, seed=seed,
                          sample_dt=sample_dt, warmup=warmup,
                          workers=workers)
        dists = np.array([np.max(np.abs(traj.states - fluid_states))
                          for traj in trajs])
        sup_mean.append(dists.mean())
        sup_se.append(dists.std(ddof=1) / np.sqrt(len(dists))
                      if len(dists) > 1 else 0.0)
        means.append(np.mean([traj.states for traj in trajs], axis=0))
        last_trajs = trajs

    target = solve_equilibrium(spec, method="ode", tol=1e-9).t
    empirical = _pooled_acceptance(last_trajs, warmup, horizon)
    return ScalingStudy(scales=scales, horizon=horizon,
                        n_replicas=n_replicas, seed=seed, warmup=warmup,
                        grid=grid, fluid_states=fluid_states,
                        mean_paths=np.stack(means),
                        sup_distance=np.array(sup_mean),
                        sup_distance_se=np.array(sup_se),
                        acceptance=empirical, acceptance_target=target)


def study_report(spec: NetworkSpec, study: ScalingStudy) -> dict:
    """JSON-ready summary: per-scale table, verdict, acceptance check."""
    table = [{"scale": int(s),
              "sup_distance": float(study.sup_distance[k]),
              "standard_error": float(study.sup_distance_se[k])}
             for k, s in enumerate(study.scales)]
    acceptance = {nid: {"empirical": float(study.acceptance[i]),
                        "target": float(study.acceptance_target[i]),
                        "gap": float(abs(study.acceptance[i]
                                         - study.acceptance_target[i]))}
                  for i, nid in enumerate(spec.node_ids)}
    return {
        "scales": list(study.scales),
        "horizon": study.horizon,
        "warmup": study.warmup,
        "n_replicas": study.n_replicas,
        "distances": table,
        "monotone_decreasing": study.monotone,
        "acceptance": acceptance,
        "max_acceptance_gap": study.acceptance_gap,
    }


def study_rows(study: ScalingStudy):
    """Rows for the delimited per-scale table."""
    return [(int(s), float(study.sup_distance[k]),
             float(study.sup_distance_se[k]))
            for k, s in enumerate(study.scales)]
