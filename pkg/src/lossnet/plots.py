"""Figure rendering for the report paths.

All figures go straight to files through the Agg backend, with the run
configuration embedded in the PNG metadata instead of a timestamp.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .model import NetworkSpec
from .reports import config_line

_DPI = 120


def _save(fig, path, config: dict) -> None:
    fig.savefig(path, dpi=_DPI, format="png",
                metadata={"Software": "lossnet",
                          "Description": config_line(config)})
    plt.close(fig)


def _node_color(i: int):
    cycle = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    return cycle[i % len(cycle)]


def trajectory_figure(spec: NetworkSpec, times, states_list, path,
                      config: dict, fluid=None, title="node occupancy"):
    """Per-node total occupancy curves, one thin line per replica.

    ``fluid`` may carry a matching (T, n_classes, n_nodes) array to
    overlay the deterministic path.
    """
    times = np.asarray(times, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, nid in enumerate(spec.node_ids):
        color = _node_color(i)
        for k, states in enumerate(states_list):
            totals = np.asarray(states).sum(axis=1)[:, i]
            ax.plot(times, totals, color=color, lw=0.9,
                    alpha=max(0.25, 1.0 / len(states_list)),
                    label=f"node {nid}" if k == 0 else None)
        ax.axhline(spec.capacity[i], color=color, ls=":", lw=0.8)
        if fluid is not None:
            ax.plot(times, np.asarray(fluid).sum(axis=1)[:, i],
                    color=color, ls="--", lw=1.6)
    ax.set_xlabel("time")
    ax.set_ylabel("rescaled occupancy")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, path, config)


def occupancy_bars_figure(spec: NetworkSpec, x, t, path, config: dict,
                          title="equilibrium occupancy"):
    """Stacked per-class occupancy bars against capacity, plus blocking."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.5, 4))
    idx = np.arange(spec.n_nodes)
    bottom = np.zeros(spec.n_nodes)
    for r, cid in enumerate(spec.class_ids):
        ax1.bar(idx, x[r], bottom=bottom, label=f"class {cid}", width=0.6)
        bottom += x[r]
    for i in idx:
        ax1.hlines(spec.capacity[i], i - 0.38, i + 0.38,
                   color="black", ls=":", lw=1.2)
    ax1.set_xticks(idx, spec.node_ids)
    ax1.set_ylabel("rescaled occupancy")
    ax1.set_title(title)
    ax1.legend(fontsize=8)
    ax2.bar(idx, 1.0 - t, color="firebrick", width=0.6)
    ax2.set_xticks(idx, spec.node_ids)
    ax2.set_ylim(0, 1)
    ax2.set_ylabel("blocking fraction")
    ax2.set_title("blocking (1 - acceptance)")
    fig.tight_layout()
    _save(fig, path, config)


def compare_figure(spec: NetworkSpec, study, path, config: dict):
    """Sup-distance decay across scales plus the largest-scale overlay."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    scales = np.asarray(study.scales, dtype=float)
    ax1.errorbar(scales, study.sup_distance, yerr=study.sup_distance_se,
                 marker="o", color="navy")
    ax1.set_xscale("log")
    ax1.set_yscale("log")
    ax1.set_xlabel("scale N")
    ax1.set_ylabel("replica-mean sup distance")
    ax1.set_title("distance to the fluid path")
    for i, nid in enumerate(spec.node_ids):
        color = _node_color(i)
        ax2.plot(study.grid, study.fluid_states.sum(axis=1)[:, i],
                 color=color, ls="--", lw=1.6, label=f"node {nid} fluid")
        ax2.plot(study.grid, study.mean_paths[-1].sum(axis=1)[:, i],
                 color=color, lw=1.0,
                 label=f"node {nid} mean, N={study.scales[-1]}")
    ax2.set_xlabel("time")
    ax2.set_ylabel("rescaled occupancy")
    ax2.set_title("largest scale vs fluid")
    ax2.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path, config)
