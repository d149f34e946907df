"""Artifact writers shared by the command-line tool.

Every artifact embeds the generating configuration (seed included) in a
provenance header, and all key/row orderings are fixed, so identical
configs produce byte-identical files.  No timestamps are written.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import NetworkSpec

SCHEMA_VERSION = 1


def _jsonable(obj):
    """Recursively convert numpy containers/scalars to plain Python."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def config_line(config: dict) -> str:
    return json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))


def provenance_header(config: dict) -> list[str]:
    return [f"# schema_version={SCHEMA_VERSION}",
            f"# config={config_line(config)}"]


def write_json(path, payload: dict, config: dict) -> Path:
    """Write a report dict with the shared envelope (version + config)."""
    doc = {"schema_version": SCHEMA_VERSION, "config": _jsonable(config)}
    doc.update(_jsonable(payload))
    path = Path(path)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path


def write_trajectory_csv(path, spec: NetworkSpec, times, states,
                         config: dict) -> Path:
    """Write a sampled path as ``time,node,class,value`` rows.

    Serves simulated and fluid paths alike; states must be rescaled
    occupancies of shape (len(times), n_classes, n_nodes).
    """
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    if states.shape != (len(times), spec.n_classes, spec.n_nodes):
        raise ValueError("states do not match the grid and network shape")
    lines = provenance_header(config)
    lines.append("time,node,class,value")
    for k in range(len(times)):
        for i, nid in enumerate(spec.node_ids):
            for r, cid in enumerate(spec.class_ids):
                lines.append(f"{times[k]:.10g},{nid},{cid},"
                             f"{states[k, r, i]:.12g}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_table_csv(path, columns: list[str], rows, config: dict) -> Path:
    """Write a small delimited table with the provenance header."""
    lines = provenance_header(config)
    lines.append(",".join(columns))
    for row in rows:
        cells = []
        for v in row:
            v = _jsonable(v)
            cells.append(f"{v:.12g}" if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def counters_report(spec: NetworkSpec, trajectories) -> dict:
    """JSON summary block for the event counters of one or more replicas."""
    reps = []
    for traj in trajectories:
        nodes = {}
        for i, nid in enumerate(spec.node_ids):
            offered = int(traj.arrivals_offered[i] + traj.transfers_offered[i])
            accepted = int(traj.arrivals_accepted[i]
                           + traj.transfers_accepted[i])
            nodes[nid] = {
                "arrivals_offered": int(traj.arrivals_offered[i]),
                "arrivals_accepted": int(traj.arrivals_accepted[i]),
                "transfers_offered": int(traj.transfers_offered[i]),
                "transfers_accepted": int(traj.transfers_accepted[i]),
                "acceptance": accepted / offered if offered else None,
            }
        reps.append({
            "seed_key": list(traj.seed_key),
            "event_count": traj.event_count,
            "scale": traj.scale,
            "warmup": traj.warmup,
            "horizon": traj.horizon,
            "nodes": nodes,
        })
    return {"replicas": reps}


def equilibrium_report(spec: NetworkSpec, point) -> dict:
    """Per-node equilibrium summary plus the per-class occupancy matrix."""
    totals = point.node_totals
    saturated = point.saturated
    nodes = {}
    for i, nid in enumerate(spec.node_ids):
        nodes[nid] = {
            "acceptance": float(point.t[i]),
            "flow_acceptance": float(point.flow_acceptance[i]),
            "occupancy": float(totals[i]),
            "capacity": float(spec.capacity[i]),
            "saturated": bool(saturated[i]),
            "blocking": float(1.0 - point.t[i]),
        }
    by_class = {cid: {nid: float(point.x[r, i])
                      for i, nid in enumerate(spec.node_ids)}
                for r, cid in enumerate(spec.class_ids)}
    return {
        "method": point.method,
        "iterations": point.iterations,
        "residual": float(point.residual),
        "map_residual": float(point.map_residual),
        "nodes": nodes,
        "occupancy_by_class": by_class,
    }
