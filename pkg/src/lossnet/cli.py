"""Command-line entry point.

Subcommands: validate, simulate, fluid, equilibrium, compare,
appendix-check, two-node.  Every run prints a one-line JSON summary to
stdout; with --out, delimited/JSON artifacts (and figures unless
--no-plot) are written to that directory.  Exit codes: 0 ok,
2 validation failure, 3 non-convergence, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import compare as compare_mod
from . import entropy, plots, reports
from .ctmc import replicate
from .equilibrium import (ConvergenceError, equilibrium_map,
                          solve_equilibrium, two_node_closed_form,
                          two_node_spec)
from .fluid import integrate, vector_field
from .model import (NetworkSpec, SpecFormatError, load_spec, require_valid,
                    spec_from_dict, validate)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_IO = 4

BUNDLED_SPECS = {
    "golden-ratio": "golden_ratio.json",
    "erlang": "erlang.json",
    "branching": "branching.json",
}


def bundled_spec(name: str) -> NetworkSpec:
    """Load one of the example networks shipped with the package."""
    text = (resources.files("lossnet") / "specs"
            / BUNDLED_SPECS[name]).read_text(encoding="utf-8")
    return spec_from_dict(json.loads(text))


def resolve_spec(value: str) -> NetworkSpec:
    """Interpret --spec as a file path first, then as a bundled name."""
    path = Path(value)
    if path.exists():
        return load_spec(path)
    if value in BUNDLED_SPECS:
        return bundled_spec(value)
    raise SpecFormatError(
        f"spec {value!r} is neither a readable file nor one of the bundled "
        f"networks {sorted(BUNDLED_SPECS)}")


def _emit(doc: dict) -> None:
    print(json.dumps(reports._jsonable(doc), sort_keys=True))


def _fail(code: int, kind: str, message: str, **extra) -> int:
    _emit({"error": {"kind": kind, "message": message, **extra}})
    return code


def _outdir(args) -> Path | None:
    if not getattr(args, "out", None):
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_validate(args) -> int:
    try:
        spec = resolve_spec(args.spec)
    except SpecFormatError as exc:
        return _fail(EXIT_VALIDATION, "validation", str(exc))
    violations = validate(spec)
    if violations:
        return _fail(EXIT_VALIDATION, "validation", "spec is invalid",
                     violations=violations)
    _emit({"command": "validate", "valid": True,
           "nodes": spec.n_nodes, "classes": spec.n_classes})
    return EXIT_OK


def _cmd_simulate(args) -> int:
    spec = resolve_spec(args.spec)
    require_valid(spec)
    config = {"command": "simulate", "spec": args.spec, "scale": args.scale,
              "horizon": args.horizon, "replicas": args.replicas,
              "seed": args.seed, "sample_dt": args.sample_dt,
              "warmup": args.warmup}
    trajs = replicate(spec, args.scale, args.horizon, args.replicas,
                      seed=args.seed, sample_dt=args.sample_dt,
                      warmup=args.warmup, workers=args.workers)
    out = _outdir(args)
    artifacts = []
    if out is not None:
        for k, traj in enumerate(trajs):
            name = ("trajectory.csv" if args.replicas == 1
                    else f"trajectory_r{k:03d}.csv")
            artifacts.append(reports.write_trajectory_csv(
                out / name, spec, traj.times, traj.states,
                {**config, "replica": k}))
        artifacts.append(reports.write_json(
            out / "counters.json", reports.counters_report(spec, trajs),
            config))
        if not args.no_plot:
            plots.trajectory_figure(spec, trajs[0].times,
                                    [t.states for t in trajs],
                                    out / "trajectory.png", config,
                                    title=f"simulated paths, N={args.scale}")
            artifacts.append(out / "trajectory.png")
    _emit({"command": "simulate", "scale": args.scale,
           "replicas": len(trajs),
           "event_counts": [t.event_count for t in trajs],
           "artifacts": [str(p) for p in artifacts]})
    return EXIT_OK


def _cmd_fluid(args) -> int:
    spec = resolve_spec(args.spec)
    require_valid(spec)
    config = {"command": "fluid", "spec": args.spec,
              "horizon": args.horizon, "dt": args.dt,
              "sample_dt": args.sample_dt}
    record_every = 1
    if args.sample_dt is not None:
        record_every = max(1, int(round(args.sample_dt / args.dt)))
    x0 = np.zeros((spec.n_classes, spec.n_nodes))
    path = integrate(spec, x0, args.horizon, dt=args.dt,
                     record_every=record_every)
    residual = float(np.max(np.abs(vector_field(spec, path.final))))
    out = _outdir(args)
    artifacts = []
    if out is not None:
        artifacts.append(reports.write_trajectory_csv(
            out / "trajectory.csv", spec, path.times, path.states, config))
        artifacts.append(reports.write_json(
            out / "fluid.json",
            {"final_state": path.final, "field_residual": residual,
             "node_totals": path.final.sum(axis=0)}, config))
        if not args.no_plot:
            plots.trajectory_figure(spec, path.times, [path.states],
                                    out / "trajectory.png", config,
                                    title="fluid path")
            artifacts.append(out / "trajectory.png")
    _emit({"command": "fluid", "field_residual": residual,
           "node_totals": path.final.sum(axis=0),
           "artifacts": [str(p) for p in artifacts]})
    return EXIT_OK


def _cmd_equilibrium(args) -> int:
    spec = resolve_spec(args.spec)
    require_valid(spec)
    config = {"command": "equilibrium", "spec": args.spec,
              "method": args.method, "tol": args.tol,
              "max_iter": args.max_iter, "damping": args.damping,
              "seed": args.seed}
    point = solve_equilibrium(spec, method=args.method, tol=args.tol,
                              max_iter=args.max_iter, damping=args.damping,
                              seed=args.seed)
    report = reports.equilibrium_report(spec, point)
    out = _outdir(args)
    artifacts = []
    if out is not None:
        artifacts.append(reports.write_json(out / "equilibrium.json",
                                            report, config))
        if not args.no_plot:
            plots.occupancy_bars_figure(spec, point.x, point.t,
                                        out / "equilibrium.png", config)
            artifacts.append(out / "equilibrium.png")
    _emit({"command": "equilibrium", "method": point.method,
           "iterations": point.iterations, "residual": point.residual,
           "acceptance": {nid: report["nodes"][nid]["acceptance"]
                          for nid in spec.node_ids},
           "artifacts": [str(p) for p in artifacts]})
    return EXIT_OK


def _cmd_compare(args) -> int:
    spec = resolve_spec(args.spec)
    require_valid(spec)
    scales = tuple(int(v) for v in str(args.scales).split(",") if v.strip())
    config = {"command": "compare", "spec": args.spec, "scales": list(scales),
              "horizon": args.horizon, "replicas": args.replicas,
              "seed": args.seed, "dt": args.dt,
              "sample_dt": args.sample_dt, "warmup": args.warmup}
    study = compare_mod.scaling_study(
        spec, scales, horizon=args.horizon, n_replicas=args.replicas,
        seed=args.seed, dt=args.dt, sample_dt=args.sample_dt,
        warmup=args.warmup, workers=args.workers)
    report = compare_mod.study_report(spec, study)
    out = _outdir(args)
    artifacts = []
    if out is not None:
        artifacts.append(reports.write_json(out / "compare.json",
                                            report, config))
        artifacts.append(reports.write_table_csv(
            out / "compare.csv",
            ["scale", "sup_distance", "standard_error"],
            compare_mod.study_rows(study), config))
        if not args.no_plot:
            plots.compare_figure(spec, study, out / "compare.png", config)
            artifacts.append(out / "compare.png")
    _emit({"command": "compare", "scales": list(scales),
           "sup_distance": study.sup_distance,
           "monotone_decreasing": study.monotone,
           "max_acceptance_gap": study.acceptance_gap,
           "artifacts": [str(p) for p in artifacts]})
    return EXIT_OK


def _cmd_appendix_check(args) -> int:
    config = {"command": "appendix-check", "seed": args.seed,
              "pairs": args.pairs, "splits": args.splits}
    result = entropy.selfcheck(seed=args.seed, n_pairs=args.pairs,
                               n_splits=args.splits)
    out = _outdir(args)
    if out is not None:
        reports.write_json(out / "appendix.json", result, config)
    _emit({"command": "appendix-check",
           "verdict": "PASS" if result["passed"] else "FAIL", **result})
    return EXIT_OK if result["passed"] else EXIT_NO_CONVERGENCE


def _cmd_two_node(args) -> int:
    for name in ("load1", "load2", "cap1", "cap2"):
        if getattr(args, name) <= 0:
            return _fail(EXIT_VALIDATION, "validation",
                         f"--{name} must be positive")
    result = two_node_closed_form(args.load1, args.load2,
                                  args.cap1, args.cap2)
    spec = two_node_spec(args.load1, args.load2, args.cap1, args.cap2)
    residual = float(np.max(np.abs(
        result.x - equilibrium_map(spec, result.x))))
    config = {"command": "two-node", "load1": args.load1,
              "load2": args.load2, "cap1": args.cap1, "cap2": args.cap2}
    doc = {"case": result.case, "case_name": result.case_name,
           "acceptance": result.t, "occupancy": result.x,
           "map_residual": residual}
    out = _outdir(args)
    artifacts = []
    if out is not None:
        artifacts.append(reports.write_json(out / "two_node.json",
                                            doc, config))
        if not args.no_plot:
            plots.occupancy_bars_figure(
                spec, result.x, result.t, out / "two_node.png", config,
                title=f"two-node closed form ({result.case_name})")
            artifacts.append(out / "two_node.png")
    _emit({"command": "two-node", **doc,
           "artifacts": [str(p) for p in artifacts]})
    return EXIT_OK


def _add_spec(sp) -> None:
    sp.add_argument("--spec", required=True,
                    help="network JSON path or bundled name: "
                         + ", ".join(sorted(BUNDLED_SPECS)))


def _add_out(sp) -> None:
    sp.add_argument("--out", default=None,
                    help="artifact directory (created if needed); "
                         "omit for the stdout summary only")
    sp.add_argument("--no-plot", action="store_true",
                    help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lossnet",
        description="Loss networks with routing: exact simulation, fluid "
                    "limit, and equilibrium analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a network document")
    _add_spec(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("simulate", help="run the scaled Markov simulation")
    _add_spec(p)
    _add_out(p)
    p.add_argument("-N", "--scale", type=int, default=100,
                   help="scaling parameter N (default 100)")
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-dt", type=float, default=None,
                   help="state sampling period (default horizon/500)")
    p.add_argument("--warmup", type=float, default=0.0,
                   help="counters accrue from this time on")
    p.add_argument("--workers", type=int, default=1,
                   help="processes for replica fan-out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fluid", help="integrate the limiting flow")
    _add_spec(p)
    _add_out(p)
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=0.01,
                   help="integrator step (default 0.01)")
    p.add_argument("--sample-dt", type=float, default=None,
                   help="recording period (default every step)")
    p.set_defaults(func=_cmd_fluid)

    p = sub.add_parser("equilibrium", help="solve for the equilibrium point")
    _add_spec(p)
    _add_out(p)
    p.add_argument("--method", choices=("ode", "phi"), default="ode",
                   help="ode: follow the flow; phi: damped fixed point")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=50_000)
    p.add_argument("--damping", type=float, default=0.5,
                   help="fixed-point step size (phi method)")
    p.add_argument("--seed", type=int, default=None,
                   help="random feasible start (default: empty state)")
    p.set_defaults(func=_cmd_equilibrium)

    p = sub.add_parser("compare",
                       help="convergence of simulations to the fluid path")
    _add_spec(p)
    _add_out(p)
    p.add_argument("-N", "--scale", dest="scales", default="10,100,1000",
                   help="comma-separated scales (default 10,100,1000)")
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--replicas", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--sample-dt", type=float, default=None,
                   help="shared sampling period (default horizon/100)")
    p.add_argument("--warmup", type=float, default=None,
                   help="acceptance window start (default horizon/2)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("appendix-check",
                       help="property suite for the divergence inequality")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", type=int, default=10_000)
    p.add_argument("--splits", type=int, default=1_000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_appendix_check)

    p = sub.add_parser("two-node",
                       help="closed-form equilibrium of the crossing network")
    p.add_argument("--load1", type=float, required=True)
    p.add_argument("--load2", type=float, required=True)
    p.add_argument("--cap1", type=float, required=True)
    p.add_argument("--cap2", type=float, required=True)
    _add_out(p)
    p.set_defaults(func=_cmd_two_node)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecFormatError as exc:
        return _fail(EXIT_VALIDATION, "validation", str(exc))
    except ConvergenceError as exc:
        return _fail(EXIT_NO_CONVERGENCE, "non-convergence", str(exc),
                     residual=exc.residual, iterations=exc.iterations)
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    except ValueError as exc:
        return _fail(EXIT_VALIDATION, "validation", str(exc))


if __name__ == "__main__":
    sys.exit(main())
