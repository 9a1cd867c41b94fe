"""Command line front end for the simulation harness."""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace

import numpy as np

from .controller import ControllerConfig
from .harness import (SimulationDiverged, TraceInvariantViolation,
                      closed_loop_cost, compare_lp_qp, efficiency_report,
                      get_scenario, run_scenario)
from .motor import MotorParams, default_motor, rpm

_MOTOR_FIELDS = {f.name for f in fields(MotorParams)}
_CFG_FIELDS = {f.name for f in fields(ControllerConfig)}


def _apply_sets(args_set, p: MotorParams, cfg: ControllerConfig):
    """Apply NAME=VALUE overrides; bare motor names hit the nominal params."""
    for item in args_set or []:
        key, eq, value = item.partition("=")
        if not eq:
            raise SystemExit(f"--set expects NAME=VALUE, got {item!r}")
        key = key.strip()
        num = float(value)
        if key.startswith("controller."):
            key = key[11:]
        if key in _MOTOR_FIELDS:
            num = int(num) if key == "n_p" else num
            p = replace(p, **{key: num})
        elif key in _CFG_FIELDS:
            num = int(num) if key == "degree" else num
            cfg = replace(cfg, **{key: num})
        else:
            raise SystemExit(f"unknown parameter {key!r}")
    return p, cfg


def _trace_summary(trace):
    ms = 1e3 * np.asarray(trace.solve_seconds)
    print(f"{trace.scenario} [{trace.solver}] {len(trace)} cycles: "
          f"max iterations {int(trace.iterations.max())}, "
          f"max active {int(trace.active_constraints.max())}, "
          f"solve time mean {ms.mean():.3f} ms / max {ms.max():.3f} ms")


def cmd_run(args) -> int:
    sc = get_scenario(args.scenario)
    p, cfg = _apply_sets(args.set, default_motor(), ControllerConfig())
    solvers = [args.solver] if args.solver else (
        ["lp", "qp"] if sc.solver == "both" else [sc.solver])
    for solver in solvers:
        trace = run_scenario(sc, cfg, p, solver=solver)
        _trace_summary(trace)
        if args.out:
            path = args.out if len(solvers) == 1 else \
                args.out.replace(".csv", f"_{solver}.csv")
            trace.write_csv(path)
            print(f"wrote {path}")
        else:
            sys.stdout.write(trace.to_csv())
    return 0


def cmd_compare(args) -> int:
    sc = get_scenario(args.scenario)
    p, cfg = _apply_sets(args.set, default_motor(), ControllerConfig())
    result = compare_lp_qp(sc, cfg, p)
    _trace_summary(result.lp)
    _trace_summary(result.qp)
    print(f"per-instance cost gap: min {result.cost_gap_min:.3e}, "
          f"median relative excess {result.median_relative_excess:.3e}")
    for label, metrics in (("lp", result.lp_metrics), ("qp", result.qp_metrics)):
        print(f"{label}: d-current excursion depth {metrics['depth']:.3f} A, "
              f"duration {metrics['duration'] * 1e3:.3f} ms")
    if args.out_dir:
        import os
        os.makedirs(args.out_dir, exist_ok=True)
        for trace in (result.lp, result.qp):
            path = os.path.join(args.out_dir, f"{sc.name}_{trace.solver}.csv")
            trace.write_csv(path)
            print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    sc = get_scenario(args.scenario)
    p, cfg = _apply_sets(args.set, default_motor(), ControllerConfig())
    horizons = [float(x) for x in args.horizons.split(",")] if args.horizons else [cfg.T]
    weights = [float(x) for x in args.weights.split(",")] if args.weights else [cfg.loss_weight]
    rows = []
    for T in horizons:
        for w in weights:
            run_cfg = replace(cfg, T=T, loss_weight=w)
            trace = run_scenario(sc, run_cfg, p)
            cost = closed_loop_cost(trace, p, cfg.loss_weight)
            rows.append((T, w, cost))
            print(f"T={T * 1e3:.3g} ms  loss_weight={w:g}  closed-loop cost={cost:.6g}")
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write("horizon,loss_weight,closed_loop_cost\n")
            for T, w, cost in rows:
                fh.write(f"{T:.12g},{w:.12g},{cost:.12g}\n")
        print(f"wrote {args.out}")
    return 0


def cmd_report(args) -> int:
    p, cfg = _apply_sets(args.set, default_motor(), ControllerConfig())
    rep = efficiency_report(rpm(args.speed_rpm), args.torque, p, cfg)
    print(f"speed {args.speed_rpm:g} rpm, torque {args.torque:g} Nm "
          f"(i_q = {rep.i_q:.3f} A)")
    print(f"optimal d-current {rep.id_optimal:.4f} A")
    print(f"loss with optimal d-current {rep.loss_optimal:.2f} W, "
          f"with zero d-current {rep.loss_zero_id:.2f} W")
    print(f"loss reduction {rep.improvement_percent():.2f} %")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmsm-mpc",
        description="Predictive PMSM torque control simulation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and emit its CSV trace")
    run.add_argument("scenario", help="builtin scenario name or scenario file path")
    run.add_argument("--solver", choices=["lp", "qp"])
    run.add_argument("--out", help="output CSV path (stdout if omitted)")
    run.add_argument("--set", action="append", metavar="NAME=VALUE",
                     help="override a motor or controller parameter")
    run.set_defaults(func=cmd_run)

    comp = sub.add_parser("compare", help="run a scenario under both solvers")
    comp.add_argument("scenario")
    comp.add_argument("--out-dir", help="directory for the two CSV traces")
    comp.add_argument("--set", action="append", metavar="NAME=VALUE")
    comp.set_defaults(func=cmd_compare)

    sweep = sub.add_parser("sweep", help="horizon / loss-weight ablations")
    sweep.add_argument("--scenario", default="torque_step_midspeed")
    sweep.add_argument("--horizons", help="comma-separated horizon list [s]")
    sweep.add_argument("--weights", help="comma-separated loss-weight list")
    sweep.add_argument("--out", help="summary CSV path")
    sweep.add_argument("--set", action="append", metavar="NAME=VALUE")
    sweep.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="steady-state efficiency report")
    rep.add_argument("--speed-rpm", type=float, default=2000.0)
    rep.add_argument("--torque", type=float, default=10.5)
    rep.add_argument("--set", action="append", metavar="NAME=VALUE")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SimulationDiverged, TraceInvariantViolation) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
