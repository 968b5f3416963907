"""Command line entry points.

    explore run    --scenario f.json --mode sage --seed 0 [--plot] [--debug]
    explore batch  --scenario f.json --modes sage geometric --seeds 0..9
    explore verify

Exit codes: 0 success, 2 validation error, 3 remote embedder unavailable,
4 mission hit the time limit without completing.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ParseError, RemoteUnavailable, ValidationError
from .mission import (DEFAULT_DT, DEFAULT_MAX_TIME, DEFAULT_REPLAN_TICKS,
                      compute_metrics, run_batch, run_mission)
from .planner import PlannerMode, PlannerParams
from .scenario import load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_REMOTE = 3
EXIT_TIMEOUT = 4


def _parse_seeds(spec: list[str]) -> list[int]:
    out: list[int] = []
    for tok in spec:
        if ".." in tok:
            a, b = tok.split("..", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(tok))
    return out


def _planner_params(args) -> PlannerParams:
    p = PlannerParams()
    if args.cell_size is not None:
        p.cell_size = args.cell_size
    return p


def _make_embedder(args, scenario):
    if args.embedder == "synthetic":
        return None  # run_mission builds the default synthetic provider
    from .embedding import RemotePatchAdapter

    if not args.remote_url:
        raise ValidationError("--remote-url", "required with --embedder remote")
    return RemotePatchAdapter(args.remote_url, scenario.camera)


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    mode = PlannerMode(args.mode)
    embedder = _make_embedder(args, scenario)
    log = run_mission(scenario, mode, args.seed, max_time=args.max_time,
                      dt=args.dt, replan_period=args.replan_period,
                      embedder=embedder, planner_params=_planner_params(args),
                      debug=args.debug)
    report = compute_metrics(log, scenario.scene)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{scenario.name}_{mode.value}_seed{args.seed}"
    (out_dir / f"{stem}.json").write_text(
        json.dumps({"report": report.to_dict(), "log": log.to_dict()}, indent=2) + "\n")
    if args.debug and log.diagnostics:
        (out_dir / f"{stem}_debug.json").write_text(
            json.dumps(log.diagnostics, indent=2) + "\n")
    if args.plot:
        from .plotting import emit_plot

        emit_plot(log, scenario.scene, out_dir / f"{stem}.svg")
    print(json.dumps(report.to_dict(), indent=2))
    if not log.completed:
        return EXIT_TIMEOUT
    return EXIT_OK


def cmd_batch(args) -> int:
    scenario = load_scenario(args.scenario)
    modes = [PlannerMode(m) for m in args.modes]
    seeds = _parse_seeds(args.seeds) if args.seeds else scenario.seeds
    batch = run_batch(scenario, modes, seeds, max_time=args.max_time, dt=args.dt,
                      replan_period=args.replan_period,
                      planner_params=_planner_params(args))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    from .report import emit_batch_summary, emit_report

    emit_report(batch["reports"], out_dir / f"{scenario.name}_batch.csv", format="csv")
    emit_report(batch["reports"], out_dir / f"{scenario.name}_batch.json", format="json")
    emit_batch_summary(batch, out_dir / f"{scenario.name}_summary.json")
    for mode, agg in batch["means"].items():
        dur = agg.get("duration_s", float("nan"))
        path = agg.get("path_length_m", float("nan"))
        cov = agg.get("coverage_pct", float("nan"))
        print(f"{mode:14s} duration={dur:8.2f}s path={path:7.2f}m coverage={cov:6.2f}%")
    return EXIT_OK


def cmd_verify(_args) -> int:
    from .acceptance import run_all

    return EXIT_OK if run_all(verbose=True) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="explore",
                                 description="Language-guided exploration simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--max-time", type=float, default=DEFAULT_MAX_TIME,
                       help="simulated time budget in seconds")
        p.add_argument("--dt", type=float, default=DEFAULT_DT)
        p.add_argument("--replan-period", type=int, default=DEFAULT_REPLAN_TICKS,
                       help="ticks between replans")
        p.add_argument("--cell-size", type=float, default=None,
                       help="tour cell edge length in meters")
        p.add_argument("--out", default="out", help="output directory")

    run_p = sub.add_parser("run", help="run one mission")
    common(run_p)
    run_p.add_argument("--mode", choices=[m.value for m in PlannerMode], default="sage")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--embedder", choices=["synthetic", "remote"], default="synthetic")
    run_p.add_argument("--remote-url", default=None)
    run_p.add_argument("--plot", action="store_true")
    run_p.add_argument("--debug", action="store_true",
                       help="record per-cycle planner diagnostics")
    run_p.set_defaults(func=cmd_run)

    batch_p = sub.add_parser("batch", help="run a mode x seed grid")
    common(batch_p)
    batch_p.add_argument("--modes", nargs="+", default=["sage", "geometric"],
                         choices=[m.value for m in PlannerMode])
    batch_p.add_argument("--seeds", nargs="+", default=None,
                         help="seed list or ranges like 0..9")
    batch_p.set_defaults(func=cmd_batch)

    verify_p = sub.add_parser("verify", help="run the built-in property checks")
    verify_p.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except RemoteUnavailable as e:
        print(f"remote embedder unavailable: {e}", file=sys.stderr)
        return EXIT_REMOTE


if __name__ == "__main__":
    sys.exit(main())
