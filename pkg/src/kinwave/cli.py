"""Command-line entry point: ``kinwave run | experiment | validate``."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import io
from .core import ClassId, KinwaveError, format_scenario, load_scenario, validate_scenario
from .euler import EulerianRun, run_to
from .ftl import FTLRun
from .harness import EXPERIMENTS, run_experiment, run_metadata
from .lag1 import Lag1Run
from .lag2 import VARIANTS, Lag2Run

SOLVERS = ("euler", "lag1", "lag2", "ftl")


def _solver_family(solver: str) -> str:
    return "euler" if solver == "euler" else "lagrangian"


def cmd_run(args) -> int:
    cfg = load_scenario(args.scenario)
    report = validate_scenario(cfg, _solver_family(args.solver))
    if not report.ok:
        print(f"invalid scenario: {report}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    law = cfg.law()
    extra = {"solver": args.solver}
    start = time.perf_counter()
    if args.solver == "euler":
        _, snaps = run_to(EulerianRun.start(cfg), cfg.sim_time)
        io.write_csv(out / "euler.csv", io.EULER_COLUMNS, io.euler_rows(snaps, law))
    elif args.solver == "lag1":
        _, snaps = Lag1Run.start(cfg).run_to(cfg.sim_time)
        io.write_csv(out / "lag1.csv", io.CLUSTER_COLUMNS, io.lag1_rows(snaps))
    elif args.solver == "lag2":
        ref = ClassId.parse(args.ref_class)
        _, snaps = Lag2Run.start(cfg, ref, variant=args.variant).run_to(cfg.sim_time)
        io.write_csv(out / "lag2.csv", io.CARRIER_COLUMNS, io.lag2_rows(snaps))
        extra.update(reference_class=ref.name.lower(), carried_flux=args.variant)
    else:
        _, snaps = FTLRun.start(cfg).run_to(cfg.sim_time, every=cfg.snapshot_every)
        io.write_csv(out / "trajectories.csv", io.TRAJECTORY_COLUMNS, io.trajectory_rows(snaps))
    extra["snapshots"] = len(snaps)
    io.write_metadata(out / "metadata.txt", run_metadata(cfg, **extra))
    (out / "scenario.txt").write_text(format_scenario(cfg))
    print(f"{args.solver}: {len(snaps)} snapshots to t={cfg.sim_time:g} s in {time.perf_counter() - start:.2f} s -> {out}")
    return 0


def cmd_experiment(args) -> int:
    cfg = load_scenario(args.scenario) if args.scenario else None
    res = run_experiment(args.name, cfg, args.out)
    for k, v in sorted(res.metrics.items()):
        print(f"{k} = {v}")
    return 0


def cmd_validate(args) -> int:
    cfg = load_scenario(args.scenario)
    report = validate_scenario(cfg, args.solver_family)
    print(report)
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kinwave", description="Two-class kinematic-wave traffic solvers.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one solver on a scenario file")
    r.add_argument("scenario")
    r.add_argument("--solver", choices=SOLVERS, default="lag1")
    r.add_argument("--ref-class", choices=("ptw", "car"), default="ptw")
    r.add_argument("--variant", choices=VARIANTS, default="conservative", help="carried-class flux (lag2 only)")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("experiment", help="reproduce one comparison study")
    e.add_argument("name", choices=EXPERIMENTS)
    e.add_argument("--out", required=True)
    e.add_argument("--scenario", help="override the built-in scenario")
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("scenario")
    v.add_argument("--solver-family", choices=("lagrangian", "euler"), default="lagrangian")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (KinwaveError, ValueError, OSError) as exc:
        print(f"kinwave: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
