"""Command-line entry point.

``run``     execute an experiment plan and write ``results.csv`` and
            ``plan_echo.json``.
``oracle``  run the grid or random-search oracle on one drop of a plan and
            print the result as JSON.

Exit codes: 0 success, 2 configuration error, 3 when some sweep point
had every drop fail for some program.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from .netgen import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def _cmd_run(args) -> int:
    plan = harness.load_plan(args.plan)
    if args.drops is not None:
        if args.drops < 1:
            raise ConfigError("--drops must be >= 1")
        plan = plan.with_drops(args.drops)
    rows = harness.run_plan(plan, seed=args.seed, n_jobs=args.jobs)
    harness.write_outputs(rows, plan, args.out, args.seed, args.units)
    failed = [(r.sweep_value, r.program) for r in rows if r.all_failed]
    for value, program in failed:
        print(f"all drops failed: {program} at {plan.sweep_axis}={value!r}",
              file=sys.stderr)
    return EXIT_ALL_FAILED if failed else EXIT_OK


def _cmd_oracle(args) -> int:
    plan = harness.load_plan(args.plan)
    if not 0 <= args.sweep_index < len(plan.sweep_values):
        raise ConfigError("--sweep-index out of range")
    if args.drop < 0:
        raise ConfigError("--drop must be >= 0")
    seed_seq = harness._drop_seeds(args.seed, args.drop + 1)[args.drop]
    cfg = plan.config_at(plan.sweep_values[args.sweep_index])
    inst = harness.build_instance(cfg, seed_seq, plan.detection_snapshots, plan.tau_det)
    program = harness._ALIASES.get(args.program, args.program)
    if args.kind == "grid":
        if program not in harness.EQUAL_PROGRAMS:
            raise ConfigError(f"grid oracle needs one of {harness.EQUAL_PROGRAMS}")
        res = harness.oracle_grid_1d(inst.equal, program, plan.thresholds, args.points)
    else:
        if program not in harness.PATH_PROGRAMS:
            raise ConfigError(f"random oracle needs one of {harness.PATH_PROGRAMS}")
        spec = plan.thresholds.spec(program, cfg.k_users)
        res = harness.oracle_random_search(inst.ctx, spec, args.points,
                                           np.random.default_rng(args.seed))
    print(json.dumps(res.to_dict()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cellfree-secure",
                                 description="Secure power control sweeps for cell-free massive MIMO.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment plan")
    run.add_argument("--plan", required=True, help="JSON experiment plan")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--drops", type=int, default=None, help="override the plan's drop count")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--units", choices=("nats", "bits"), default="nats")
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    run.set_defaults(func=_cmd_run)

    orc = sub.add_parser("oracle", help="brute-force oracle on one drop of a plan")
    orc.add_argument("kind", choices=("grid", "random"))
    orc.add_argument("--plan", required=True)
    orc.add_argument("--program", required=True)
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--drop", type=int, default=0)
    orc.add_argument("--sweep-index", type=int, default=0)
    orc.add_argument("--points", type=int, default=None,
                     help="grid points (default 1e6) or samples (default 1e4)")
    orc.set_defaults(func=_cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "points", 0) is None:
        args.points = 10**6 if args.kind == "grid" else 10**4
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
