"""Command line entry point.

    cfmaxmin run --config desk.cfg [--seed S] [--drops N] [--output DIR] [--jobs J] [--quiet]
    cfmaxmin validate --config desk.cfg

Exit status: 0 on success, 1 for configuration errors, 2 for numerical
failures (the failing drop and, where known, UE are reported on stderr).
"""

import argparse
import logging
import sys
from dataclasses import replace

from .config import load_config
from .exceptions import CellFreeError, InvalidConfig
from .harness import run_experiment, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def _load(args):
    spec = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        spec = replace(spec, cfg=replace(spec.cfg, seed=args.seed))
    if getattr(args, "drops", None) is not None:
        spec = replace(spec, n_drops=args.drops)
    if getattr(args, "output", None) is not None:
        spec = replace(spec, output_dir=args.output)
    return spec.validate()


def cmd_validate(args):
    spec = _load(args)
    if not args.quiet:
        cfg = spec.cfg
        print(f"ok: L={cfg.L} K={cfg.K} N={cfg.N} f={cfg.f} tau_p={cfg.tau_p} drops={spec.n_drops}", file=sys.stderr)
    return EXIT_OK


def cmd_run(args):
    spec = _load(args)

    def progress(i, n):
        print(f"drop {i + 1}/{n} done", file=sys.stderr, flush=True)

    results = run_experiment(spec, jobs=args.jobs, progress=None if args.quiet else progress)
    for path in write_outputs(spec, results):
        if not args.quiet:
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="cfmaxmin", description="Cell-free uplink max-min SINR experiments")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate drops and write CDF/convergence CSV files")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--drops", type=int)
    run.add_argument("--output")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for independent drops")
    run.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a config file and exit")
    val.add_argument("--config", required=True)
    val.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CellFreeError, ArithmeticError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
