"""Command-line front end.

    rbfvmc run <config>
    rbfvmc reproduce <preset> [--seed N] [--out DIR]
    rbfvmc eigvec-report <config> [--out DIR]

Exit codes: 0 success, 1 a reproduced row failed its tolerance,
2 invalid configuration, 3 optimizer failure (partial artifacts written).
"""
import argparse
import logging
import sys

from .config import load_config
from .errors import ConfigError, OptimizerFailure, RbfVmcError
from .runner import (
    PRESETS,
    compare_eigvec,
    output_dir,
    reproduce,
    run_experiment,
    summary_line,
    write_artifacts,
)

EXIT_OK, EXIT_ROW_FAILED, EXIT_CONFIG, EXIT_OPTIMIZER = 0, 1, 2, 3


def _load(path):
    try:
        return load_config(path)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return None


def cmd_run(args):
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_CONFIG
    out = output_dir(args.out, cfg)
    try:
        result = run_experiment(cfg)
    except OptimizerFailure as exc:
        if exc.record is not None:
            paths = write_artifacts(out, cfg.name, exc.record)
            print(f"partial trace written to {paths['csv']}", file=sys.stderr)
        print(f"optimizer failure: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZER
    line = summary_line(cfg.name, result.energy, result.error, result.reference)
    paths = write_artifacts(out, cfg.name, result.record, result.net, line)
    print(line)
    print(f"artifacts: {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def cmd_reproduce(args):
    try:
        outcomes, lines = reproduce(args.preset, seed=args.seed, out=args.out)
    except ConfigError as exc:
        print(f"invalid preset: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("\n".join(lines))
    return EXIT_OK if all(o.passed for o in outcomes) else EXIT_ROW_FAILED


def cmd_eigvec(args):
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_CONFIG
    if cfg.model_type != "matrix":
        print("invalid config: eigvec-report needs model.type = matrix", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_experiment(cfg)
    except OptimizerFailure as exc:
        print(f"optimizer failure: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZER
    report = compare_eigvec(result.net, result.model)
    lines = [summary_line(cfg.name, result.energy, result.error, result.reference)] + report.lines()
    out = output_dir(args.out, cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{cfg.name}.eigvec.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="rbfvmc", description="RBF-network variational Monte Carlo")
    parser.add_argument("-v", "--verbose", action="store_true", help="log optimizer warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="optimize one configuration")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the environment and the config)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reproduce", help="run a preset sweep and compare with reference values")
    p.add_argument("preset", help=f"one of {', '.join(PRESETS)} or a path to a .cfg preset")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("eigvec-report", help="compare the optimized vector with the exact eigenvector")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eigvec)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RbfVmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZER


if __name__ == "__main__":
    sys.exit(main())
