"""Command-line entry point: one subcommand per experiment.

Exit codes: 0 success, 2 configuration error, 3 data error (missing or
malformed dataset files), 4 budget or runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import BudgetError, ConfigError, ConsistencyError, DataError, FormatError
from .experiments import EXPERIMENT_NAMES, describe_run, load_config, run_experiment
from .report import emit_report

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmpyramid",
        description="Train and evaluate wake-sleep machines from a YAML "
                    "experiment configuration.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENT_NAMES:
        cmd = sub.add_parser(name.replace("_", "-"),
                             help=f"run the {name.replace('_', ' ')} experiment")
        cmd.add_argument("--config", required=True, help="YAML configuration file")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config's root seed")
        cmd.add_argument("--out", default=None,
                         help="override the config's output directory")
        cmd.add_argument("--threads", type=int, default=None,
                         help="override the config's worker count")
        cmd.add_argument("--dry-run", action="store_true",
                         help="validate the config and data, print the plan, "
                              "and exit without training")
        cmd.set_defaults(experiment=name)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.experiment,
                          {"seed": args.seed, "out": args.out,
                           "threads": args.threads})
        if args.dry_run:
            for line in describe_run(cfg):
                print(line)
            return EXIT_OK
        report = run_experiment(cfg)
        for path in emit_report(report, cfg.out):
            print(f"wrote {path}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FormatError, ConsistencyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: missing file {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except (BudgetError, MemoryError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
