"""Command-line entry point: ``python -m mvabo {run,aggregate,emit-plot-data}``."""

from __future__ import annotations

import argparse
import platform
import sys

import numpy as np
import scipy

from . import __version__
from .runner import (
    OUTPUT_ROOT_ENV, ConfigError, RunError, aggregate_dir, emit_plot_data, load_config, parse_seeds, run, write_summary,
)


def _seed_list(text):
    try:
        seeds = list(parse_seeds(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected seeds like 0,3,5-9, got {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("seed list is empty")
    return seeds


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mvabo",
        description="Mean-variance Bayesian optimization experiments.",
        epilog=f"Default output root for 'run' comes from ${OUTPUT_ROOT_ENV} (else ./runs).",
    )
    parser.add_argument(
        "--version", action="version",
        version=(f"mvabo {__version__} (python {platform.python_version()}, "
                 f"numpy {np.__version__}, scipy {scipy.__version__})"),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run every seed of a config and write traces plus a summary")
    p_run.add_argument("--config", required=True, help="key = value config file")
    p_run.add_argument("--seeds", type=_seed_list, help="seeds such as 0,3,5-9, overriding the config")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--workers", type=int, help="worker processes (default: CPU count)")

    p_agg = sub.add_parser("aggregate", help="mean and 2-standard-error bands over trace files")
    p_agg.add_argument("--in", dest="inp", required=True, help="directory searched recursively for traces")
    p_agg.add_argument("--out", required=True, help="summary file to write")

    p_plot = sub.add_parser("emit-plot-data", help="long-format plotting table from a summary")
    p_plot.add_argument("--in", dest="inp", required=True, help="summary file")
    p_plot.add_argument("--out", required=True, help="CSV file to write")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = load_config(args.config)
            out = run(config, seeds=args.seeds, out=args.out, workers=args.workers)
            print(f"wrote traces and summary to {out}")
        elif args.command == "aggregate":
            rows = aggregate_dir(args.inp)
            write_summary(args.out, rows)
            print(f"wrote {len(rows)} summary rows to {args.out}")
        else:
            n = emit_plot_data(args.inp, args.out)
            print(f"wrote {n} plot rows to {args.out}")
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0
