"""Command-line entry points: `plot-bands` and `plot-sweep`.

Both commands are pure views over their CSV input: the input file is
checksummed before and after rendering, and a changed checksum aborts
with a nonzero exit.  Schema violations and missing files exit with
status 1 and a one-line message on stderr; success exits 0.
"""

from __future__ import annotations

import argparse
import sys

from .bands import plot_bands
from .io import SchemaError, sha256_of
from .sweep import plot_sweep

EXIT_OK = 0
EXIT_FAILURE = 1


def _render(args, render) -> int:
    try:
        before = sha256_of(args.csv)
        render()
        after = sha256_of(args.csv)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if after != before:
        print(f"error: input {args.csv} changed while plotting", file=sys.stderr)
        return EXIT_FAILURE
    print(args.out)
    return EXIT_OK


def main_bands(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot-bands",
        description="Render per-model prediction-band panels from a bands CSV.",
    )
    parser.add_argument("csv", help="bands.csv written by the benchmark command")
    parser.add_argument("--dim", type=int, default=0, help="output coordinate to plot")
    parser.add_argument("--out", required=True, help="image path (format from extension)")
    args = parser.parse_args(argv)
    return _render(args, lambda: plot_bands(args.csv, args.dim, args.out))


def main_sweep(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot-sweep",
        description="Render the batch-size trade-off panels from a sweep CSV.",
    )
    parser.add_argument("csv", help="sweep.csv written by the sweep command")
    parser.add_argument("--out", required=True, help="image path (format from extension)")
    args = parser.parse_args(argv)
    return _render(args, lambda: plot_sweep(args.csv, args.out))
