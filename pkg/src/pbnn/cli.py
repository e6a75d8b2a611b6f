"""Command line harness.

Subcommands:
    generate-data   simulate the double pendulum and write the dataset CSV
    run             run one sampler and write report/chain artifacts
    benchmark       all samplers x seeds, aggregate comparison table
    sweep           penalised sampler across mini-batch sizes
    validate        analytic grid checks of the accept/reject rule

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 diverged chain.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .experiment import generate_data, run_benchmark, run_single, run_sweep, run_validate
from .pendulum import IntegrationDivergedError, InsufficientDataError
from .samplers import DivergedChainError

EXIT_OK = 0
EXIT_VALIDATION_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_DIVERGED = 3


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None, help="override the run seed")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument(
        "--sampler",
        choices=("pbnn", "vanilla", "batched", "tempered", "sgld"),
        default=None,
        help="sampler tag",
    )
    p.add_argument("--batch-size", type=int, default=None, help="mini-batch size N")
    p.add_argument("--num-batches", type=int, default=None, help="mini-batches per step M")
    p.add_argument("--workers", type=int, default=None, help="parallel chain workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbnn",
        description="Noise-penalised MCMC for a small density network on double-pendulum forecasts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("generate-data", "simulate the trajectory and write the dataset"),
        ("run", "run the configured sampler once"),
        ("benchmark", "compare all samplers over several seeds"),
        ("sweep", "run the penalised sampler across batch sizes"),
        ("validate", "run the analytic validation grid"),
    ):
        p = sub.add_parser(name, help=desc)
        _add_common_flags(p)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "seed": args.seed,
        "out": args.out,
        "sampler": args.sampler,
        "plan.batch_size": args.batch_size,
        "plan.num_batches": args.num_batches,
        "workers": args.workers,
    }


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        if args.command == "generate-data":
            info = generate_data(cfg)
            print(f"wrote {info['n_obs']} observations ({info['n_items']} items) to {info['csv']}")
        elif args.command == "run":
            out = run_single(cfg)
            for report in out["reports"]:
                print(
                    f"{report.sampler} {report.split}: avg_nll={report.avg_nll:.4f} "
                    f"coverage={report.coverage:.4f} ace={report.ace:.4f}"
                )
            print(f"wrote {out['runs_csv']}")
        elif args.command == "benchmark":
            out = run_benchmark(cfg)
            print(f"wrote {out['benchmark_csv']}, {out['runs_csv']}, {out['bands_csv']}")
        elif args.command == "sweep":
            out = run_sweep(cfg)
            print(f"wrote {out['sweep_csv']}")
        elif args.command == "validate":
            out = run_validate(cfg)
            with open(out["validate_csv"]) as fh:
                sys.stdout.write(fh.read())
            if not out["ok"]:
                print("validation FAILED", file=sys.stderr)
                return EXIT_VALIDATION_FAILURE
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (InsufficientDataError, ValueError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (DivergedChainError, IntegrationDivergedError) as err:
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
