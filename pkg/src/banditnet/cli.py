"""Command line front end: run / validate / bounds."""

from __future__ import annotations

import argparse
import sys

from .errors import BanditNetError, ConfigurationError
from .harness import ExperimentConfig, evaluate_bounds, parse_config, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="banditnet",
        description=(
            "Deterministic multi-agent conservative linear bandit simulator "
            "over communication graphs"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config, writing CSV outputs")
    run_p.add_argument("config", help="path to a config file")
    run_p.add_argument("--seed", type=int, default=None, help="override master seed")
    run_p.add_argument("--seeds", type=int, default=None, help="override number of seeds")
    run_p.add_argument("--out", default=None, help="override output directory")
    run_p.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
    run_p.add_argument("--quiet", action="store_true", help="suppress progress lines")

    val_p = sub.add_parser("validate", help="check a config file and exit")
    val_p.add_argument("config", help="path to a config file")

    bounds_p = sub.add_parser(
        "bounds", help="print theoretical-bound evaluation for a config"
    )
    bounds_p.add_argument(
        "config", nargs="?", default=None,
        help="path to a config file (defaults apply when omitted)",
    )
    bounds_p.add_argument("--seed", type=int, default=None, help="override master seed")
    return parser


def _load(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return parse_config(path)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses exit code 2 for usage errors
        return int(exc.code or 0)

    try:
        if args.command == "validate":
            config = _load(args.config)
            config.validate()
            print(f"config ok: {args.config}")
            return 0

        if args.command == "bounds":
            config = _load(args.config)
            if args.seed is not None:
                config.master_seed = args.seed
            config.validate()
            report = evaluate_bounds(config)
            for key, value in report.items():
                if isinstance(value, float):
                    print(f"{key} = {value:.6g}")
                else:
                    print(f"{key} = {value}")
            return 0

        if args.command == "run":
            config = _load(args.config)
            if args.seed is not None:
                config.master_seed = args.seed
            if args.seeds is not None:
                config.n_seeds = args.seeds
            if args.out is not None:
                config.output_dir = args.out
            config.validate()
            run_experiment(config, jobs=args.jobs, quiet=args.quiet)
            return 0

        parser.error(f"unknown command {args.command!r}")
        return 2
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BanditNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
