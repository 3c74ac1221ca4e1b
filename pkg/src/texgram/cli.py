"""Command-line entry point.

    texgram <stage> --config <file> [--model <name>] [--layer <1..5>]
            [--k <int>] [--mi-method plugin|nsb]
            [--distance upper-tri|full-frobenius] [--seed <u64>]
            [--out <dir>]

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from texgram.errors import BundleError, ConfigError, DataError, NumericalError
from texgram.pipeline import DISTANCE_VARIANTS, MI_METHODS, STAGES, load_config, run_stage


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="texgram",
        description="Gram-matrix texture statistics pipeline",
    )
    parser.add_argument("stage", choices=STAGES, help="pipeline stage to run")
    parser.add_argument("--config", required=True, help="JSON pipeline config")
    parser.add_argument("--model", help="restrict per-model stages to one model")
    parser.add_argument("--layer", type=int, help="restrict to one tap index (1-based)")
    parser.add_argument("--k", type=int, help="override cluster count")
    parser.add_argument("--mi-method", choices=MI_METHODS, dest="mi_method")
    parser.add_argument("--distance", choices=DISTANCE_VARIANTS)
    parser.add_argument("--seed", type=int, help="override run and synthesis seed")
    parser.add_argument("--out", help="override the report output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        overrides = {}
        if args.k is not None:
            overrides["k"] = args.k
        if args.mi_method is not None:
            overrides["mi_method"] = args.mi_method
        if args.distance is not None:
            overrides["distance"] = args.distance
        if args.out is not None:
            overrides["out_dir"] = args.out
        if args.seed is not None:
            overrides["seed"] = args.seed
            overrides["synthesis"] = dataclasses.replace(config.synthesis, seed=args.seed)
        if overrides:
            config = dataclasses.replace(config, **overrides)
        artifact_dir = run_stage(config, args.stage, model=args.model, layer=args.layer)
        print(f"{args.stage}: artifacts in {artifact_dir}")
        return 0
    except ConfigError as exc:
        print(f"texgram: config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, BundleError) as exc:
        print(f"texgram: data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"texgram: numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
