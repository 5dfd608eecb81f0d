"""Command-line entry point.

    sdebye simulate    --config run.yaml --out runs/a [--strict]
    sdebye picard      --config run.yaml --out runs/b
    sdebye ineq        --config run.yaml --out runs/c
    sdebye kappa-limit --config run.yaml --out runs/d

Exit codes: 0 success, 2 configuration error, 3 failed bound check under
``--strict``.  ``SDEBYE_WORKERS`` sets the thread count for sweeps.
"""
from __future__ import annotations

import argparse
import json
import sys

from .experiment import ConfigError, load_config, run

EXIT_OK, EXIT_CONFIG, EXIT_BOUND = 0, 2, 3

_SCENARIO = {"simulate": "simulate", "picard": "picard", "ineq": "inequalities",
             "kappa-limit": "kappa_limit"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdebye", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SCENARIO:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run description")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--strict", action="store_true",
                       help="exit with status 3 when a bound check fails")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.scenario != _SCENARIO[args.command]:
            raise ConfigError(f"config describes a {cfg.scenario} run, "
                              f"not {_SCENARIO[args.command]}")
        art = run(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(art.to_dict(), indent=2))
    if args.strict and art.failed_bounds:
        print(f"failed bound checks: {', '.join(art.failed_bounds)}", file=sys.stderr)
        return EXIT_BOUND
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
