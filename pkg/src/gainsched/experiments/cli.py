"""Command line entry point: ``gainsched <scenario> --config FILE --out DIR --seed N``."""

from __future__ import annotations

import argparse
import logging
import sys

from gainsched.experiments.config import parse_config
from gainsched.experiments.scenarios import run_scenario

COMMANDS = {
    "tradeoff": ("tradeoff", "communication rate vs final cost over a lambda sweep"),
    "bias-hist": ("bias_hist", "single-step oracle vs estimated gain scheduling histograms"),
    "compare": ("compare", "greedy gain scheduling vs gradient-norm scheduling"),
    "bounds": ("bounds", "check Monte Carlo output against the convergence and communication bounds"),
    "simulate": ("simulate", "run a custom configuration and dump trajectories"),
}


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gainsched", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file (scenario defaults apply to omitted keys)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=_seed, help="master seed; overrides the config value")
        p.add_argument("--workers", type=int, help="threads for Monte Carlo chunks (results do not depend on it)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    scenario = COMMANDS[args.command][0]
    try:
        cfg = parse_config(args.config, scenario=scenario, seed=args.seed)
        if args.workers is not None:
            if args.workers < 1:
                raise ValueError("--workers must be >= 1")
            cfg.workers = args.workers
        result = run_scenario(cfg, args.out)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"gainsched {args.command}: error: {exc}", file=sys.stderr)
        return 2
    for path in result.files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
