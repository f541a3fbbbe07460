"""Command line: ``abe estimate|compare-losses|sweep-distance|sweep-dimension|theory|plot``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import __version__
from .harness import load_config, nce_ordering_holds, paper_scale, run, write_output
from .plot import emit_plot

COMMANDS = {
    "estimate": "estimate_once",
    "compare-losses": "compare_losses",
    "sweep-distance": "sweep_distance",
    "sweep-dimension": "sweep_dimension",
    "theory": "theory_report",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abe", description="Annealed Bregman estimators of log normalization constants.")
    parser.add_argument("--version", action="version", version=f"abe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, experiment in COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {experiment} experiment")
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--paper-scale", action="store_true", help="N=50000, 100 seeds, dimension 50")
        p.add_argument("--jobs", type=int, help="worker processes")
        if name == "compare-losses":
            p.add_argument("--check-ordering", action="store_true", help="exit with status 3 unless NCE has the lowest MSE")
    p = sub.add_parser("plot", help="SVG chart of a sweep CSV")
    p.add_argument("csv", help="CSV written by a sweep command")
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--title")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            emit_plot(args.csv, args.out, args.title)
            return 0
        config = load_config(args.config, COMMANDS[args.command], seed=args.seed, jobs=args.jobs)
        if args.paper_scale:
            config = paper_scale(config)
        if args.out is not None:
            config = replace(config, out=args.out)
        text = run(config)
        write_output(text, config.out)
    except (OSError, ValueError) as exc:
        print(f"abe: error: {exc}", file=sys.stderr)
        return 2
    if getattr(args, "check_ordering", False) and not nce_ordering_holds(text):
        print("abe: NCE does not have the lowest MSE", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
