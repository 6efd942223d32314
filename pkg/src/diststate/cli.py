"""Command line entry point.

Exit codes: 0 success, 1 false data detected (``detect``), 2 bad config or
input file, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ConfigError, ContractError, ModelError, NumericalError
from .harness import load_config, run_experiment

SUBCOMMANDS = {
    "solve": "solve",
    "sweep-epsilon": "epsilon_sweep",
    "sweep-measurements": "measurement_sweep",
    "detect": "detection",
    "lattice-decay": "lattice_decay",
    "complexity": "complexity_counts",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diststate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the {kind.replace('_', ' ')} experiment")
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="directory for CSV artifacts and summary.json")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    kind = SUBCOMMANDS[args.command]
    try:
        cfg = load_config(args.config, kind=kind, seed=args.seed)
        art = run_experiment(cfg)
    except (ConfigError, ContractError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    if args.out:
        for path in art.write(args.out):
            print(path)
    else:
        for name in art.tables:
            sys.stdout.write(art.table_text(name))
    print(json.dumps(art.summary, sort_keys=True, default=str), file=sys.stderr)
    return art.exit_code


if __name__ == "__main__":
    sys.exit(main())
