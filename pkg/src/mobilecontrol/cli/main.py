"""``mobilecontrol <verb> --config FILE --out DIR [--override key=value ...]``"""
from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError
from .config import EXPERIMENTS, load_config
from .harness import EXIT_CONFIG, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mobilecontrol",
                                     description="Simulate, synthesize and certify mobile multiplicative controls.")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in EXPERIMENTS:
        p = sub.add_parser(verb, help=f"run a {verb} experiment")
        p.add_argument("--config", required=True, help="TOML experiment document")
        p.add_argument("--out", required=True, help="run directory")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override a scalar field, e.g. synthesis.eps=0.2 (repeatable)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, [f"experiment={args.verb!r}".replace("'", '"')] + args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    art = run_experiment(cfg, args.out)
    verdicts = ", ".join(f"{r.name}={r.verdict}" for r in art.reports)
    print(f"{args.verb}: exit {art.exit_code}" + (f" ({art.error})" if art.error else "") + f"; {verdicts}")
    return art.exit_code


if __name__ == "__main__":
    sys.exit(main())
