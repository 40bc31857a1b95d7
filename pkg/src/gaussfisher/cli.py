"""``gaussfisher`` command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, GaussFisherError
from .scenarios import Scenario, ScenarioConfig, build_config, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_VERIFY = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gaussfisher",
                     description="Fisher-information scenarios for a driven Gaussian probe.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="evaluate a scenario and write a CSV")
    run.add_argument("--scenario", required=True,
                     help="one of: " + ", ".join(s.value for s in Scenario))
    run.add_argument("--config", help="flat key = value file")
    run.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE", help="override one key (repeatable)")
    run.add_argument("--out", required=True, help="output CSV path")

    verify = sub.add_parser("verify", help="run the oracle cross-checks")
    verify.add_argument("--out", required=True, help="output CSV path")
    return parser


def _failed_checks(table) -> list[str]:
    col = table.header.index("pass")
    return [row[0] for row in table.rows if not row[col]]


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            cfg = ScenarioConfig(Scenario.VERIFY, output_path=args.out)
        else:
            cfg = build_config(args.scenario, args.config, args.overrides, args.out)
        table = run_scenario(cfg)
    except ConfigError as exc:
        print(f"gaussfisher: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GaussFisherError, ArithmeticError) as exc:
        print(f"gaussfisher: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"gaussfisher: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG

    if cfg.scenario is Scenario.VERIFY:
        failed = _failed_checks(table)
        for name in failed:
            print(f"FAIL {name}", file=sys.stderr)
        if failed:
            return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
