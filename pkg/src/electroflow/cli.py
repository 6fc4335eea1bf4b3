"""Command-line entry point.

    electroflow run <config-path> [--output-dir D] [--overwrite]
    electroflow verify <config-path> [--output-dir D]

``run`` executes the configured scenario and writes its artifacts plus a
machine-readable summary; ``verify`` re-evaluates the assertion suite of a
finished output directory. Exit codes: 0 all assertions pass, 1 assertion
failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config_file
from .scenarios import ScenarioError, run_scenario, verify_scenario


def _print_summary(summary: dict) -> None:
    print(f"scenario: {summary['scenario']}")
    print(f"claim: {summary['claim']}")
    for a in summary["assertions"]:
        status = "PASS" if a["passed"] else "FAIL"
        detail = f" ({a['detail']})" if a.get("detail") else ""
        print(f"  [{status}] {a['name']}{detail}")
    print("result:", "PASS" if summary["passed"] else "FAIL")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="electroflow", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario from a config file")
    p_run.add_argument("config", help="path to the key = value config file")
    p_run.add_argument("--output-dir", default=None, help="override the config's output_dir")
    p_run.add_argument("--overwrite", action="store_true",
                       help="allow writing into a non-empty output directory")

    p_verify = sub.add_parser("verify", help="re-check a finished output directory")
    p_verify.add_argument("config", help="path to the key = value config file")
    p_verify.add_argument("--output-dir", default=None, help="override the config's output_dir")

    args = parser.parse_args(argv)
    try:
        cfg = parse_config_file(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    outdir = args.output_dir or cfg.output_dir
    try:
        if args.command == "run":
            summary = run_scenario(cfg, outdir, overwrite=args.overwrite)
        else:
            summary = verify_scenario(cfg, outdir)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_summary(summary)
    return 0 if summary["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
