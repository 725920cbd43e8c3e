#!/usr/bin/env python3
"""
Command-line entry point: runs a scenario in one of the solver or experiment
modes and writes CSV artifacts plus a summary into the output directory.

    python run_scenario.py simulate --config scenarios/tree_network.json --out out/tree
    python run_scenario.py counterexample --config scenarios/counterexample.json --blocks 6
"""

import argparse
import logging
import os
import sys
from argparse import RawTextHelpFormatter

from termcolor import colored

from libs.artifacts import read_summary
from libs.config import get_config
from libs.scenario import MODES, run

LOG_LEVEL_ENV = "LWRNET_LOG_LEVEL"


def parse_arguments(argv=None):
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(
        description="Run a traffic network scenario or experiment.",
        formatter_class=RawTextHelpFormatter,
    )
    parser.add_argument("mode", choices=MODES, help="What to run")
    parser.add_argument("-c", "--config", required=True, help="Path to the scenario JSON file")
    parser.add_argument("-o", "--out", default=None, help="Output directory (default: output.dir)")
    parser.add_argument(
        "-s",
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a scenario value, e.g. --set numerics.T=2 (repeatable)",
    )
    parser.add_argument("-t", "--threads", type=int, default=None, help="Worker threads")
    parser.add_argument(
        "--blocks", type=int, default=None, help="Shock blocks of the counterexample"
    )
    return parser.parse_args(argv)


def configure_logging(config):
    level = os.environ.get(LOG_LEVEL_ENV) or config.get("log.level", "INFO")
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s - %(levelname)s - %(message)s",
    )


def print_summary(out_dir):
    """Prints the run summary, one colored line per key figure."""
    for key, value in sorted(read_summary(out_dir).items()):
        if value in ("false", "nan"):
            color = "red" if value == "false" else "white"
        else:
            color = "green" if value == "true" else "yellow"
        print(f" * {colored(key, 'white', attrs=['bold'])}: {colored(value, color)}")


def main(argv=None):
    """Parses arguments, runs the scenario and returns its exit status."""
    config = get_config()
    configure_logging(config)
    args = parse_arguments(argv)

    out_dir = args.out or config.get("output.dir", "out")
    status = run(
        args.config,
        overrides=args.overrides,
        mode=args.mode,
        out_dir=out_dir,
        threads=args.threads,
        blocks=args.blocks,
        runtime=config,
    )
    if status == 0:
        print(colored(f" => {args.mode} finished, artifacts in {out_dir}", "green"))
        print_summary(out_dir)
    else:
        print(colored(f" => {args.mode} failed with status {status}", "red"))
    return status


if __name__ == "__main__":
    sys.exit(main())
