#!/usr/bin/env python3
"""
Provides a command-line utility to display the key figures of a finished run:
residuals of the junction coupling, the sum-to-one defect, the mass balance
and the mode specific checks.
"""

import argparse
import sys

from termcolor import colored

from libs.artifacts import REQUIRED_SUMMARY_KEYS, read_summary
from libs.config import get_config

# Residuals above this are printed in red.
RESIDUAL_WARNING = 1e-6


def print_residuals(summary):
    """
    Prints the residuals every run reports.

    Args:
        summary (dict): The parsed summary.
    """
    for key in REQUIRED_SUMMARY_KEYS:
        value = summary.get(key, "nan")
        try:
            bad = float(value) > RESIDUAL_WARNING
        except ValueError:
            bad = True
        color = "white" if value == "nan" else ("red" if bad else "green")
        print(f" * {key}: {colored(value, color)}")


def print_checks(summary):
    """Prints the boolean checks of the run."""
    checks = {k: v for k, v in summary.items() if v in ("true", "false")}
    passed = sum(1 for v in checks.values() if v == "true")
    print(f" * checks: {colored(f'{passed}/{len(checks)} passed', 'yellow')}")
    for key, value in sorted(checks.items()):
        print(f"   ** {key}: {colored(value, 'green' if value == 'true' else 'red')}")


def print_figures(summary):
    """Prints the remaining figures."""
    skip = set(REQUIRED_SUMMARY_KEYS) | {"mode"}
    for key, value in sorted(summary.items()):
        if key in skip or value in ("true", "false"):
            continue
        print(f"   ** {colored(key, 'white', attrs=['dark'])}: {value}")


def main():
    """Reads the summary of a run directory and prints it."""
    config = get_config()
    parser = argparse.ArgumentParser(description="Show the summary of a finished run.")
    parser.add_argument(
        "-o", "--out", default=config.get("output.dir", "out"), help="Output directory of the run"
    )
    args = parser.parse_args()

    summary = read_summary(args.out)
    if not summary:
        print(colored(f"no summary found in {args.out}", "red"), file=sys.stderr)
        return 1

    mode = summary.get("mode", "unknown")
    print(f"\n * {colored('mode', 'yellow')}: {colored(mode, 'white', attrs=['bold'])}")
    print_residuals(summary)
    print_checks(summary)
    print_figures(summary)
    print("\ndone")
    return 0


if __name__ == "__main__":
    sys.exit(main())
