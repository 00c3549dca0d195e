#!/usr/bin/env python3
"""Randomized spectral-perturbation validation (minimum-eigenvalue bound and
eigenvalue localization) plus the slow-multiplier localization of the chain.

Usage: python scripts/run_spectral_checks.py [--out DIR] [--seed N]
"""

import argparse
import sys
from dataclasses import replace

from resnf.cli import RunConfig, run_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="spectral_out")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    cfg = replace(RunConfig(), out_dir=args.out, seed=args.seed,
                  scenario="appendix-spectral")
    return run_scenario("appendix-spectral", cfg)


if __name__ == "__main__":
    sys.exit(main())
