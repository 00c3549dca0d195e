#!/usr/bin/env python3
"""Run the full five-oscillator chain study: first- and second-order normal
forms, orbit continuation, and the stability table, for both signs of the
nonlinearity.

Usage: python scripts/run_seagull.py [--out DIR] [--gamma G] [--Istar I]
"""

import argparse
import os
import sys

from resnf.cli import RunConfig, run_scenario
from dataclasses import replace


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="seagull_out")
    parser.add_argument("--gamma", type=float, default=1.0)
    parser.add_argument("--Istar", type=float, default=1.0)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--strict", action="store_true")
    args = parser.parse_args()

    base = RunConfig(gamma=args.gamma, Istar=args.Istar, jobs=args.jobs,
                     strict=args.strict)
    rc = 0
    for scenario in ("seagull-order1", "seagull-order2", "seagull-stability"):
        out = os.path.join(args.out, scenario)
        cfg = replace(base, out_dir=out, scenario=scenario)
        print(f"== {scenario} -> {out}")
        code = run_scenario(scenario, cfg)
        with open(os.path.join(out, "summary.txt")) as fh:
            print(fh.read())
        rc = max(rc, code)
    return rc


if __name__ == "__main__":
    sys.exit(main())
