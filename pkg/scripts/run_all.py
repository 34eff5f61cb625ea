#!/usr/bin/env python3
"""Run every canonical experiment config and print a verdict table.

Usage: python scripts/run_all.py [output_dir] [--only kind1,kind2]

Heavy configs (decay, wave_operator, scattering) take a few minutes total;
set NLS4_CACHE_DIR to reuse eigendecompositions across invocations.
"""

import argparse
import sys
import time
from pathlib import Path

from nls4.config import load_config
from nls4.experiments import run_experiment

CONFIG_DIR = Path(__file__).resolve().parent / "configs"

ORDER = [
    "conservation", "sobolev_equiv", "strichartz", "localized_mass", "morawetz",
    "small_data_global", "subcritical_global_cases", "perturbation", "final_state",
    "decay", "wave_operator", "scattering",
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output_dir", nargs="?", default="nls4-out")
    parser.add_argument("--only", default=None, help="comma-separated experiment kinds")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    kinds = args.only.split(",") if args.only else ORDER
    worst = 0
    for kind in kinds:
        cfg = load_config(CONFIG_DIR / f"{kind}.cfg")
        cfg.output_dir = Path(args.output_dir) / kind
        started = time.perf_counter()
        report = run_experiment(cfg, jobs=args.jobs)
        elapsed = time.perf_counter() - started
        verdict = report.worst_verdict
        print(f"{kind:28s} {verdict.upper():4s}  ({elapsed:6.1f}s)")
        if verdict != "pass":
            worst = 1
            for check in report.checks:
                if check.verdict == "fail":
                    print(f"    {check.line()}")
    return worst


if __name__ == "__main__":
    sys.exit(main())
