#!/usr/bin/env python3
"""Sweep the contrastive mixing weight and report the fairness-utility curve.

Consumes artifacts from run_pipeline.py and writes per-weight summaries, the
plottable curve.csv, and the rank correlation between the weight and median
absolute EDDI.
"""

import argparse
import sys
from pathlib import Path

from faircontrast.cli import main as cli

REPO = Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(REPO / "configs" / "biased_cohort.json"))
    parser.add_argument("--artifacts", default="runs/pipeline")
    parser.add_argument("--out", default="runs/alpha_sweep")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    rc = cli(["alpha-sweep", "--config", args.config,
              "--cohort", f"{args.artifacts}/cohort.json",
              "--counterparts", f"{args.artifacts}/counterparts.jsonl",
              "--threads", str(args.threads), "--out", args.out])
    if rc != 0:
        sys.exit(rc)
    print(Path(f"{args.out}/table.txt").read_text())


if __name__ == "__main__":
    main()
