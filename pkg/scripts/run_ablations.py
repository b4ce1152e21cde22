#!/usr/bin/env python3
"""Reproduce the two ablation tables on artifacts built by run_pipeline.py.

Writes the modality table (D, D+L, D+N, D+L+N) and the component table
(contrastive loss and relevance gate on/off) with per-seed results, summary
statistics, and formatted text tables.
"""

import argparse
import sys
from pathlib import Path

from faircontrast.cli import main as cli

REPO = Path(__file__).resolve().parent.parent


def step(*argv):
    print(f"$ faircontrast {' '.join(argv)}", flush=True)
    rc = cli(list(argv))
    if rc != 0:
        sys.exit(rc)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(REPO / "configs" / "biased_cohort.json"))
    parser.add_argument("--artifacts", default="runs/pipeline",
                        help="directory holding cohort.json and counterparts.jsonl")
    parser.add_argument("--out", default="runs/ablations")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    inputs = ["--config", args.config, "--cohort", f"{args.artifacts}/cohort.json",
              "--counterparts", f"{args.artifacts}/counterparts.jsonl",
              "--threads", str(args.threads)]
    step("ablate-modalities", *inputs, "--out", f"{args.out}/modalities")
    step("ablate-components", *inputs, "--out", f"{args.out}/components")
    for table in ("modalities", "components"):
        print(Path(f"{args.out}/{table}/table.txt").read_text())


if __name__ == "__main__":
    main()
