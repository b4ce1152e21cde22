#!/usr/bin/env python3
"""Build every artifact for the bundled biased cohort, end to end.

Runs cohort synthesis, imputation, generator training, counterpart
construction, classifier training, evaluation, and the embedding dump into
one output directory.  Later experiment scripts consume these artifacts.
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
    parser.add_argument("--out", default="runs/pipeline")
    parser.add_argument("--cohort-seed", type=int, default=42)
    parser.add_argument("--gan-seed", type=int, default=0)
    parser.add_argument("--counterpart-seed", type=int, default=0)
    parser.add_argument("--train-seed", type=int, default=None,
                        help="defaults to the first seed in the train config")
    args = parser.parse_args()

    out = args.out
    cohort = f"{out}/cohort.json"
    base = ["--config", args.config, "--out", out]
    step("gen-cohort", *base, "--seed", str(args.cohort_seed))
    step("impute", *base, "--cohort", cohort)
    step("train-gan", *base, "--cohort", cohort, "--seed", str(args.gan_seed))
    step("gen-counterparts", *base, "--cohort", cohort, "--gan", f"{out}/gan.json",
         "--seed", str(args.counterpart_seed))
    train_args = ["train", *base, "--cohort", cohort, "--counterparts", f"{out}/counterparts.jsonl"]
    if args.train_seed is not None:
        train_args += ["--seed", str(args.train_seed)]
    step(*train_args)
    step("evaluate", *base, "--cohort", cohort, "--model", f"{out}/model.json")
    step("dump-embeddings", *base, "--cohort", cohort, "--model", f"{out}/model.json")


if __name__ == "__main__":
    main()
