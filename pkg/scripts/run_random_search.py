#!/usr/bin/env python3
"""Random hyperparameter search over the declared space.

Scores each draw on a validation carve from the train split (the test split
is never consulted) and reports the winning configuration.
"""

import argparse
import json
import sys
from pathlib import Path

from faircontrast.cli import main as cli

REPO = Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(REPO / "configs" / "biased_cohort.json"))
    parser.add_argument("--artifacts", default="runs/pipeline")
    parser.add_argument("--out", default="runs/random_search")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    config = json.loads(Path(args.config).read_text())
    config.setdefault("search", {})["trials"] = args.trials
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resolved = out / "config.json"
    resolved.write_text(json.dumps(config, indent=1))

    rc = cli(["random-search", "--config", str(resolved),
              "--cohort", f"{args.artifacts}/cohort.json",
              "--counterparts", f"{args.artifacts}/counterparts.jsonl",
              "--seed", str(args.seed), "--threads", str(args.threads), "--out", args.out])
    if rc != 0:
        sys.exit(rc)
    doc = json.loads((out / "result.json").read_text())
    print(f"best trial {doc['best_trial']}: draw={doc['best_draw']}")
    print(f"validation f1={doc['trials'][doc['best_trial']]['val_f1']:.4f} over "
          f"{doc['n_validation']} held-out records")


if __name__ == "__main__":
    main()
