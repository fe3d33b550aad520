"""Matched-conditions random-forest baseline on siteA, with wall-clock time."""

import argparse
import json

from avibench.benchmark import BASELINE_SIZES, SHIPPED_SEED, run_matched_baseline
from avibench.pipeline import DetectorConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=SHIPPED_SEED)
    ap.add_argument("--n-train", type=int, default=BASELINE_SIZES[0])
    ap.add_argument("--n-test", type=int, default=BASELINE_SIZES[1])
    ap.add_argument("--variant", choices=("random-forest", "gmm-pair"), default="random-forest")
    ap.add_argument("--site", default="siteA")
    args = ap.parse_args()
    res = run_matched_baseline(args.seed, (args.n_train, args.n_test), args.site,
                               DetectorConfig(variant=args.variant, seed=args.seed))
    print(json.dumps(res.to_dict(), indent=2))


if __name__ == "__main__":
    main()
