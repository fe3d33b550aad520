"""First vs second stage (self-adaptation) on siteB, over several seeds."""

import argparse
import json

from avibench.benchmark import (ADAPTATION_SEEDS, BENCH_ADAPTATION, SHIFT_SIZES, build_shift_benchmark,
                                run_adaptation)
from avibench.detectors.adapt import AdaptationConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=list(ADAPTATION_SEEDS))
    ap.add_argument("--low", type=float, default=BENCH_ADAPTATION.low_threshold)
    ap.add_argument("--high", type=float, default=BENCH_ADAPTATION.high_threshold)
    ap.add_argument("--max-added", type=int, default=BENCH_ADAPTATION.max_added)
    ap.add_argument("--selection", choices=("score", "rank"), default=BENCH_ADAPTATION.selection)
    ap.add_argument("--out")
    args = ap.parse_args()
    cfg = AdaptationConfig(args.low, args.high, args.max_added, selection=args.selection)
    rows = []
    for seed in args.seeds:
        res = run_adaptation(build_shift_benchmark(seed, SHIFT_SIZES), adapt_cfg=cfg)
        row = {"seed": seed, **res.to_dict(), "holds": res.mismatched_improves and res.matched_not_improved,
               "added": {k: [[len(r["positive"]), len(r["negative"])] for r in log.rounds]
                         for k, log in res.logs.items()}}
        rows.append(row)
        print(f"seed {seed}: mismatched {res.mismatched_before:.4f} -> {res.mismatched_after:.4f}, "
              f"matched {res.matched_before:.4f} -> {res.matched_after:.4f}", flush=True)
    held = sum(r["holds"] for r in rows)
    print(f"direction holds on {held}/{len(rows)} seeds")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump({"config": vars(args), "runs": rows}, f, indent=2)


if __name__ == "__main__":
    main()
