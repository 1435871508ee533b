"""Run the seed-averaged synthetic-shift experiments and store their results.

    python scripts/run_experiments.py --out results/experiments.json
    python scripts/run_experiments.py --only s1 gate --seeds 5
"""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from ertransfer import experiments as ex

EXPERIMENTS = {
    "s1": ("instance weighting vs NvT under covariate shift", lambda seeds: ex.scenario1_benefit(seeds)),
    "s2": ("feature augmentation, 10% target labels", lambda seeds: ex.scenario2_benefit(seeds)),
    "s3": ("augmentation plus unlabeled rows, 1-20% labels", lambda seeds: ex.scenario3_benefit(seeds)),
    "gate": ("MCC gate on same-generator and disjoint pools", lambda seeds: ex.gate_calibration(seeds)),
    "rank": ("source ranking by d_A", lambda seeds: ex.ranking_correctness(seeds)),
    "negative": ("negative transfer under adversarial shift", lambda seeds: ex.negative_transfer(seeds)),
    "allocation": ("F1 estimate variance by budget allocation", lambda seeds: ex.allocation_variance()),
}


def headline(name: str, res: dict) -> str:
    if name in ("s1", "s2", "s3"):
        means = "  ".join(f"{k} {v:.3f}" for k, v in res["mean"].items())
        return f"{means}  margin {res['margin']:+.3f}"
    if name == "gate":
        return f"mean MCC same {res['mean_same']:.3f}  disjoint {res['mean_disjoint']:.3f}"
    if name == "rank":
        return f"sharing candidate first in {res['correct']}/{len(res['best'])} seeds"
    if name == "negative":
        m = res["mean"]
        return f"NoT {m['NoT']:.3f}  NvT {m['NvT']:.3f}  gap {res['gap']:.3f}  gate MCC {m['mcc']:.3f}"
    return "  ".join(f"{k} {v:.5f}" for k, v in res["variance"].items())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--only", nargs="+", choices=sorted(EXPERIMENTS))
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--out", default="results/experiments.json")
    args = ap.parse_args()
    seeds = tuple(range(args.seeds))
    results = {}
    for name in args.only or EXPERIMENTS:
        desc, fn = EXPERIMENTS[name]
        t = time.perf_counter()
        res = fn(seeds)
        res["seconds"] = round(time.perf_counter() - t, 1)
        results[name] = res
        print(f"{name:<10} {desc}\n{'':<10} {headline(name, res)}  ({res['seconds']} s)")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(results, indent=1, sort_keys=True, default=str) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
