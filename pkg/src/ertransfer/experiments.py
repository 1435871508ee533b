"""Seed-averaged synthetic-shift experiments shared by scripts/ and the acceptance suite.

Each function returns a plain dict of per-seed values plus means so the
caller can print, store or assert on it.
"""

from __future__ import annotations

import numpy as np

from . import learners
from .evaluation import LabelOracle, array_metrics, estimate_from_scores
from .selection import relatedness_gate, select_source
from .synthetic import (ShiftSpec, adversarial, conflicting_features, covariate_shift, disjoint_support,
                        generate_synthetic, same_distribution, split_pool)
from .transfer import ScenarioConfig, featurize_target, train_not, train_nvt, train_scenario1, train_scenario2, \
    train_scenario3

SEEDS = tuple(range(10))
S3_FRACTIONS = (0.01, 0.02, 0.05, 0.1, 0.2)


def target_f1(model, test) -> float:
    return array_metrics(learners.predict(model, featurize_target(model, test.X)), test.labels).f1


def _summary(rows: dict[str, list[float]]) -> dict:
    return {"per_seed": rows, "mean": {k: float(np.mean(v)) for k, v in rows.items()}}


def scenario1_benefit(seeds=SEEDS, unlabeled_fraction: float = 0.5) -> dict:
    """NvT vs instance weighting with labeled sources and an unlabeled target under covariate shift."""
    rows = {"NvT": [], "S1": []}
    for seed in seeds:
        pools = generate_synthetic(covariate_shift(seed))
        _, unl, test = pools.target_split(0.0, unlabeled_fraction, seed)
        rows["NvT"].append(target_f1(train_nvt([pools.source]), test))
        cfg = ScenarioConfig(scenario="adequate_nothing", seed=seed)
        rows["S1"].append(target_f1(train_scenario1([(pools.source, None)], unl, cfg), test))
    out = _summary(rows)
    out["margin"] = out["mean"]["S1"] - out["mean"]["NvT"]
    return out


def scenario2_benefit(seeds=SEEDS, labeled_fraction: float = 0.1) -> dict:
    rows = {"NoT": [], "NvT": [], "S2": []}
    for seed in seeds:
        pools = generate_synthetic(conflicting_features(seed))
        tl, _, test = pools.target_split(labeled_fraction, 0.0, seed)
        rows["NoT"].append(target_f1(train_not(tl), test))
        rows["NvT"].append(target_f1(train_nvt([pools.source]), test))
        rows["S2"].append(target_f1(train_scenario2(pools.source, tl, ScenarioConfig(seed=seed)), test))
    out = _summary(rows)
    out["margin"] = out["mean"]["S2"] - max(out["mean"]["NoT"], out["mean"]["NvT"])
    return out


def scenario3_benefit(seeds=SEEDS, fractions=S3_FRACTIONS, unlabeled_fraction: float = 0.2) -> dict:
    """Label fraction swept on both sides; the margin is taken on F1 averaged over the sweep."""
    by_fraction = {}
    for frac in fractions:
        rows = {"NoT": [], "NvT": [], "S3": []}
        for seed in seeds:
            pools = generate_synthetic(conflicting_features(seed))
            tl, unl, test = pools.target_split(frac, unlabeled_fraction, seed)
            sl, _, _ = split_pool(pools.source, frac, 0.0, seed)
            rows["NoT"].append(target_f1(train_not(tl), test))
            rows["NvT"].append(target_f1(train_nvt([sl]), test))
            cfg = ScenarioConfig(scenario="limited_limited", seed=seed)
            rows["S3"].append(target_f1(train_scenario3(sl, tl, unl, cfg), test))
        by_fraction[frac] = _summary(rows)["mean"]
    mean = {k: float(np.mean([m[k] for m in by_fraction.values()])) for k in ("NoT", "NvT", "S3")}
    return {"by_fraction": by_fraction, "mean": mean, "margin": mean["S3"] - max(mean["NoT"], mean["NvT"])}


def gate_calibration(seeds=SEEDS) -> dict:
    same, disjoint = [], []
    for seed in seeds:
        p = generate_synthetic(same_distribution(seed, n_source=500, n_target=500))
        same.append(relatedness_gate(p.source.X, p.target.X, seed=seed).mean_mcc)
        p = generate_synthetic(disjoint_support(seed))
        disjoint.append(relatedness_gate(p.source.X, p.target.X, seed=seed).mean_mcc)
    return {"same": same, "disjoint": disjoint, "mean_same": float(np.mean(same)),
            "mean_disjoint": float(np.mean(disjoint))}


def ranking_correctness(seeds=SEEDS, offset: float = 0.3) -> dict:
    """A candidate drawn like the target against one with shifted feature means."""
    best = []
    for seed in seeds:
        pools = generate_synthetic(same_distribution(seed, n_source=500, n_target=500))
        shifted = generate_synthetic(ShiftSpec(seed=seed + 1000, n_source=500, n_target=500, mean_offset=offset)).target
        ranking = select_source({"shifted": shifted.X, "sharing": pools.source.X}, pools.target.X, seed=seed)
        best.append(ranking.best)
    return {"best": best, "correct": sum(b == "sharing" for b in best)}


def negative_transfer(seeds=SEEDS, labeled_fraction: float = 0.1) -> dict:
    rows = {"NoT": [], "NvT": [], "mcc": []}
    for seed in seeds:
        pools = generate_synthetic(adversarial(seed))
        tl, _, test = pools.target_split(labeled_fraction, 0.0, seed)
        rows["NoT"].append(target_f1(train_not(tl), test))
        rows["NvT"].append(target_f1(train_nvt([pools.source]), test))
        rows["mcc"].append(relatedness_gate(pools.source.X, pools.target.X, seed=seed).mean_mcc)
    out = _summary(rows)
    out["gap"] = out["mean"]["NoT"] - out["mean"]["NvT"]
    return out


def allocation_variance(reps: int = 200, B: int = 100, W: int = 5, seed: int = 0,
                        allocations=("neyman", "equal", "proportional")) -> dict:
    """Sample variance of the estimated F1 over repeated stratified draws on one scored pool."""
    pools = generate_synthetic(same_distribution(seed))
    model = train_not(pools.source)
    scores = learners.predict_proba(model, pools.target.X)
    keys = list(range(len(scores)))
    oracle = LabelOracle(dict(zip(keys, pools.target.labels.tolist())))
    exact = array_metrics(scores >= 0.5, pools.target.labels).f1
    out = {"exact_f1": exact, "variance": {}, "mean": {}}
    for alloc in allocations:
        est = [estimate_from_scores(keys, scores, oracle, B, W, [seed, r], allocation=alloc).metrics.f1
               for r in range(reps)]
        out["variance"][alloc] = float(np.var(est, ddof=1))
        out["mean"][alloc] = float(np.mean(est))
    return out
