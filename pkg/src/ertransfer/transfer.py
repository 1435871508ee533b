"""Training ER classifiers for a target dataset from source-labeled pairs.

Baselines:
  * NoT trains on target labels only, NvT on the pooled source labels only.
Transfer algorithms, one per (source, target) labeling scenario:
  * (adequate, nothing): source pairs reweighted by how target-like a
    source/target separator finds them, w(x) = 1/p(source|x) - 1.
  * (adequate, limited): block-replicated feature augmentation; the first
    d-block is shared, block i belongs to source i and the last to the target.
  * (limited, limited): as above plus every unlabeled target vector added
    twice, with labels 0 and 1, through <0, ..., 0, x, -x>.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import learners
from .data import (importance_indices, max_balanced_budget, replicate_with_replacement, undersample_indices)
from .learners import LearnerModel, LearnerSpec, balanced_class_weights
from .pairs import UNLABELED, EncodedPairs
from .seeding import derive_seed

logger = logging.getLogger(__name__)

SCENARIOS = ("NoT", "NvT", "adequate_nothing", "adequate_limited", "limited_limited")
PROB_EPS = 1e-6


class TransferError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "adequate_limited"
    max_imbalance_ratio: float = 10.0
    source_budget: int | None = None
    target_budget: int | None = None
    balance_classes: bool = True
    class_ratio: tuple[int, int] = (1, 3)
    replicate_target: bool = True
    unlabeled_weight: float = 1.0
    seed: int = 0
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    separator: LearnerSpec = field(default_factory=LearnerSpec)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise TransferError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.max_imbalance_ratio <= 0:
            raise TransferError("max_imbalance_ratio must be positive")
        if self.unlabeled_weight < 0:
            raise TransferError("unlabeled_weight must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["learner"] = self.learner.to_dict()
        d["separator"] = self.separator.to_dict()
        d["class_ratio"] = list(self.class_ratio)
        return d


# ---------------------------------------------------------------- transforms

def _blocks(x, n: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    rows = x.reshape(1, -1) if x.ndim == 1 else x
    return rows, np.zeros((rows.shape[0], (n + 2) * rows.shape[1]))


def phi_source(x, i: int, n: int) -> np.ndarray:
    """<x, 0, .., x (block i), .., 0, 0> in (n+2)*d dimensions, for source i in 1..n."""
    if not 1 <= i <= n:
        raise TransferError(f"source index {i} outside 1..{n}")
    rows, out = _blocks(x, n)
    d = rows.shape[1]
    out[:, :d] = rows
    out[:, i * d:(i + 1) * d] = rows
    return out[0] if np.ndim(x) == 1 else out


def phi_target(x, n: int) -> np.ndarray:
    rows, out = _blocks(x, n)
    d = rows.shape[1]
    out[:, :d] = rows
    out[:, (n + 1) * d:] = rows
    return out[0] if np.ndim(x) == 1 else out


def phi_unlabeled(x, n: int) -> np.ndarray:
    rows, out = _blocks(x, n)
    d = rows.shape[1]
    out[:, n * d:(n + 1) * d] = rows
    out[:, (n + 1) * d:] = -rows
    return out[0] if np.ndim(x) == 1 else out


def extract_block(z, block: int, d: int) -> np.ndarray:
    z = np.asarray(z)
    return z[..., block * d:(block + 1) * d]


# ------------------------------------------------------------ instance weights

def instance_weight(p_source):
    """1/p - 1 with p clamped to [1e-6, 1 - 1e-6]; scalar in, scalar out."""
    p = np.clip(np.asarray(p_source, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    w = 1.0 / p - 1.0
    return float(w) if w.ndim == 0 else w


def fit_domain_separator(source_x, target_x, seed: int = 0, spec: LearnerSpec | None = None) -> LearnerModel:
    """Logistic model of P(origin = source | x) on source (1) vs target (0) vectors."""
    source_x = np.asarray(source_x, dtype=np.float64)
    target_x = np.asarray(target_x, dtype=np.float64)
    if not len(source_x) or not len(target_x):
        raise TransferError("domain separator needs non-empty source and target pools")
    spec = replace(spec or LearnerSpec(), kind="logistic_regression", class_weight=None, seed=seed)
    X = np.vstack([source_x, target_x])
    y = np.concatenate([np.ones(len(source_x), dtype=np.int64), np.zeros(len(target_x), dtype=np.int64)])
    return learners.fit(spec, X, y)


def source_weights(separator: LearnerModel, X) -> np.ndarray:
    return instance_weight(learners.predict_proba(separator, np.asarray(X, dtype=np.float64)))


# ------------------------------------------------------------------ helpers

def _require_labeled(pairs: EncodedPairs, what: str) -> None:
    if not len(pairs):
        raise TransferError(f"{what}: no labeled pairs")
    if np.any(pairs.labels == UNLABELED):
        raise TransferError(f"{what}: every pair must carry a label")
    if len(np.unique(pairs.labels)) < 2:
        raise TransferError(f"{what}: both classes are required")


def _balanced_fold(y: np.ndarray, s: np.ndarray) -> np.ndarray:
    cw = balanced_class_weights(y)
    return s * np.where(y == 1, cw.get(1, 1.0), cw.get(0, 1.0))


def _summary(w) -> dict:
    w = np.asarray(w, dtype=np.float64)
    if not len(w):
        return {}
    return {"min": float(w.min()), "mean": float(w.mean()), "max": float(w.max()), "count": int(len(w))}


def _attach(model: LearnerModel, report: dict) -> LearnerModel:
    model.meta["training"] = report
    return model


def _balance(pairs: EncodedPairs, cfg: ScenarioConfig, stage: str) -> np.ndarray:
    """Indices keeping the pool at the configured class ratio where feasible."""
    idx = np.arange(len(pairs))
    if not cfg.balance_classes or len(np.unique(pairs.labels)) < 2:
        return idx
    n_pos = int(np.sum(pairs.labels == 1))
    n_neg = int(np.sum(pairs.labels == 0))
    budget = max_balanced_budget(n_pos, n_neg, cfg.class_ratio)
    if budget >= len(pairs):
        return idx
    return undersample_indices(pairs.labels, budget, cfg.class_ratio, derive_seed(cfg.seed, stage))


# ---------------------------------------------------------------- baselines

def train_not(target_labeled: EncodedPairs, spec: LearnerSpec | None = None) -> LearnerModel:
    """Target labels only, class-balanced."""
    _require_labeled(target_labeled, "NoT")
    spec = replace(spec or LearnerSpec(), class_weight="balanced")
    model = learners.fit(spec, target_labeled.X, target_labeled.labels, target_labeled.weights)
    return _attach(model, {"algorithm": "NoT", "counts": {"target": len(target_labeled)}, "seed": spec.seed})


def train_nvt(sources_labeled: Sequence[EncodedPairs], spec: LearnerSpec | None = None) -> LearnerModel:
    """Pooled source labels; class weights are balanced within each source before pooling."""
    if isinstance(sources_labeled, EncodedPairs):
        sources_labeled = [sources_labeled]
    spec = spec or LearnerSpec()
    Xs, ys, ss, counts = [], [], [], {}
    for k, src in enumerate(sources_labeled):
        if not len(src):
            continue
        if np.any(src.labels == UNLABELED):
            raise TransferError("NvT: source pairs must be labeled")
        Xs.append(src.X)
        ys.append(src.labels)
        ss.append(_balanced_fold(src.labels, src.weights))
        counts[f"source_{k + 1}"] = len(src)
    if not Xs:
        raise TransferError("NvT: no labeled source pairs")
    y = np.concatenate(ys)
    if len(np.unique(y)) < 2:
        raise TransferError("NvT: pooled sources contain a single class")
    model = learners.fit(replace(spec, class_weight=None), np.vstack(Xs), y, np.concatenate(ss))
    return _attach(model, {"algorithm": "NvT", "counts": counts, "seed": spec.seed})


# --------------------------------------------------------------- scenario 1

@dataclass
class SourcePool:
    labeled: EncodedPairs
    unlabeled: EncodedPairs | None = None

    def all_x(self) -> np.ndarray:
        parts = [self.labeled.X] + ([self.unlabeled.X] if self.unlabeled is not None and len(self.unlabeled) else [])
        return np.vstack(parts)


def _as_pools(sources) -> list[SourcePool]:
    if isinstance(sources, (EncodedPairs, SourcePool)):
        sources = [sources]
    out = []
    for s in sources:
        if isinstance(s, SourcePool):
            out.append(s)
        elif isinstance(s, EncodedPairs):
            out.append(SourcePool(s))
        else:
            labeled, unlabeled = s
            out.append(SourcePool(labeled, unlabeled))
    return out


def scenario1_weights(sources, target_unlabeled, cfg: ScenarioConfig) -> tuple[list[np.ndarray], LearnerModel]:
    """Separator-derived weights for every labeled source pair, one array per source."""
    pools = _as_pools(sources)
    tx = target_unlabeled.X if isinstance(target_unlabeled, EncodedPairs) else np.asarray(target_unlabeled, float)
    sep = fit_domain_separator(np.vstack([p.all_x() for p in pools]), tx,
                               derive_seed(cfg.seed, "separator"), cfg.separator)
    return [source_weights(sep, p.labeled.X) for p in pools], sep


def train_scenario1(sources, target_unlabeled, cfg: ScenarioConfig | None = None) -> LearnerModel:
    """(adequate, nothing): instance weighting of the pooled labeled source pairs.

    With ``cfg.source_budget`` the budget is filled by importance sampling on
    the weights (split equally across sources) and the sampled pairs are fit
    unweighted; otherwise all labeled pairs are fit with their weights.
    """
    cfg = cfg or ScenarioConfig(scenario="adequate_nothing")
    if isinstance(target_unlabeled, EncodedPairs) and np.any(target_unlabeled.labels != UNLABELED):
        raise TransferError("scenario (adequate, nothing) takes no target labels")
    pools = _as_pools(sources)
    weights, _ = scenario1_weights(pools, target_unlabeled, cfg)
    Xs, ys, ss, counts = [], [], [], {}
    shares = _equal_shares(cfg.source_budget, len(pools)) if cfg.source_budget else None
    for k, (pool, w) in enumerate(zip(pools, weights)):
        src = pool.labeled
        if np.any(src.labels == UNLABELED):
            raise TransferError("labeled source pool contains unlabeled pairs")
        if shares is not None:
            idx = importance_indices(w, min(shares[k], int(np.count_nonzero(w))),
                                     derive_seed(cfg.seed, f"importance/{k}"))
            Xs.append(src.X[idx])
            ys.append(src.labels[idx])
            ss.append(src.weights[idx])
        else:
            Xs.append(src.X)
            ys.append(src.labels)
            ss.append(src.weights * w)
        counts[f"source_{k + 1}"] = int(len(ys[-1]))
    y = np.concatenate(ys)
    if len(np.unique(y)) < 2:
        raise TransferError("scenario (adequate, nothing): weighted source pool has a single class")
    s = np.concatenate(ss)
    if cfg.learner.class_weight is not None or cfg.balance_classes:
        s = _balanced_fold(y, s)
    model = learners.fit(replace(cfg.learner, class_weight=None), np.vstack(Xs), y, s)
    all_w = np.concatenate(weights)
    return _attach(model, {"algorithm": "adequate_nothing", "counts": counts,
                           "target_unlabeled": int(len(target_unlabeled)), "weights": _summary(all_w),
                           "seed": cfg.seed})


# ------------------------------------------------------- imbalance handling

def _equal_shares(total: int, n: int) -> list[int]:
    base, extra = divmod(int(total), n)
    return [base + (1 if k < extra else 0) for k in range(n)]


def apply_imbalance_policy(source_pool, target_pool: EncodedPairs | None, cfg: ScenarioConfig,
                           weights=None, parity: bool | None = None) -> tuple[list[EncodedPairs], EncodedPairs | None]:
    """Class-balance each pool, cap the sources at ratio x |target|, replicate the target to parity.

    ``source_pool`` may be one pool or a list (one per source); the cap is
    shared equally among sources. ``weights`` (one array per source) drive the
    importance sampling used for the cap; uniform weights are used if absent.
    Returns (source subsets, target multiset).
    """
    single = isinstance(source_pool, EncodedPairs)
    sources = [source_pool] if single else list(source_pool)
    if weights is not None and single:
        weights = [weights]
    parity = cfg.replicate_target if parity is None else parity

    balanced_src, balanced_w = [], []
    for k, src in enumerate(sources):
        idx = _balance(src, cfg, f"balance/source/{k}")
        balanced_src.append(src.take(idx))
        balanced_w.append(None if weights is None else np.asarray(weights[k])[idx])

    target = None
    if target_pool is not None and len(target_pool):
        target = target_pool.take(_balance(target_pool, cfg, "balance/target"))
        if cfg.target_budget is not None and len(target) > cfg.target_budget:
            idx = undersample_indices(target.labels, cfg.target_budget, cfg.class_ratio,
                                      derive_seed(cfg.seed, "budget/target"))
            target = target.take(idx)

    total_src = sum(len(s) for s in balanced_src)
    cap = None
    if target is not None:
        cap = int(np.floor(cfg.max_imbalance_ratio * len(target)))
    if cfg.source_budget is not None:
        cap = cfg.source_budget if cap is None else min(cap, cfg.source_budget)
    out_src = balanced_src
    if cap is not None and total_src > cap:
        shares = _equal_shares(cap, len(balanced_src))
        out_src = []
        for k, (src, w) in enumerate(zip(balanced_src, balanced_w)):
            if len(src) <= shares[k]:
                out_src.append(src)
                continue
            w = np.ones(len(src)) if w is None else w
            idx = importance_indices(w, shares[k], derive_seed(cfg.seed, f"importance/{k}"))
            out_src.append(src.take(idx))

    if target is not None and parity:
        n_src = sum(len(s) for s in out_src)
        if n_src > len(target):
            target = replicate_with_replacement(target, n_src, derive_seed(cfg.seed, "replicate"))
    return out_src, target


# ---------------------------------------------------------- scenarios 2 and 3

def _augmented_training_set(sources: list[EncodedPairs], target_labeled: EncodedPairs, cfg: ScenarioConfig,
                            target_unlabeled: EncodedPairs | None):
    n = len(sources)
    for k, src in enumerate(sources):
        if not len(src) or np.any(src.labels == UNLABELED):
            raise TransferError(f"source {k + 1}: needs labeled pairs only")
    if not len(target_labeled) or np.any(target_labeled.labels == UNLABELED):
        raise TransferError("target labels are required")

    cap_active = sum(len(s) for s in sources) > cfg.max_imbalance_ratio * len(target_labeled)
    weights = None
    report: dict = {}
    if cap_active:
        # weights come from the untransformed vectors
        tx = [target_labeled.X] + ([target_unlabeled.X] if target_unlabeled is not None and len(target_unlabeled) else [])
        sep = fit_domain_separator(np.vstack([s.X for s in sources]), np.vstack(tx),
                                   derive_seed(cfg.seed, "separator"), cfg.separator)
        weights = [source_weights(sep, s.X) for s in sources]
        report["weights"] = _summary(np.concatenate(weights))
    chosen, target = apply_imbalance_policy(sources, target_labeled, cfg, weights)

    Xs, ys, ss = [], [], []
    counts = {}
    for i, src in enumerate(chosen, start=1):
        Xs.append(phi_source(src.X, i, n))
        ys.append(src.labels)
        ss.append(src.weights)
        counts[f"source_{i}"] = len(src)
    Xs.append(phi_target(target.X, n))
    ys.append(target.labels)
    ss.append(target.weights)
    counts["target_labeled"] = len(target_labeled)
    counts["target_rows"] = len(target)
    y = np.concatenate(ys)
    if len(np.unique(y)) < 2:
        raise TransferError("augmented training set has a single class")
    s = _balanced_fold(y, np.concatenate(ss))
    report["counts"] = counts
    return np.vstack(Xs), y, s, report


def _as_source_list(sources) -> list[EncodedPairs]:
    if isinstance(sources, EncodedPairs):
        return [sources]
    return [s.labeled if isinstance(s, SourcePool) else s for s in sources]


def train_scenario2(sources_labeled, target_labeled: EncodedPairs, cfg: ScenarioConfig | None = None,
                    target_unlabeled: EncodedPairs | None = None) -> LearnerModel:
    """(adequate, limited): feature augmentation over source and target labels.

    ``target_unlabeled`` is only used to fit the domain separator when the
    source pool has to be capped.
    """
    cfg = cfg or ScenarioConfig(scenario="adequate_limited")
    sources = _as_source_list(sources_labeled)
    X, y, s, report = _augmented_training_set(sources, target_labeled, cfg, target_unlabeled)
    model = learners.fit(replace(cfg.learner, class_weight=None), X, y, s)
    report.update({"algorithm": "adequate_limited", "n_sources": len(sources), "feature_dim": int(X.shape[1]),
                   "seed": cfg.seed})
    return _attach(model, report)


def train_scenario3(sources_labeled, target_labeled: EncodedPairs, target_unlabeled: EncodedPairs | None,
                    cfg: ScenarioConfig | None = None) -> LearnerModel:
    """(limited, limited): scenario-2 augmentation plus both-label copies of unlabeled target vectors."""
    cfg = cfg or ScenarioConfig(scenario="limited_limited")
    if target_unlabeled is None or not len(target_unlabeled):
        logger.warning("no unlabeled target pairs; falling back to scenario (adequate, limited)")
        return train_scenario2(sources_labeled, target_labeled, cfg)
    sources = _as_source_list(sources_labeled)
    n = len(sources)
    X, y, s, report = _augmented_training_set(sources, target_labeled, cfg, target_unlabeled)
    U = phi_unlabeled(target_unlabeled.X, n)
    m = len(target_unlabeled)
    X = np.vstack([X, U, U])
    y = np.concatenate([y, np.zeros(m, dtype=np.int64), np.ones(m, dtype=np.int64)])
    s = np.concatenate([s, np.full(2 * m, cfg.unlabeled_weight)])
    model = learners.fit(replace(cfg.learner, class_weight=None), X, y, s)
    report["counts"]["unlabeled_rows"] = 2 * m
    report.update({"algorithm": "limited_limited", "n_sources": n, "feature_dim": int(X.shape[1]),
                   "seed": cfg.seed})
    return _attach(model, report)


def featurize_target(model: LearnerModel, X) -> np.ndarray:
    """Map raw target similarity vectors into the feature space ``model`` was trained in."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[-1]
    if model.n_features == d:
        return X
    n_blocks, rem = divmod(model.n_features, d)
    if rem or n_blocks < 3:
        raise TransferError(f"model expects {model.n_features} features, vectors have {d}")
    return phi_target(X, n_blocks - 2)


def target_proba(model: LearnerModel, X) -> np.ndarray:
    return learners.predict_proba(model, featurize_target(model, np.atleast_2d(X)))
