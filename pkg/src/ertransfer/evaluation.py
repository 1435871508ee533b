"""Exact metrics and budgeted, stratified estimation of classifier quality.

Without labels the pool is scored, cut into W equal-width probability
strata, a labeling budget is spread over the strata (Neyman allocation by
default), and each stratum's sample is labeled by an oracle. Sampled
confusion counts are scaled up by |P_i| / B_i and precision, recall and F1
are computed from the scaled totals, so a budget covering the whole pool
reproduces the exact metrics.
"""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Hashable, Mapping, Sequence, TextIO

import numpy as np

from . import learners
from .data import LabeledPairs
from .learners import LearnerModel
from .pairs import EncodedPairs

logger = logging.getLogger(__name__)

ALLOCATIONS = ("neyman", "proportional", "equal")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    tp: float
    fp: float
    fn: float
    tn: float
    estimated: bool = False
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "tp": self.tp, "fp": self.fp,
                "fn": self.fn, "tn": self.tn, "estimated": self.estimated, **({"extras": self.extras} if self.extras else {})}


def f_score(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def metrics_from_counts(tp: float, fp: float, fn: float, tn: float, estimated: bool = False,
                        extras: dict | None = None) -> MetricsReport:
    """P = tp/(tp+fp) and R = tp/(tp+fn), each 0 when its denominator is 0."""
    p = tp / (tp + fp) if tp + fp > 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 0.0
    return MetricsReport(float(p), float(r), float(f_score(p, r)), tp, fp, fn, tn, estimated, extras or {})


def exact_metrics(predictions: Mapping[Hashable, int], truth: LabeledPairs | Mapping[Hashable, int]) -> MetricsReport:
    truth = truth.as_dict() if isinstance(truth, LabeledPairs) else truth
    missing = [k for k in predictions if k not in truth]
    if missing:
        raise EvaluationError(f"{len(missing)} predicted pairs have no truth label, e.g. {missing[0]!r}")
    tp = fp = fn = tn = 0
    for k, pred in predictions.items():
        t = int(truth[k])
        if pred:
            tp += t
            fp += 1 - t
        else:
            fn += t
            tn += 1 - t
    return metrics_from_counts(tp, fp, fn, tn)


def array_metrics(pred, truth) -> MetricsReport:
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    return metrics_from_counts(int(np.sum(pred & truth)), int(np.sum(pred & ~truth)),
                               int(np.sum(~pred & truth)), int(np.sum(~pred & ~truth)))


# ---------------------------------------------------------------- strata

@dataclass(frozen=True)
class Stratum:
    index: int
    low: float
    high: float
    members: tuple[int, ...]
    scores: tuple[float, ...]
    variance: float
    budget: int | None = None

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class StrataPlan:
    W: int
    strata: tuple[Stratum, ...]

    @property
    def budgets(self) -> list[int | None]:
        return [s.budget for s in self.strata]

    @property
    def sizes(self) -> list[int]:
        return [s.size for s in self.strata]

    def to_dict(self) -> dict:
        return {"W": self.W, "strata": [{"index": s.index, "interval": [s.low, s.high], "size": s.size,
                                         "variance": s.variance, "budget": s.budget} for s in self.strata]}


def stratum_of(p: float, W: int) -> int:
    return min(int(Fraction(p) * W), W - 1)


def strata_variance(scores) -> float:
    """Poisson-binomial variance of a stratum's positive count, sum of p(1 - p)."""
    p = np.asarray(scores, dtype=np.float64)
    return float(np.sum(p * (1.0 - p))) if p.size else 0.0


def stratify(scores, W: int = 5) -> StrataPlan:
    """Assign each score to bin floor(p W) of [0, 1], p = 1 going to the last bin.

    ``scores`` is a sequence (members are positions) or a mapping (members
    are positions in iteration order).
    """
    if W < 2:
        raise EvaluationError("W must be at least 2")
    vals = list(scores.values()) if isinstance(scores, Mapping) else list(np.asarray(scores, dtype=np.float64))
    buckets: list[list[int]] = [[] for _ in range(W)]
    for pos, p in enumerate(vals):
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise EvaluationError(f"score {p} at position {pos} lies outside [0, 1]")
        buckets[stratum_of(p, W)].append(pos)
    strata = []
    for i, members in enumerate(buckets):
        sc = tuple(float(vals[m]) for m in members)
        strata.append(Stratum(i, i / W, (i + 1) / W, tuple(members), sc, strata_variance(sc)))
    return StrataPlan(W, tuple(strata))


def _largest_remainder(quotas: Sequence[Fraction], total: int) -> list[int]:
    floors = [int(q) for q in quotas]
    left = total - sum(floors)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:left]:
        floors[i] += 1
    return floors


def _capped_quotas(weights: Sequence[Fraction], sizes: Sequence[int], B: int) -> list[Fraction]:
    """Real allocations proportional to ``weights`` with each capped at its size; surplus is re-spread."""
    k = len(sizes)
    alloc = [Fraction(0)] * k
    fixed: set[int] = set()
    remaining = Fraction(B)
    while remaining > 0:
        active = [i for i in range(k) if i not in fixed and weights[i] > 0]
        if not active:
            break
        tot = sum(weights[i] for i in active)
        q = {i: remaining * weights[i] / tot for i in active}
        over = [i for i in active if q[i] > sizes[i]]
        if not over:
            for i in active:
                alloc[i] = q[i]
            remaining = Fraction(0)
            break
        for i in over:
            alloc[i] = Fraction(sizes[i])
            fixed.add(i)
            remaining -= sizes[i]
    if remaining > 0:
        # weighted strata are full; spread the rest by spare capacity
        spare = [Fraction(sizes[i]) - alloc[i] for i in range(k)]
        tot = sum(spare)
        alloc = [alloc[i] + remaining * spare[i] / tot for i in range(k)]
    return alloc


def allocate(plan: StrataPlan, B: int, method: str = "neyman") -> StrataPlan:
    """Spread an integer budget over the strata; sum of budgets = min(B, pool size)."""
    if method not in ALLOCATIONS:
        raise EvaluationError(f"unknown allocation {method!r}")
    if B < 1:
        raise EvaluationError("budget must be at least 1")
    sizes = plan.sizes
    n = sum(sizes)
    if n == 0:
        raise EvaluationError("plan has no members")
    if B > n:
        logger.warning("budget %d exceeds pool size %d; capping", B, n)
        B = n
    if method == "neyman":
        weights = [Fraction(s.variance) * s.size for s in plan.strata]
        if not any(weights):
            weights = [Fraction(s) for s in sizes]
    elif method == "proportional":
        weights = [Fraction(s) for s in sizes]
    else:
        weights = [Fraction(1 if s else 0) for s in sizes]
    budgets = _largest_remainder(_capped_quotas(weights, sizes, B), B)
    return StrataPlan(plan.W, tuple(replace(s, budget=b) for s, b in zip(plan.strata, budgets)))


def neyman_allocate(plan: StrataPlan, B: int) -> StrataPlan:
    """B_i proportional to v_i |P_i|; all-zero variance falls back to B_i proportional to |P_i|."""
    return allocate(plan, B, "neyman")


# ---------------------------------------------------------------- oracles

class LabelOracle:
    """Answers label queries from a fixed mapping; counts distinct pairs asked."""

    def __init__(self, labels: Mapping[Hashable, int] | LabeledPairs):
        self._labels = dict(labels.as_dict() if isinstance(labels, LabeledPairs) else labels)
        self._asked: set = set()

    @classmethod
    def from_file(cls, path: str | Path) -> "LabelOracle":
        from .data import load_labels
        return cls(load_labels(path))

    @property
    def query_count(self) -> int:
        return len(self._asked)

    def query(self, key: Hashable) -> int:
        if key not in self._labels:
            raise EvaluationError(f"oracle has no label for {key!r}")
        self._asked.add(key)
        return int(self._labels[key])

    def peek(self, key: Hashable) -> int:
        """Label without counting a query (for tests and exact metrics)."""
        return int(self._labels[key])


class PromptOracle(LabelOracle):
    """Asks a person on a text stream; answers are cached so a pair is asked once."""

    def __init__(self, describe=None, stdin: TextIO | None = None, stdout: TextIO | None = None):
        super().__init__({})
        self._describe = describe or (lambda key: repr(key))
        self._in = stdin or sys.stdin
        self._out = stdout or sys.stdout

    def query(self, key: Hashable) -> int:
        if key not in self._labels:
            while True:
                self._out.write(f"{self._describe(key)}\nduplicate? [y/n] ")
                self._out.flush()
                line = self._in.readline()
                if not line:
                    raise EvaluationError("input closed before a label was given")
                ans = line.strip().lower()
                if ans in ("y", "yes", "1"):
                    self._labels[key] = 1
                    break
                if ans in ("n", "no", "0"):
                    self._labels[key] = 0
                    break
        self._asked.add(key)
        return self._labels[key]


# ---------------------------------------------------------------- estimation

@dataclass(frozen=True)
class EstimateResult:
    metrics: MetricsReport
    plan: StrataPlan
    flags: dict[int, list[str]]
    queries: int

    def to_dict(self) -> dict:
        return {"metrics": self.metrics.to_dict(), "plan": self.plan.to_dict(),
                "flags": {str(k): v for k, v in self.flags.items()}, "queries": self.queries}


def estimate_from_scores(keys: Sequence[Hashable], scores, oracle: LabelOracle, B: int, W: int = 5, seed=0,
                         threshold: float = 0.5, allocation: str = "neyman") -> EstimateResult:
    scores = np.asarray(scores, dtype=np.float64)
    if len(keys) != len(scores):
        raise EvaluationError("keys and scores differ in length")
    if B > len(keys):
        raise EvaluationError(f"budget {B} exceeds pool size {len(keys)}")
    pred = scores >= threshold
    plan = allocate(stratify(scores, W), B, allocation)
    rng = np.random.default_rng(seed)
    n = len(keys)
    tp = fp = fn = tn = 0.0
    lit_a = lit_r = 0.0
    flags: dict[int, list[str]] = {}
    queries = 0
    for s in plan.strata:
        members = np.array(s.members, dtype=np.int64)
        if s.size == 0:
            continue
        if s.budget == 0:
            # no labels here: fall back to the model's own expectations
            p, pr = scores[members], pred[members]
            tp += float(np.sum(p[pr]))
            fp += float(np.sum(1.0 - p[pr]))
            fn += float(np.sum(p[~pr]))
            tn += float(np.sum(1.0 - p[~pr]))
            flags.setdefault(s.index, []).append("unsampled")
            continue
        chosen = np.sort(rng.choice(members, size=s.budget, replace=False))
        truth = np.array([oracle.query(keys[i]) for i in chosen], dtype=bool)
        queries += len(chosen)
        pr = pred[chosen]
        c_tp, c_fp = int(np.sum(pr & truth)), int(np.sum(pr & ~truth))
        c_fn, c_tn = int(np.sum(~pr & truth)), int(np.sum(~pr & ~truth))
        scale = s.size / s.budget
        tp += c_tp * scale
        fp += c_fp * scale
        fn += c_fn * scale
        tn += c_tn * scale
        if c_tp + c_fp:
            a_i = c_tp / (c_tp + c_fp)
        else:
            a_i = 1.0
            flags.setdefault(s.index, []).append("no_predicted_positives")
        if c_tp + c_fn:
            r_i = c_tp / (c_tp + c_fn)
        else:
            r_i = 1.0
            flags.setdefault(s.index, []).append("no_true_positives")
        lit_a += s.size / n * a_i
        lit_r += s.size / n * r_i
    extras = {"weighted_precision": lit_a, "weighted_recall": lit_r, "weighted_f1": f_score(lit_a, lit_r),
              "budget": int(sum(plan.budgets)), "allocation": allocation}
    return EstimateResult(metrics_from_counts(tp, fp, fn, tn, estimated=True, extras=extras), plan, flags, queries)


def estimate_performance(model: LearnerModel, pool: EncodedPairs, oracle: LabelOracle, B: int, W: int = 5,
                         seed=0, threshold: float = 0.5, allocation: str = "neyman",
                         featurize=None) -> EstimateResult:
    """Score ``pool`` with ``model`` and estimate P/R/F1 from at most B oracle labels.

    ``featurize`` maps raw similarity vectors into the model's feature space
    (needed for models trained on augmented features).
    """
    X = pool.X if featurize is None else featurize(pool.X)
    scores = np.atleast_1d(learners.predict_proba(model, X))
    return estimate_from_scores(pool.keys(), scores, oracle, B, W, seed, threshold, allocation)

