"""Source relatedness (MCC of a domain separator) and source ranking by d_A."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import learners
from .learners import LearnerSpec
from .transfer import fit_domain_separator

MIN_POOL = 10


class SelectionError(ValueError):
    pass


def mcc(tp: int, tn: int, fp: int, fn: int) -> float:
    """Matthews correlation coefficient; 0 when any factor of the denominator is 0."""
    if min(tp, tn, fp, fn) < 0 or tp + tn + fp + fn < 1:
        raise SelectionError("confusion counts must be non-negative with at least one example")
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if den == 0:
        return 0.0
    val = (tp * tn - fp * fn) / math.sqrt(den)
    return max(-1.0, min(1.0, val))


def d_a(acc: float) -> float:
    """2 (acc - 0.5), clamped at 0 for sub-chance accuracy."""
    return max(0.0, 2.0 * (acc - 0.5))


@dataclass(frozen=True)
class RelatednessReport:
    mcc_values: tuple[float, ...]
    threshold: float
    accuracies: tuple[float, ...] = ()

    @property
    def mean_mcc(self) -> float:
        return float(np.mean(self.mcc_values))

    @property
    def related(self) -> bool:
        return self.mean_mcc <= self.threshold

    @property
    def verdict(self) -> str:
        return "related" if self.related else "unrelated"

    def to_dict(self) -> dict:
        return {"mcc": list(self.mcc_values), "mean_mcc": self.mean_mcc, "threshold": self.threshold,
                "verdict": self.verdict, "accuracy": list(self.accuracies)}


@dataclass(frozen=True)
class RankedSource:
    name: str
    accuracy: float
    d_a: float


@dataclass(frozen=True)
class SourceRanking:
    rows: tuple[RankedSource, ...] = field(default_factory=tuple)

    @property
    def best(self) -> str:
        return self.rows[0].name

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.rows]

    def to_dict(self) -> dict:
        return {"ranking": [{"name": r.name, "accuracy": r.accuracy, "d_a": r.d_a} for r in self.rows]}


def _check_pools(source_x, target_x):
    S = np.asarray(source_x, dtype=np.float64)
    T = np.asarray(target_x, dtype=np.float64)
    if len(S) < MIN_POOL or len(T) < MIN_POOL:
        raise SelectionError(f"both pools need at least {MIN_POOL} vectors")
    return S, T


def _split(n: int, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    k = min(n - 1, max(1, int(round(fraction * n))))
    return np.sort(perm[:k]), np.sort(perm[k:])


def separator_run(S: np.ndarray, T: np.ndarray, train_fraction: float, rng: np.random.Generator,
                  spec: LearnerSpec | None = None) -> tuple[float, float]:
    """One train/held-out round; returns (held-out MCC, held-out accuracy).

    Each pool is split on its own, so the held-out part always holds both origins.
    """
    s_tr, s_te = _split(len(S), train_fraction, rng)
    t_tr, t_te = _split(len(T), train_fraction, rng)
    sep = fit_domain_separator(S[s_tr], T[t_tr], seed=int(rng.integers(2**31)), spec=spec)
    pred_s = learners.predict(sep, S[s_te])
    pred_t = learners.predict(sep, T[t_te])
    tp, fn = int(pred_s.sum()), int(len(pred_s) - pred_s.sum())
    fp, tn = int(pred_t.sum()), int(len(pred_t) - pred_t.sum())
    return mcc(tp, tn, fp, fn), (tp + tn) / (tp + tn + fp + fn)


def relatedness_gate(source_x, target_x, runs: int = 10, train_fraction: float = 0.8, threshold: float = 0.2,
                     seed: int = 0, spec: LearnerSpec | None = None) -> RelatednessReport:
    """Held-out MCC of a source-vs-target separator over ``runs`` random 80/20 splits."""
    if not 0.0 < train_fraction < 1.0:
        raise SelectionError("train_fraction must lie in (0, 1)")
    S, T = _check_pools(source_x, target_x)
    values, accs = [], []
    for r in range(runs):
        m, a = separator_run(S, T, train_fraction, np.random.default_rng([seed, r]), spec)
        values.append(m)
        accs.append(a)
    return RelatednessReport(tuple(values), threshold, tuple(accs))


def separator_accuracy(source_x, target_x, runs: int = 10, train_fraction: float = 0.8, seed: int = 0,
                       spec: LearnerSpec | None = None) -> float:
    """Mean held-out separator accuracy, with both pools cut to equal size in every run.

    Equal sizes make 0.5 the accuracy of indistinguishable domains.
    """
    S, T = _check_pools(source_x, target_x)
    n = min(len(S), len(T))
    accs = []
    for r in range(runs):
        rng = np.random.default_rng([seed, r])
        Sr = S[np.sort(rng.choice(len(S), n, replace=False))]
        Tr = T[np.sort(rng.choice(len(T), n, replace=False))]
        accs.append(separator_run(Sr, Tr, train_fraction, rng, spec)[1])
    return float(np.mean(accs))


def estimate_da(source_x, target_x, runs: int = 10, seed: int = 0, train_fraction: float = 0.8,
                spec: LearnerSpec | None = None) -> float:
    return d_a(separator_accuracy(source_x, target_x, runs, train_fraction, seed, spec))


def select_source(candidates: Mapping[str, np.ndarray], target_x, seed: int = 0, runs: int = 10,
                  train_fraction: float = 0.8, spec: LearnerSpec | None = None) -> SourceRanking:
    """Rank candidate sources by ascending d_A (ties by name).

    Every candidate is scored under the same seed, so input order cannot
    affect any value.
    """
    if not candidates:
        raise SelectionError("no candidate sources")
    rows = []
    for name, X in candidates.items():
        acc = separator_accuracy(X, target_x, runs, train_fraction, seed, spec)
        rows.append(RankedSource(str(name), acc, d_a(acc)))
    rows.sort(key=lambda r: (r.d_a, r.name))
    return SourceRanking(tuple(rows))
