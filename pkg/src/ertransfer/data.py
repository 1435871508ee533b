"""Relations, labeled pairs, token-overlap blocking and class/data imbalance samplers."""

from __future__ import annotations

import csv
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embeddings import tokenize
from .pairs import EncodedPairs

logger = logging.getLogger(__name__)

SeedLike = int | np.random.Generator | None


def _rng(seed: SeedLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


@dataclass
class DatasetHandle:
    name: str
    schema: list[str]
    id_attribute: str
    tuples: dict[str, dict[str, str | None]]

    def __post_init__(self):
        if not self.schema:
            raise ValueError(f"{self.name}: schema must not be empty")

    def __len__(self) -> int:
        return len(self.tuples)

    @property
    def ids(self) -> list[str]:
        return list(self.tuples)

    def tokens(self, tuple_id: str) -> list[str]:
        row = self.tuples[tuple_id]
        out: list[str] = []
        for attr in self.schema:
            value = row.get(attr)
            if value is not None:
                out.extend(tokenize(value))
        return out

    def token_streams(self) -> list[list[str]]:
        return [self.tokens(i) for i in self.tuples]


@dataclass
class CandidateSet:
    pairs: list[tuple[str, str]]
    block_config: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


@dataclass
class LabeledPairs:
    entries: list[tuple[str, str, int]]

    def __post_init__(self):
        seen = set()
        for left, right, label in self.entries:
            if label not in (0, 1):
                raise ValueError(f"label must be 0 or 1, got {label!r}")
            if (left, right) in seen:
                raise ValueError(f"duplicate labeled pair ({left}, {right})")
            seen.add((left, right))

    def __len__(self) -> int:
        return len(self.entries)

    def as_dict(self) -> dict[tuple[str, str], int]:
        return {(l, r): y for l, r, y in self.entries}


def load_dataset(path: str | Path, id_attribute: str, name: str | None = None) -> DatasetHandle:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: missing header row")
        if id_attribute not in reader.fieldnames:
            raise ValueError(f"{path}: id column {id_attribute!r} not in header")
        schema = [c for c in reader.fieldnames if c != id_attribute]
        tuples: dict[str, dict[str, str | None]] = {}
        for lineno, row in enumerate(reader, start=2):
            tid = row[id_attribute]
            if tid in tuples:
                raise ValueError(f"{path}:{lineno}: duplicate id {tid!r}")
            tuples[tid] = {a: (row.get(a) or None) for a in schema}
    return DatasetHandle(name or path.stem, schema, id_attribute, tuples)


def save_dataset(ds: DatasetHandle, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([ds.id_attribute] + ds.schema)
        for tid, row in ds.tuples.items():
            w.writerow([tid] + [row.get(a) or "" for a in ds.schema])


def load_labels(path: str | Path) -> LabeledPairs:
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"left_id", "right_id", "label"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            if row["label"] not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: label must be '0' or '1', got {row['label']!r}")
            entries.append((row["left_id"], row["right_id"], int(row["label"])))
    return LabeledPairs(entries)


def save_labels(labels: LabeledPairs, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["left_id", "right_id", "label"])
        w.writerows(labels.entries)


def stop_tokens(streams: Iterable[Sequence[str]], max_stop: int = 20) -> set[str]:
    """The most frequent corpus tokens, at most one tenth of the vocabulary."""
    counts = Counter(tok for s in streams for tok in s)
    k = min(max_stop, len(counts) // 10)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return {tok for tok, _ in ranked[:k]}


def block(left: DatasetHandle, right: DatasetHandle, min_shared_tokens: int = 1,
          max_stop_tokens: int = 20) -> CandidateSet:
    """Token-overlap blocking.

    A pair survives when the two token sets share at least
    ``min_shared_tokens`` tokens once stop tokens are removed. Pairs come out
    ordered by left tuple, then right tuple, in load order. When ``left`` is
    ``right`` only pairs (a, b) with a before b are produced.
    """
    if not len(left) or not len(right):
        raise ValueError("blocking needs two non-empty relations")
    same = left is right
    streams = left.token_streams() + ([] if same else right.token_streams())
    stops = stop_tokens(streams, max_stop_tokens)
    right_ids = right.ids
    index: dict[str, list[int]] = defaultdict(list)
    for j, rid in enumerate(right_ids):
        for tok in set(right.tokens(rid)) - stops:
            index[tok].append(j)
    pairs = []
    for i, lid in enumerate(left.ids):
        shared: Counter[int] = Counter()
        for tok in set(left.tokens(lid)) - stops:
            shared.update(index.get(tok, ()))
        for j in sorted(j for j, c in shared.items() if c >= min_shared_tokens):
            if same and j <= i:
                continue
            pairs.append((lid, right_ids[j]))
    cfg = {"min_shared_tokens": min_shared_tokens, "max_stop_tokens": max_stop_tokens,
           "stop_tokens": sorted(stops)}
    return CandidateSet(pairs, cfg)


def is_limited(n_labeled: int, n_candidates: int, threshold_fraction: float = 0.1) -> bool:
    """A labeled set under ``threshold_fraction`` of the candidate set is limited."""
    return n_labeled < threshold_fraction * n_candidates


def balanced_class_counts(n_pos: int, n_neg: int, budget: int, ratio: tuple[int, int] = (1, 3)) -> tuple[int, int]:
    """How many positives/negatives to keep for ``budget`` pairs at ``ratio``."""
    budget = min(budget, n_pos + n_neg)
    want_pos = budget * ratio[0] // (ratio[0] + ratio[1])
    want_neg = budget - want_pos
    if n_pos < want_pos:
        return n_pos, min(n_neg, budget - n_pos)
    if n_neg < want_neg:
        return min(n_pos, budget - n_neg), n_neg
    return want_pos, want_neg


def max_balanced_budget(n_pos: int, n_neg: int, ratio: tuple[int, int] = (1, 3)) -> int:
    """Largest budget whose 1:3 split is fully feasible; the whole pool if negatives are scarce."""
    if n_neg * ratio[0] <= n_pos * ratio[1]:
        return n_pos + n_neg
    return n_pos * (ratio[0] + ratio[1]) // ratio[0]


def undersample_indices(labels: np.ndarray, budget: int, ratio: tuple[int, int] = (1, 3),
                        seed: SeedLike = None) -> np.ndarray:
    labels = np.asarray(labels)
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    if not len(pos) or not len(neg):
        raise ValueError("undersampling needs both classes")
    if budget > len(pos) + len(neg):
        logger.warning("budget %d exceeds the %d available pairs; taking all", budget, len(pos) + len(neg))
    k_pos, k_neg = balanced_class_counts(len(pos), len(neg), budget, ratio)
    rng = _rng(seed)
    chosen = np.concatenate([rng.choice(pos, k_pos, replace=False), rng.choice(neg, k_neg, replace=False)])
    return np.sort(chosen)


def undersample_balanced(pairs: EncodedPairs, budget: int, ratio: tuple[int, int] = (1, 3),
                         seed: SeedLike = None) -> EncodedPairs:
    """Pick ``budget`` pairs at pos:neg = ``ratio``, uniformly within each class.

    If positives run short, all of them are kept and negatives fill the rest.
    """
    if budget < 4:
        raise ValueError("budget must be at least 4")
    return pairs.take(undersample_indices(pairs.labels, budget, ratio, seed))


def replicate_with_replacement(pairs: EncodedPairs, target_count: int, seed: SeedLike = None) -> EncodedPairs:
    if not len(pairs):
        raise ValueError("cannot replicate an empty pool")
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    idx = _rng(seed).integers(0, len(pairs), size=target_count)
    return pairs.take(idx)


def importance_indices(weights, n: int, seed: SeedLike = None) -> np.ndarray:
    """Sequential weighted draws without replacement, renormalising after each draw."""
    w = np.asarray(weights, dtype=np.float64).copy()
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    if w.sum() <= 0:
        raise ValueError("weights must not all be zero")
    if n < 1:
        raise ValueError("n must be >= 1")
    positive = int(np.count_nonzero(w))
    if n >= positive:
        if n > positive:
            logger.warning("requested %d draws but only %d pairs have positive weight", n, positive)
        return np.flatnonzero(w > 0)
    rng = _rng(seed)
    chosen = np.empty(n, dtype=np.int64)
    for k in range(n):
        cum = np.cumsum(w)
        j = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        j = min(j, len(w) - 1)
        while w[j] == 0:  # guards the float edge where u*total lands exactly on a boundary
            j -= 1
        chosen[k] = j
        w[j] = 0.0
    return np.sort(chosen)


def importance_sample(pairs: EncodedPairs, weights, n: int, seed: SeedLike = None) -> EncodedPairs:
    if len(weights) != len(pairs):
        raise ValueError("one weight per pair required")
    return pairs.take(importance_indices(weights, n, seed))
