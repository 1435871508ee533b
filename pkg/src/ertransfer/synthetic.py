"""Synthetic source/target pair pools with controlled distribution shift.

Vectors are drawn directly in similarity-vector space: each feature is
|N(mean, noise)|, and on signal features duplicates sit low and
non-duplicates high. Two regimes exist. Regime A carries the signal on the
first ``n_informative`` features, and regime B carries it on the next
``n_informative``. Regime B also raises the mean of the last feature, which
marks it as a context feature.
Shift knobs:
  prior        target_dup_rate differs from dup_rate
  covariate    regime shares differ between source and target; mean_offset
  conditional  ``flip`` swaps duplicate/non-duplicate means on chosen features in the target
  selection    selection_bias over-draws easy (far-from-boundary) source pairs
A small text mode builds two relations of publication-like tuples over the
bundled fixture vocabulary, for exercising the full encoder path.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import DatasetHandle, LabeledPairs, importance_indices
from .pairs import EncodedPairs

BASE_MEAN = 0.6
CONTEXT_SHIFT = 1.2


class ShiftSpecError(ValueError):
    pass


@dataclass(frozen=True)
class ShiftSpec:
    n_source: int = 1000
    n_target: int = 1000
    dim: int = 16
    dup_rate: float = 0.25
    target_dup_rate: float | None = None
    n_informative: int = 6
    separation: float = 0.6
    noise: float = 0.35
    mean_offset: float | tuple[float, ...] = 0.0
    flip: tuple[int, ...] = ()
    source_regime_b: float = 0.0
    target_regime_b: float = 0.0
    selection_bias: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("dup_rate", "target_dup_rate"):
            v = getattr(self, name)
            if v is not None and not 0.0 < v < 1.0:
                raise ShiftSpecError(f"{name} must lie in (0, 1)")
        if min(self.n_source, self.n_target) < 20:
            raise ShiftSpecError("pool sizes must be at least 20")
        if self.dim < 2 * self.n_informative + 1:
            raise ShiftSpecError("dim must hold two signal blocks plus the context feature")
        for name in ("source_regime_b", "target_regime_b"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ShiftSpecError(f"{name} must lie in [0, 1]")
        if self.noise <= 0 or self.selection_bias < 0:
            raise ShiftSpecError("noise must be positive and selection_bias non-negative")
        if isinstance(self.mean_offset, tuple) and len(self.mean_offset) != self.dim:
            raise ShiftSpecError("per-feature mean_offset must have dim entries")
        if any(not 0 <= j < self.dim for j in self.flip):
            raise ShiftSpecError("flip indices out of range")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["flip"] = list(self.flip)
        if isinstance(self.mean_offset, tuple):
            d["mean_offset"] = list(self.mean_offset)
        return d


@dataclass(frozen=True)
class SyntheticPools:
    """Labeled source and target pools; target labels are the ground truth."""

    source: EncodedPairs
    target: EncodedPairs
    spec: ShiftSpec = field(repr=False)

    def target_split(self, labeled_fraction: float, unlabeled_fraction: float = 0.0, seed: int = 0):
        """Disjoint (labeled, unlabeled-with-labels-stripped, test) parts of the target pool.

        The labeled part is stratified by class so that both classes appear.
        """
        return split_pool(self.target, labeled_fraction, unlabeled_fraction, seed)


def split_pool(pool: EncodedPairs, labeled_fraction: float, unlabeled_fraction: float = 0.0, seed: int = 0):
    if not 0.0 <= labeled_fraction < 1.0 or not 0.0 <= unlabeled_fraction < 1.0:
        raise ShiftSpecError("fractions must lie in [0, 1)")
    if labeled_fraction + unlabeled_fraction >= 1.0:
        raise ShiftSpecError("labeled and unlabeled fractions leave no test pairs")
    rng = np.random.default_rng(seed)
    n = len(pool)
    lab = []
    for c in (1, 0):
        members = np.flatnonzero(pool.labels == c)
        k = int(round(labeled_fraction * len(members)))
        if labeled_fraction > 0:
            k = max(k, 1)
        lab.append(rng.choice(members, size=k, replace=False))
    lab_idx = np.sort(np.concatenate(lab))
    rest = rng.permutation(np.setdiff1d(np.arange(n), lab_idx))
    n_unl = int(round(unlabeled_fraction * n))
    unl_idx = np.sort(rest[:n_unl])
    test_idx = np.sort(rest[n_unl:])
    return pool.take(lab_idx), pool.take(unl_idx).without_labels(), pool.take(test_idx)


def _exact_labels(n: int, rate: float, rng: np.random.Generator) -> np.ndarray:
    n_pos = int(round(rate * n))
    return rng.permutation(np.r_[np.ones(n_pos, dtype=np.int64), np.zeros(n - n_pos, dtype=np.int64)])


def _means(spec: ShiftSpec, y: np.ndarray, regime_b: np.ndarray, flip: tuple[int, ...]) -> np.ndarray:
    k = spec.n_informative
    M = np.full((len(y), spec.dim), BASE_MEAN)
    half = spec.separation / 2.0
    signed = np.where(y == 1, -half, half)
    for j in range(k):
        M[~regime_b, j] += signed[~regime_b]
        M[regime_b, k + j] += signed[regime_b]
    for j in flip:
        # conditional shift: duplicates move to the high side and vice versa
        M[:, j] = 2 * BASE_MEAN - M[:, j]
    M[regime_b, spec.dim - 1] += CONTEXT_SHIFT
    return M


def _easiness(spec: ShiftSpec, X: np.ndarray, regime_b: np.ndarray) -> np.ndarray:
    k = spec.n_informative
    sig = np.where(regime_b[:, None], X[:, k:2 * k], X[:, :k]).mean(axis=1)
    return np.abs(sig - BASE_MEAN) / spec.noise


def draw_pool(spec: ShiftSpec, n: int, dup_rate: float, share_b: float, rng: np.random.Generator,
              flip: tuple[int, ...] = (), offset=0.0, selection_bias: float = 0.0, origin: str = "") -> EncodedPairs:
    """``n`` similarity vectors with exactly round(dup_rate n) duplicates."""
    y = _exact_labels(n, dup_rate, rng)
    if selection_bias > 0:
        # over-draw 4x per class, then keep easy pairs preferentially
        keep_X, keep_y = [], []
        for c in (1, 0):
            n_c = int(np.sum(y == c))
            if n_c == 0:
                continue
            yc = np.full(4 * n_c, c)
            rb = rng.random(4 * n_c) < share_b
            Xc = np.abs(_means(spec, yc, rb, flip) + offset + spec.noise * rng.standard_normal((4 * n_c, spec.dim)))
            e = _easiness(spec, Xc, rb)
            idx = importance_indices(np.exp(selection_bias * (e - e.max())), n_c, rng)
            keep_X.append(Xc[idx])
            keep_y.append(yc[idx])
        X, y = np.vstack(keep_X), np.concatenate(keep_y)
        perm = rng.permutation(n)
        X, y = X[perm], y[perm]
    else:
        rb = rng.random(n) < share_b
        X = np.abs(_means(spec, y, rb, flip) + offset + spec.noise * rng.standard_normal((n, spec.dim)))
    ids = [f"{origin}{i}" for i in range(n)]
    return EncodedPairs(X, [f"l{i}" for i in ids], [f"r{i}" for i in ids], y, None, origin or "synthetic")


def generate_synthetic(spec: ShiftSpec) -> SyntheticPools:
    """Source and target pools under ``spec``; each pool has its own seeded stream."""
    offset = np.asarray(spec.mean_offset, dtype=np.float64)
    src = draw_pool(spec, spec.n_source, spec.dup_rate, spec.source_regime_b, np.random.default_rng([spec.seed, 0]),
                    selection_bias=spec.selection_bias, origin="source")
    tgt_rate = spec.dup_rate if spec.target_dup_rate is None else spec.target_dup_rate
    tgt = draw_pool(spec, spec.n_target, tgt_rate, spec.target_regime_b, np.random.default_rng([spec.seed, 1]),
                    flip=spec.flip, offset=offset, origin="target")
    return SyntheticPools(src, tgt, spec)


# Named generators used by the experiments.

def same_distribution(seed: int = 0, **kw) -> ShiftSpec:
    return ShiftSpec(seed=seed, **kw)


def covariate_shift(seed: int = 0, **kw) -> ShiftSpec:
    """Source mostly regime B, target only regime A; P(y | x, regime) is shared."""
    base = dict(n_source=1000, n_target=1000, source_regime_b=0.7, target_regime_b=0.0)
    base.update(kw)
    return ShiftSpec(seed=seed, **base)


def conflicting_features(seed: int = 0, **kw) -> ShiftSpec:
    """A quarter of many weak signal features reverse direction in the target."""
    base = dict(n_source=2000, n_target=1000, dim=96, n_informative=24, noise=0.8, separation=0.5,
                flip=tuple(range(18, 24)))
    base.update(kw)
    return ShiftSpec(seed=seed, **base)


def adversarial(seed: int = 0, **kw) -> ShiftSpec:
    """Every signal feature reverses in the target, plus a mean offset."""
    base = dict(n_source=1000, n_target=1000, flip=tuple(range(6)), mean_offset=0.5)
    base.update(kw)
    return ShiftSpec(seed=seed, **base)


def disjoint_support(seed: int = 0, **kw) -> ShiftSpec:
    base = dict(n_source=500, n_target=500, mean_offset=5.0)
    base.update(kw)
    return ShiftSpec(seed=seed, **base)


GENERATORS = {"same": same_distribution, "covariate": covariate_shift, "conflicting": conflicting_features,
              "adversarial": adversarial, "disjoint": disjoint_support}


def named_spec(name: str, seed: int = 0, **kw) -> ShiftSpec:
    try:
        return GENERATORS[name](seed, **kw)
    except KeyError:
        raise ShiftSpecError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None


def with_seed(spec: ShiftSpec, seed: int) -> ShiftSpec:
    return replace(spec, seed=seed)


# ---------------------------------------------------------------- text mode

TITLE_WORDS = ("data database relational model query processing system large scale shared entity resolution "
               "record linkage matching duplicate detection cleaning integration schema mapping transfer "
               "adaptation domain classifier feature vector representation embedding semantic similarity index "
               "search retrieval knowledge graph mining pattern stream distributed parallel efficient fast "
               "scalable approximate optimization algorithm theory management storage memory cache transaction "
               "concurrency control recovery logging view join aggregation").split()
NAMES = "john david michael maria anna peter paul smith jones lee wang zhang kumar garcia edgar codd".split()
VENUES = ("vldb", "sigmod", "icde", "communications acm", "transactions database systems",
          "international conference data engineering", "workshop data management")
YEARS = ("1970", "1995", "2001", "2008", "2012", "2015", "2016", "2017", "2018", "2019")
SCHEMA = ("title", "authors", "venue", "year")


def _publication(rng: np.random.Generator) -> dict[str, str]:
    title = " ".join(rng.choice(TITLE_WORDS, size=int(rng.integers(4, 8)), replace=False))
    authors = " ".join(rng.choice(NAMES, size=2, replace=False))
    return {"title": title, "authors": authors, "venue": str(rng.choice(VENUES)), "year": str(rng.choice(YEARS))}


def _perturb(t: dict[str, str], rng: np.random.Generator) -> dict[str, str]:
    out = dict(t)
    words = out["title"].split()
    action = int(rng.integers(3))
    if action == 0 and len(words) > 3:
        del words[int(rng.integers(len(words)))]
    elif action == 1:
        words[int(rng.integers(len(words)))] = str(rng.choice(TITLE_WORDS))
    else:
        # an unseen spelling variant, resolved through its context
        i = int(rng.integers(len(words)))
        words[i] = words[i] + "s"
    out["title"] = " ".join(words)
    if rng.random() < 0.3:
        out["year"] = None
    return out


def generate_text_relations(n_entities: int = 30, dup_fraction: float = 0.5, seed: int = 0,
                            prefix: str = "") -> tuple[DatasetHandle, DatasetHandle, LabeledPairs]:
    """Two relations over the fixture vocabulary; right holds perturbed copies of some left tuples.

    The truth labels every (left, right) combination, so any candidate set can be labeled.
    """
    rng = np.random.default_rng(seed)
    left, right, dup_of = {}, {}, {}
    for i in range(n_entities):
        left[f"{prefix}a{i}"] = _publication(rng)
    for i in range(n_entities):
        rid = f"{prefix}b{i}"
        if rng.random() < dup_fraction:
            src = f"{prefix}a{i}"
            right[rid] = _perturb(left[src], rng)
            dup_of[rid] = src
        else:
            right[rid] = _publication(rng)
    entries = [(l, r, int(dup_of.get(r) == l)) for l in left for r in right]
    return (DatasetHandle(f"{prefix}left", list(SCHEMA), "id", left),
            DatasetHandle(f"{prefix}right", list(SCHEMA), "id", right), LabeledPairs(entries))
