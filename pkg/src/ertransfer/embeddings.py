"""Pre-trained word vectors, corpus frequencies and context-based OOV inference."""

from __future__ import annotations

import logging
import re
import threading
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class EmbeddingParseError(ValueError):
    pass


class UnresolvableWordError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace, punctuation and underscores."""
    return _TOKEN_RE.findall(str(text).lower())


def normalize_token(word: str) -> str:
    toks = tokenize(word)
    return toks[0] if len(toks) == 1 else str(word).lower()


class EmbeddingStore:
    """Word -> float64 vector map of fixed dimension.

    Vectors inferred for out-of-vocabulary words are kept in a separate
    cache so the loaded vocabulary stays distinguishable from inferred
    entries. The cache is guarded by a lock; readers never see a partial
    insert.
    """

    def __init__(self, dim: int, entries: dict[str, np.ndarray], source_label: str = "",
                 duplicate_count: int = 0):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = int(dim)
        self.source_label = source_label
        self.duplicate_count = duplicate_count
        self._entries: dict[str, np.ndarray] = {}
        for word, vec in entries.items():
            v = np.asarray(vec, dtype=np.float64)
            if not word:
                raise ValueError("empty word")
            if v.shape != (self.dim,):
                raise ValueError(f"vector for {word!r} has shape {v.shape}, expected ({self.dim},)")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"non-finite component in vector for {word!r}")
            v.setflags(write=False)
            self._entries[word] = v
        self._inferred: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, word: str) -> bool:
        return word in self._entries

    @property
    def words(self) -> list[str]:
        return list(self._entries)

    @property
    def inferred(self) -> dict[str, np.ndarray]:
        return dict(self._inferred)

    def lookup(self, word: str) -> np.ndarray | None:
        """Stored (or previously inferred) vector for ``word``, or None."""
        key = word if word in self._entries else normalize_token(word)
        vec = self._entries.get(key)
        if vec is None:
            vec = self._inferred.get(key)
        return vec

    def known(self, word: str) -> bool:
        return word in self._entries

    def cache_inferred(self, word: str, vec: np.ndarray) -> np.ndarray:
        v = np.asarray(vec, dtype=np.float64).copy()
        v.setflags(write=False)
        with self._lock:
            # first insert wins so repeated inference can never change a vector
            return self._inferred.setdefault(word, v)

    def save(self, path: str | Path, header: bool = True) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(f"{len(self._entries)} {self.dim}\n")
            for word, vec in self._entries.items():
                fh.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def lookup(store: EmbeddingStore, word: str) -> np.ndarray | None:
    return store.lookup(word)


def load_embeddings(path: str | Path, expected_dim: int | None = None) -> EmbeddingStore:
    """Parse a word2vec/GloVe style text file.

    An optional first line ``<vocab> <dim>`` is accepted. Duplicate words are
    resolved last-wins and counted in ``store.duplicate_count``.
    """
    path = Path(path)
    entries: dict[str, np.ndarray] = {}
    dim = expected_dim
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.rstrip("\n").split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                header_dim = int(parts[1])
                if expected_dim is not None and header_dim != expected_dim:
                    raise EmbeddingParseError(
                        f"line 1: header dim {header_dim} != expected {expected_dim}")
                dim = header_dim
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim:
                raise EmbeddingParseError(
                    f"line {lineno}: expected {dim} components, got {len(values)}")
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingParseError(f"line {lineno}: {exc}") from None
            if not np.all(np.isfinite(vec)):
                raise EmbeddingParseError(f"line {lineno}: non-finite component")
            word = word.lower()
            if word in entries:
                duplicates += 1
            entries[word] = vec
    if not entries or not dim:
        raise EmbeddingParseError("no embedding rows")
    if duplicates:
        logger.warning("%s: %d duplicate words (last occurrence kept)", path, duplicates)
    return EmbeddingStore(dim, entries, source_label=str(path), duplicate_count=duplicates)


def fixture_store_path() -> Path:
    return Path(__file__).parent / "data" / "fixture_embeddings.txt"


def load_fixture_store() -> EmbeddingStore:
    """The small bundled store (d=16) used by tests and the text-mode generator."""
    return load_embeddings(fixture_store_path())


@dataclass(frozen=True)
class FrequencyTable:
    counts: dict[str, int]
    total: int

    def __post_init__(self):
        if self.total <= 0:
            raise ValueError("total must be positive")
        if sum(self.counts.values()) != self.total:
            raise ValueError("total must equal the sum of counts")

    def p(self, word: str) -> float:
        return self.counts.get(word, 0) / self.total

    def p_exact(self, word: str) -> Fraction:
        return Fraction(self.counts.get(word, 0), self.total)

    def count(self, word: str) -> int:
        return self.counts.get(word, 0)


def estimate_frequencies(corpora: Iterable[Sequence[str]]) -> FrequencyTable:
    counts: Counter[str] = Counter()
    for stream in corpora:
        counts.update(stream)
    total = sum(counts.values())
    if total == 0:
        raise ValueError("cannot estimate frequencies from empty corpora")
    return FrequencyTable(dict(counts), total)


@dataclass
class ContextSet:
    word: str
    contexts: list[list[str]] = field(default_factory=list)
    window_k: int = 5


def collect_contexts(corpora: Iterable[Sequence[str]], word: str, k: int = 5) -> ContextSet:
    """One window per occurrence of ``word``: up to k tokens on each side.

    Each stream is treated as an independent sentence, so windows never
    cross stream boundaries.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ctx = ContextSet(word=word, window_k=k)
    for stream in corpora:
        stream = list(stream)
        for i, tok in enumerate(stream):
            if tok == word:
                ctx.contexts.append(stream[max(0, i - k):i] + stream[i + 1:i + 1 + k])
    return ctx


def infer_oov(store: EmbeddingStore, ctx: ContextSet) -> np.ndarray:
    """Mean over context windows of the mean of the known word vectors.

    Only vectors loaded into the store count as known; windows without a
    single known token are dropped and do not enter the outer average.
    """
    window_means = []
    for window in ctx.contexts:
        known = [store._entries[w] for w in window if w in store._entries]
        if known:
            window_means.append(np.mean(known, axis=0))
    if not window_means:
        raise UnresolvableWordError(f"OOV word has no resolvable context: {ctx.word!r}")
    return np.mean(window_means, axis=0)


def contexts_index(corpora: Sequence[Sequence[str]], words: set[str], k: int = 5) -> dict[str, ContextSet]:
    """collect_contexts for many words in a single pass over the corpora."""
    out = {w: ContextSet(word=w, window_k=k) for w in words}
    for stream in corpora:
        stream = list(stream)
        for i, tok in enumerate(stream):
            if tok in out:
                out[tok].contexts.append(stream[max(0, i - k):i] + stream[i + 1:i + 1 + k])
    return out


def resolve_vocabulary(store: EmbeddingStore, corpora: Sequence[Sequence[str]], k: int = 5,
                       strict: bool = True) -> list[str]:
    """Infer and cache vectors for every OOV token of ``corpora``.

    Returns the words that could not be resolved. With ``strict`` an
    unresolvable word raises instead.
    """
    vocab = {tok for stream in corpora for tok in stream}
    missing = {w for w in vocab if not store.known(w) and w not in store._inferred}
    unresolved = []
    for word, ctx in sorted(contexts_index(corpora, missing, k).items()):
        try:
            store.cache_inferred(word, infer_oov(store, ctx))
        except UnresolvableWordError:
            if strict:
                raise
            unresolved.append(word)
    return unresolved
