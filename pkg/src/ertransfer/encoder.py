"""Tuple -> vector composition and pairwise similarity vectors.

A tuple is flattened into one token sentence (attribute boundaries dropped),
composed into a d-dimensional vector by plain or SIF-weighted averaging of
word vectors, and a candidate pair becomes the elementwise absolute
difference of its two tuple vectors.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import CandidateSet, DatasetHandle
from .embeddings import EmbeddingStore, FrequencyTable, estimate_frequencies, resolve_vocabulary, tokenize
from .pairs import EncodedPair, EncodedPairs


class EncodingError(ValueError):
    def __init__(self, message: str, tuple_id=None):
        super().__init__(message if tuple_id is None else f"tuple {tuple_id}: {message}")
        self.tuple_id = tuple_id


@dataclass(frozen=True)
class TupleDoc:
    tuple_id: str
    tokens: tuple[str, ...]
    origin: str = ""


@dataclass(frozen=True)
class TupleVector:
    tuple_id: str
    vec: np.ndarray


@dataclass(frozen=True)
class EncoderOptions:
    sif: bool = True
    sif_a: float = 1e-4
    remove_pc: bool = False
    context_k: int = 5
    # drop tokens whose OOV inference fails instead of raising
    skip_unresolvable: bool = False


def tuple_to_document(raw_tuple: Mapping[str, str | None], schema: Sequence[str], tuple_id=None,
                      origin: str = "") -> TupleDoc:
    tokens: list[str] = []
    for attr in schema:
        value = raw_tuple.get(attr)
        if value is None or value == "":
            continue
        tokens.extend(tokenize(value))
    if not tokens:
        raise EncodingError("all attributes are null or empty", tuple_id)
    return TupleDoc(str(tuple_id), tuple(tokens), origin)


def _token_matrix(doc: TupleDoc, store: EmbeddingStore, skip_missing: bool = False) -> tuple[list[str], np.ndarray]:
    words, rows = [], []
    for tok in doc.tokens:
        vec = store.lookup(tok)
        if vec is None:
            if skip_missing:
                continue
            raise EncodingError(f"token {tok!r} has no vector", doc.tuple_id)
        words.append(tok)
        rows.append(vec)
    if not rows:
        raise EncodingError("no resolvable tokens", doc.tuple_id)
    return words, np.vstack(rows)


def encode_simple(doc: TupleDoc, store: EmbeddingStore, skip_missing: bool = False) -> TupleVector:
    _, M = _token_matrix(doc, store, skip_missing)
    return TupleVector(doc.tuple_id, M.mean(axis=0))


def sif_weights(words: Sequence[str], freqs: FrequencyTable, a: float = 1e-4) -> np.ndarray:
    p = np.array([freqs.p(w) for w in words], dtype=np.float64)
    return a / (a + p)


def encode_sif(doc: TupleDoc, store: EmbeddingStore, freqs: FrequencyTable, a: float = 1e-4,
               skip_missing: bool = False) -> TupleVector:
    """(1/|t|) * sum_w a/(a + p(w)) * v(w); words missing from ``freqs`` get p(w) = 0."""
    if a <= 0:
        raise ValueError("SIF parameter a must be positive")
    words, M = _token_matrix(doc, store, skip_missing)
    w = sif_weights(words, freqs, a)
    return TupleVector(doc.tuple_id, (w @ M) / len(words))


def top_singular_direction(M: np.ndarray, max_iter: int = 100, tol: float = 1e-10, seed: int = 0) -> np.ndarray | None:
    """Unit top right-singular vector of ``M`` by power iteration on M^T M.

    Sign is fixed so that the largest-magnitude component is positive.
    Returns None for an all-zero matrix.
    """
    G = M.T @ M
    if not np.any(G):
        return None
    u = np.random.default_rng(seed).standard_normal(G.shape[0])
    u /= np.linalg.norm(u)
    for _ in range(max_iter):
        nxt = G @ u
        norm = np.linalg.norm(nxt)
        if norm == 0:
            # start vector orthogonal to the row space; fall back to a basis vector
            nxt = G[:, int(np.argmax(np.abs(G).sum(axis=0)))]
            norm = np.linalg.norm(nxt)
        nxt = nxt / norm
        change = np.linalg.norm(nxt - u)
        u = nxt
        if change < tol:
            break
    if u[int(np.argmax(np.abs(u)))] < 0:
        u = -u
    return u


def remove_first_pc(vectors: Sequence[TupleVector], seed: int = 0) -> list[TupleVector]:
    if len(vectors) < 2:
        raise ValueError("need at least two vectors")
    M = np.vstack([v.vec for v in vectors])
    u = top_singular_direction(M, seed=seed)
    if u is None:
        return list(vectors)
    out = M - np.outer(M @ u, u)
    return [TupleVector(v.tuple_id, out[i]) for i, v in enumerate(vectors)]


def similarity_vector(left: TupleVector, right: TupleVector, origin: str = "") -> EncodedPair:
    if left.vec.shape != right.vec.shape:
        raise ValueError(f"dimension mismatch: {left.vec.shape} vs {right.vec.shape}")
    return EncodedPair(left.tuple_id, right.tuple_id, np.abs(left.vec - right.vec), None, 1.0, origin)


def encode_tuples(datasets: Sequence[DatasetHandle], ids_by_dataset: Sequence[Sequence[str]], store: EmbeddingStore,
                  freqs: FrequencyTable | None, options: EncoderOptions) -> list[dict[str, np.ndarray]]:
    """Vectors for the requested tuples of each relation (PC removal over all of them jointly)."""
    vectors: list[TupleVector] = []
    spans = []
    for ds, ids in zip(datasets, ids_by_dataset):
        start = len(vectors)
        for tid in ids:
            try:
                doc = tuple_to_document(ds.tuples[tid], ds.schema, tid, ds.name)
                if options.sif:
                    tv = encode_sif(doc, store, freqs, options.sif_a, options.skip_unresolvable)
                else:
                    tv = encode_simple(doc, store, options.skip_unresolvable)
            except KeyError:
                raise EncodingError("unknown tuple id", tid) from None
            vectors.append(tv)
        spans.append((start, len(vectors)))
    if options.remove_pc and len(vectors) >= 2:
        vectors = remove_first_pc(vectors)
    return [{v.tuple_id: v.vec for v in vectors[a:b]} for a, b in spans]


def encode_dataset(left: DatasetHandle, right: DatasetHandle | None, candidates: CandidateSet | Sequence[tuple[str, str]],
                   store: EmbeddingStore, freqs: FrequencyTable | None = None, options: EncoderOptions | None = None,
                   labels: Mapping[tuple[str, str], int] | None = None,
                   corpora: Sequence[Sequence[str]] | None = None, origin: str | None = None) -> EncodedPairs:
    """Encode every candidate pair of ``left`` x ``right`` into a similarity vector.

    OOV tokens get vectors inferred from their contexts in ``corpora``
    (default: the token streams of both relations) and SIF frequencies default
    to the same pooled corpora. Output order equals candidate order.
    """
    options = options or EncoderOptions()
    right = left if right is None else right
    pairs = list(candidates.pairs if isinstance(candidates, CandidateSet) else candidates)
    if corpora is None:
        corpora = left.token_streams() + ([] if right is left else right.token_streams())
    resolve_vocabulary(store, corpora, options.context_k, strict=not options.skip_unresolvable)
    if options.sif and freqs is None:
        freqs = estimate_frequencies(corpora)
    left_ids = list(dict.fromkeys(l for l, _ in pairs))
    right_ids = list(dict.fromkeys(r for _, r in pairs))
    if right is left:
        ids = list(dict.fromkeys(left_ids + right_ids))
        (lv,) = encode_tuples([left], [ids], store, freqs, options)
        rv = lv
    else:
        lv, rv = encode_tuples([left, right], [left_ids, right_ids], store, freqs, options)
    name = origin if origin is not None else (left.name if right is left else f"{left.name}-{right.name}")
    X = np.empty((len(pairs), store.dim))
    for k, (l, r) in enumerate(pairs):
        X[k] = np.abs(lv[l] - rv[r])
    y = None if labels is None else [labels.get((l, r)) for l, r in pairs]
    return EncodedPairs(X, [l for l, _ in pairs], [r for _, r in pairs], y, None, name)


def options_dict(options: EncoderOptions) -> dict:
    return asdict(options)
