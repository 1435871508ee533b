from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ertransfer.data import DatasetHandle
from ertransfer.embeddings import EmbeddingStore, FrequencyTable, estimate_frequencies, load_fixture_store
from ertransfer.encoder import (EncoderOptions, EncodingError, TupleDoc, TupleVector, encode_dataset, encode_simple,
                                encode_sif, remove_first_pc, similarity_vector, top_singular_direction,
                                tuple_to_document)
from ertransfer.synthetic import generate_text_relations


@pytest.fixture(scope="module")
def store():
    return load_fixture_store()


def doc(*tokens):
    return TupleDoc("t", tuple(tokens))


def test_document_concatenates_attributes():
    d = tuple_to_document({"title": "A relational model", "year": "1970"}, ["title", "year"])
    assert d.tokens == ("a", "relational", "model", "1970")
    assert tuple_to_document({"x": "Only This"}, ["x"]).tokens == ("only", "this")


def test_publication_tuple_tokens():
    t = {"title": "A relational model of data for large shared data banks", "authors": "Edgar Codd",
         "venue": "Communications of the ACM", "year": "1970"}
    d = tuple_to_document(t, ["title", "authors", "venue", "year"])
    expected = ("a relational model of data for large shared data banks edgar codd "
                "communications of the acm 1970").split()
    assert list(d.tokens) == expected


def test_null_attributes_skipped_and_all_null_rejected():
    assert tuple_to_document({"a": None, "b": "x"}, ["a", "b"]).tokens == ("x",)
    with pytest.raises(EncodingError):
        tuple_to_document({"a": None, "b": ""}, ["a", "b"], tuple_id="7")


def _toy():
    return EmbeddingStore(2, {"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0])})


def test_simple_average():
    np.testing.assert_array_equal(encode_simple(doc("a", "b"), _toy()).vec, [0.5, 0.5])
    np.testing.assert_array_equal(encode_simple(doc("b"), _toy()).vec, [0.0, 1.0])


def test_simple_matches_loop(store):
    words = store.words[10:15]
    acc = np.zeros(store.dim)
    for w in words:
        acc = acc + store.lookup(w)
    np.testing.assert_allclose(encode_simple(doc(*words), store).vec, acc / 5, rtol=0, atol=1e-15)


def test_sif_single_token_cases():
    s = _toy()
    zero = FrequencyTable({"b": 1}, 1)
    np.testing.assert_array_equal(encode_sif(doc("a"), s, zero).vec, [1.0, 0.0])
    a = 0.25
    # p(a) = a -> weight 1/2
    f = FrequencyTable({"a": 1, "b": 3}, 4)
    np.testing.assert_allclose(encode_sif(doc("a"), s, f, a=a).vec, [0.5, 0.0], rtol=0, atol=1e-15)


def _sif_line(entries, freqs, tokens, a):
    acc = np.zeros(len(next(iter(entries.values()))))
    for w in tokens:
        acc = acc + (a / (a + freqs.counts.get(w, 0) / freqs.total)) * entries[w]
    return acc / len(tokens)


def test_sif_mixed_frequencies(store):
    words = store.words
    toks = (words[0], words[1], words[0], words[2])
    freqs = FrequencyTable({words[0]: 5, words[1]: 1, words[9]: 4}, 10)
    entries = {w: store.lookup(w) for w in words}
    np.testing.assert_allclose(encode_sif(doc(*toks), store, freqs, a=0.1).vec,
                               _sif_line(entries, freqs, toks, 0.1), rtol=0, atol=1e-12)


def test_sif_uniform_frequency_is_scaled_simple(store):
    words = store.words[:6]
    freqs = FrequencyTable({w: 1 for w in words}, 6)
    a = 1e-2
    c = a / (a + 1 / 6)
    np.testing.assert_allclose(encode_sif(doc(*words), store, freqs, a).vec,
                               c * encode_simple(doc(*words), store).vec, rtol=1e-12)


def test_missing_token_raises():
    with pytest.raises(EncodingError, match="no vector"):
        encode_simple(doc("a", "zzz"), _toy())
    np.testing.assert_array_equal(encode_simple(doc("a", "zzz"), _toy(), skip_missing=True).vec, [1.0, 0.0])


def test_pc_removal_parallel_and_orthogonal():
    u = np.array([3.0, 4.0]) / 5
    par = [TupleVector(str(i), c * u) for i, c in enumerate([1.0, -2.0, 0.5])]
    for v in remove_first_pc(par):
        np.testing.assert_allclose(v.vec, 0.0, atol=1e-12)
    # rows spanning one direction: removing it leaves an orthogonal vector alone
    M = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 0.1]])
    out = remove_first_pc([TupleVector(str(i), r) for i, r in enumerate(M)])
    np.testing.assert_allclose(out[2].vec, [0.0, 0.0, 0.1], atol=1e-12)


def test_pc_removal_orthogonal_to_u():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((10, 16))
    u = top_singular_direction(M)
    out = remove_first_pc([TupleVector(str(i), r) for i, r in enumerate(M)])
    assert max(abs(v.vec @ u) for v in out) < 1e-9
    ref = np.linalg.svd(M)[2][0]
    assert abs(abs(ref @ u) - 1) < 1e-9
    assert u[np.argmax(np.abs(u))] > 0


def test_similarity_examples():
    a = TupleVector("l", np.array([1.0, 2.0]))
    b = TupleVector("r", np.array([0.0, 4.0]))
    np.testing.assert_array_equal(similarity_vector(a, b).x, [1.0, 2.0])
    np.testing.assert_array_equal(similarity_vector(a, a).x, [0.0, 0.0])


@settings(max_examples=20)
@given(arrays(np.float64, 5, elements=st.floats(-10, 10)), arrays(np.float64, 5, elements=st.floats(-10, 10)))
def test_similarity_symmetric_nonnegative(u, v):
    x = similarity_vector(TupleVector("a", u), TupleVector("b", v)).x
    np.testing.assert_array_equal(x, similarity_vector(TupleVector("b", v), TupleVector("a", u)).x)
    assert np.all(x >= 0)
    assert (not np.any(x)) == np.array_equal(u, v)


def _relation(rows, name="r"):
    return DatasetHandle(name, ["text"], "id", {str(i): {"text": t} for i, t in enumerate(rows)})


def test_encode_dataset_small(store):
    w = store.words
    left = _relation([f"{w[0]} {w[1]}", f"{w[0]} {w[1]}"])
    pairs = encode_dataset(left, None, [("0", "1")], store)
    assert len(pairs) == 1
    np.testing.assert_array_equal(pairs.X[0], np.zeros(store.dim))


def test_encode_dataset_matches_per_pair_recomputation(store):
    left, right, labels = generate_text_relations(20, seed=4)
    cands = [(l, r) for l in left.ids[:6] for r in right.ids[:5]]
    opts = EncoderOptions(sif=True)
    pairs = encode_dataset(left, right, cands, store, options=opts, labels=labels.as_dict())
    corpora = left.token_streams() + right.token_streams()
    freqs = estimate_frequencies(corpora)
    assert len(pairs) == 30
    for k, (l, r) in enumerate(cands):
        vl = encode_sif(tuple_to_document(left.tuples[l], left.schema, l), store, freqs).vec
        vr = encode_sif(tuple_to_document(right.tuples[r], right.schema, r), store, freqs).vec
        np.testing.assert_allclose(pairs.X[k], np.abs(vl - vr), rtol=0, atol=1e-15)
        assert pairs.labels[k] == labels.as_dict()[(l, r)]


def test_encoding_is_deterministic():
    a = encode_dataset(*generate_text_relations(15, seed=2)[:2], [("a0", "b0"), ("a1", "b3")], load_fixture_store())
    b = encode_dataset(*generate_text_relations(15, seed=2)[:2], [("a0", "b0"), ("a1", "b3")], load_fixture_store())
    assert a.X.tobytes() == b.X.tobytes()


def test_duplicates_closer_than_non_duplicates(store):
    left, right, labels = generate_text_relations(30, seed=0)
    d = labels.as_dict()
    pairs = encode_dataset(left, right, list(d), store, options=EncoderOptions(sif=False), labels=d)
    norms = np.linalg.norm(pairs.X, axis=1)
    assert norms[pairs.labels == 1].mean() < norms[pairs.labels == 0].mean()
