from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ertransfer.embeddings import (EmbeddingParseError, EmbeddingStore, UnresolvableWordError, collect_contexts,
                                   estimate_frequencies, infer_oov, load_embeddings, load_fixture_store, lookup,
                                   resolve_vocabulary, tokenize)
from ertransfer.data import load_dataset

words = st.sampled_from(list("abcdefgh"))
streams = st.lists(st.lists(words, max_size=12), min_size=1, max_size=6)


@pytest.fixture
def cat_dog(tmp_path):
    p = tmp_path / "vec.txt"
    p.write_text("cat 1.0 0.0\ndog 0.0 1.0\n")
    return load_embeddings(p)


def test_two_row_file(cat_dog):
    assert cat_dog.dim == 2 and len(cat_dog) == 2


def test_empty_file_rejected(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("")
    with pytest.raises(EmbeddingParseError, match="no embedding rows"):
        load_embeddings(p)


def test_header_line_sets_dim(tmp_path):
    p = tmp_path / "h.txt"
    p.write_text("2 3\na 1 2 3\nb 4 5 6\n")
    store = load_embeddings(p)
    assert store.dim == 3
    np.testing.assert_array_equal(store.lookup("b"), [4.0, 5.0, 6.0])
    out = tmp_path / "round.txt"
    store.save(out)
    again = load_embeddings(out)
    assert again.dim == 3 and again.words == store.words


def test_ragged_row_and_dim_mismatch(tmp_path):
    p = tmp_path / "r.txt"
    p.write_text("a 1 2\nb 1\n")
    with pytest.raises(EmbeddingParseError, match="line 2"):
        load_embeddings(p)
    q = tmp_path / "q.txt"
    q.write_text("2 3\na 1 2 3\n")
    with pytest.raises(EmbeddingParseError):
        load_embeddings(q, expected_dim=4)


def test_lookup(cat_dog):
    np.testing.assert_array_equal(lookup(cat_dog, "cat"), [1.0, 0.0])
    assert lookup(cat_dog, "bird") is None
    np.testing.assert_array_equal(lookup(cat_dog, "CAT"), [1.0, 0.0])
    np.testing.assert_array_equal(lookup(cat_dog, tokenize("CAT!")[0]), [1.0, 0.0])


def test_duplicate_words_last_wins(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("a 1 0\na 0 1\n")
    store = load_embeddings(p)
    assert store.duplicate_count == 1
    np.testing.assert_array_equal(store.lookup("a"), [0.0, 1.0])


def test_tokenize():
    assert tokenize("A relational_model, of DATA!") == ["a", "relational", "model", "of", "data"]
    assert tokenize("  ") == []


def test_frequencies_small():
    f = estimate_frequencies([["a", "a", "b", "c"]])
    assert f.total == 4 and f.p("a") == 0.5 and f.p("b") == 0.25
    assert estimate_frequencies([["a"], ["a"]]).p("a") == 1.0


def test_frequencies_match_hand_count(tmp_path):
    (tmp_path / "l.csv").write_text("id,name,city\n1,Blue Cafe,Paris\n2,Red cafe,paris\n")
    (tmp_path / "r.csv").write_text("id,name,city\n9,Blue Bar,Rome\n")
    left = load_dataset(tmp_path / "l.csv", "id")
    right = load_dataset(tmp_path / "r.csv", "id")
    f = estimate_frequencies(left.token_streams() + right.token_streams())
    # blue cafe paris red cafe paris blue bar rome
    assert f.counts == {"blue": 2, "cafe": 2, "paris": 2, "red": 1, "bar": 1, "rome": 1}
    assert f.total == 9


@given(streams)
def test_frequencies_sum_to_one_exactly(s):
    if not any(s):
        return
    f = estimate_frequencies(s)
    assert sum(f.p_exact(w) for w in f.counts) == Fraction(1)


def test_contexts_examples():
    assert collect_contexts([["x", "w", "y"]], "w").contexts == [["x", "y"]]
    assert collect_contexts([["w"]], "w").contexts == [[]]
    stream = [f"t{i}" for i in range(20)]
    stream[3] = stream[15] = "w"
    ctx = collect_contexts([stream], "w", k=2)
    assert ctx.contexts == [["t1", "t2", "t4", "t5"], ["t13", "t14", "t16", "t17"]]


def test_contexts_do_not_cross_streams():
    ctx = collect_contexts([["a", "b"], ["w", "c"]], "w", k=5)
    assert ctx.contexts == [["c"]]


@given(streams, words)
def test_window_count_equals_occurrences(s, w):
    assert len(collect_contexts(s, w, 3).contexts) == sum(x.count(w) for x in s)


def _store2():
    return EmbeddingStore(2, {"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0]), "z": np.array([0.0, 0.0])})


def test_infer_oov_examples():
    store = _store2()
    np.testing.assert_array_equal(infer_oov(store, collect_contexts([["a", "w", "b"]], "w")), [0.5, 0.5])
    ctx = collect_contexts([["a", "w"], ["w", "z"]], "w")
    np.testing.assert_array_equal(infer_oov(store, ctx), [0.5, 0.0])


def _brute_oov(entries: dict, corpora, word, k):
    # straight-line mean over windows of mean known vectors
    sums = None
    used = 0
    for stream in corpora:
        for i in range(len(stream)):
            if stream[i] != word:
                continue
            acc, cnt = None, 0
            for j in range(max(0, i - k), min(len(stream), i + k + 1)):
                if j == i or stream[j] not in entries:
                    continue
                v = entries[stream[j]]
                acc = v.copy() if acc is None else acc + v
                cnt += 1
            if cnt:
                m = acc / cnt
                sums = m if sums is None else sums + m
                used += 1
    return sums / used


def test_infer_oov_matches_brute_force_on_fixture():
    store = load_fixture_store()
    known = store.words
    corpora = [[known[3], "qqq", known[7], "zzz", known[11]],
               ["zzz", "qqq", known[20]],
               [known[1], known[2], "qqq", "nope", known[5], known[6], known[8], known[9]]]
    entries = {w: store.lookup(w) for w in known}
    got = infer_oov(store, collect_contexts(corpora, "qqq", 5))
    np.testing.assert_allclose(got, _brute_oov(entries, corpora, "qqq", 5), rtol=0, atol=1e-12)


@settings(max_examples=50)
@given(st.lists(st.lists(st.sampled_from(["a", "b", "z", "w", "u"]), min_size=1, max_size=8), min_size=1, max_size=5))
def test_oov_inside_bounding_box(corpora):
    store = _store2()
    ctx = collect_contexts(corpora, "w", 2)
    try:
        v = infer_oov(store, ctx)
    except UnresolvableWordError:
        return
    assert v.shape == (2,)
    assert np.all(v >= -1e-15) and np.all(v <= 1 + 1e-15)


def test_unresolvable_word():
    with pytest.raises(UnresolvableWordError):
        infer_oov(_store2(), collect_contexts([["w", "u"]], "w"))


def test_resolve_caches_deterministically():
    store = _store2()
    corpora = [["a", "w", "b"], ["w", "a"]]
    assert resolve_vocabulary(store, corpora) == []
    first = store.lookup("w")
    resolve_vocabulary(store, [["w", "b"]])
    np.testing.assert_array_equal(store.lookup("w"), first)
    assert "w" not in store and "w" in store.inferred
