from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ertransfer import learners
from ertransfer.evaluation import array_metrics
from ertransfer.learners import LearnerSpec
from ertransfer.pairs import EncodedPairs
from ertransfer.synthetic import generate_synthetic, same_distribution, split_pool
from ertransfer.transfer import (ScenarioConfig, TransferError, apply_imbalance_policy, extract_block,
                                 featurize_target, fit_domain_separator, instance_weight, phi_source, phi_target,
                                 phi_unlabeled, scenario1_weights, train_not, train_nvt, train_scenario1,
                                 train_scenario2, train_scenario3)

vec = arrays(np.float64, 4, elements=st.floats(-5, 5))


def pool(n, dup_rate=0.25, d=3, seed=0, shift=0.0):
    rng = np.random.default_rng(seed)
    y = (np.arange(n) < round(dup_rate * n)).astype(int)
    X = np.abs(rng.normal(0.6 - 0.3 * y[:, None] + shift, 0.3, (n, d)))
    return EncodedPairs(X, [f"l{i}" for i in range(n)], [f"r{i}" for i in range(n)], y)


def f1(model, test):
    return array_metrics(learners.predict(model, featurize_target(model, test.X)), test.labels).f1


# ---------------------------------------------------------------- transforms

def test_worked_transform_example():
    x = np.array([0.1, 0.9])
    assert phi_source(x, 1, 1).tolist() == [0.1, 0.9, 0.1, 0.9, 0.0, 0.0]
    assert phi_target(x, 1).tolist() == [0.1, 0.9, 0.0, 0.0, 0.1, 0.9]
    assert phi_unlabeled(x, 1).tolist() == [0.0, 0.0, 0.1, 0.9, -0.1, -0.9]


def test_source_two_of_three_blocks():
    x = np.array([1.0, 2.0])
    z = phi_source(x, 2, 3)
    blocks = [extract_block(z, b, 2).tolist() for b in range(5)]
    assert blocks == [[1.0, 2.0], [0.0, 0.0], [1.0, 2.0], [0.0, 0.0], [0.0, 0.0]]


@given(vec, vec, st.integers(1, 3), st.data())
def test_inner_product_identities(x, xp, n, data):
    i = data.draw(st.integers(1, n))
    j = data.draw(st.integers(1, n).filter(lambda k: k != i)) if n > 1 else None
    base = float(x @ xp)
    tol = 1e-12 * max(1.0, abs(base))
    assert abs(phi_source(x, i, n) @ phi_source(xp, i, n) - 2 * base) <= 2 * tol
    if j is not None:
        assert abs(phi_source(x, i, n) @ phi_source(xp, j, n) - base) <= tol
    assert abs(phi_source(x, i, n) @ phi_target(xp, n) - base) <= tol
    assert abs(phi_target(x, n) @ phi_target(xp, n) - 2 * base) <= 2 * tol
    assert abs(phi_unlabeled(x, n) @ phi_unlabeled(xp, n) - 2 * base) <= 2 * tol
    assert abs(np.sum(phi_source(x, i, n) ** 2) - 2 * np.sum(x ** 2)) <= 1e-12 * max(1.0, np.sum(x ** 2))


@given(vec, vec)
def test_unlabeled_cross_products(x, xp):
    base = float(x @ xp)
    assert abs(phi_unlabeled(x, 1) @ phi_target(xp, 1) + base) <= 1e-12 * max(1.0, abs(base))
    assert abs(phi_unlabeled(x, 1) @ phi_source(xp, 1, 1) - base) <= 1e-12 * max(1.0, abs(base))


@given(vec, vec, st.floats(-3, 3), st.integers(1, 3))
def test_transforms_linear_and_invertible(x, xp, a, n):
    for phi in (lambda v: phi_source(v, n, n), lambda v: phi_target(v, n), lambda v: phi_unlabeled(v, n)):
        np.testing.assert_allclose(phi(a * x + xp), a * phi(x) + phi(xp), atol=1e-12)
    assert np.array_equal(extract_block(phi_source(x, n, n), n, 4), x)
    assert np.array_equal(extract_block(phi_target(x, n), n + 1, 4), x)
    assert np.array_equal(extract_block(phi_unlabeled(x, n), n, 4), x)


def test_batch_transform_matches_rows():
    X = np.random.default_rng(0).normal(size=(5, 3))
    assert np.array_equal(phi_source(X, 2, 2), np.vstack([phi_source(r, 2, 2) for r in X]))


def test_source_index_range():
    with pytest.raises(TransferError):
        phi_source(np.ones(2), 0, 1)


# ------------------------------------------------------------ instance weights

def test_instance_weight_values():
    assert instance_weight(0.5) == 1.0
    assert abs(instance_weight(2 / 3) - 0.5) < 1e-15
    assert abs(instance_weight(1.0) - (1 / (1 - 1e-6) - 1)) < 1e-18
    assert instance_weight(1.0) < 1.1e-6
    assert instance_weight(0.0) == pytest.approx(1e6 - 1)


@given(st.floats(1e-6, 1 - 1e-6), st.floats(1e-9, 0.1))
def test_weight_strictly_decreasing(p, dp):
    q = p + dp
    if q <= 1 - 1e-6:
        assert instance_weight(q) < instance_weight(p)


# ---------------------------------------------------------------- baselines

def test_not_delegates_to_fit():
    tl = pool(40, seed=1)
    direct = learners.fit(LearnerSpec(class_weight="balanced"), tl.X, tl.labels)
    m = train_not(tl)
    assert np.array_equal(m.coef, direct.coef) and m.intercept == direct.intercept
    again = train_not(tl)
    assert np.array_equal(again.coef, m.coef)


def test_not_requires_labels():
    with pytest.raises(TransferError):
        train_not(pool(10).take([]))
    with pytest.raises(TransferError):
        train_not(pool(10).without_labels())


def test_nvt_single_source_equals_not():
    src = pool(80, seed=2)
    a, b = train_nvt([src]), train_not(src)
    np.testing.assert_allclose(a.coef, b.coef, atol=1e-12)


def test_nvt_pools_two_sources():
    s1, s2 = pool(50, seed=3), pool(50, seed=4)
    m = train_nvt([s1, s2])
    assert sum(m.meta["training"]["counts"].values()) == 100
    swapped = train_nvt([s2, s1])
    np.testing.assert_allclose(m.coef, swapped.coef, atol=1e-8)
    assert abs(m.intercept - swapped.intercept) < 1e-8


# ----------------------------------------------------------- domain separator

def _heldout_accuracy(S, T, seed=0):
    half_s, half_t = len(S) // 2, len(T) // 2
    sep = fit_domain_separator(S[:half_s], T[:half_t], seed)
    ps = learners.predict(sep, S[half_s:])
    pt = learners.predict(sep, T[half_t:])
    return (ps.sum() + (1 - pt).sum()) / (len(ps) + len(pt))


def test_separator_same_distribution_near_chance():
    accs = []
    for seed in range(5):
        p = generate_synthetic(same_distribution(seed))
        accs.append(_heldout_accuracy(p.source.X, p.target.X, seed))
    assert abs(np.mean(accs) - 0.5) <= 0.05


def test_separator_disjoint_support():
    d = 4
    S = np.zeros((100, 2 * d))
    S[:, :d] = 1.0
    T = np.zeros((100, 2 * d))
    T[:, d:] = 1.0
    assert _heldout_accuracy(S, T) == 1.0
    sep = fit_domain_separator(S, T)
    p = learners.predict_proba(sep, np.random.default_rng(0).normal(size=(50, 2 * d)))
    assert np.all((p >= 0) & (p <= 1))


# ---------------------------------------------------------------- scenario 1

def test_scenario1_same_distribution_matches_nvt():
    gaps, means = [], []
    for seed in range(5):
        # equal pool sizes put the separator's prior at 1/2, so indistinguishable pairs weigh 1
        p = generate_synthetic(same_distribution(seed, n_target=2000))
        _, unl, test = p.target_split(0.0, 0.5, seed)
        cfg = ScenarioConfig(scenario="adequate_nothing", seed=seed)
        (w,), _ = scenario1_weights([p.source], unl, cfg)
        means.append(w.mean())
        gaps.append(f1(train_scenario1([p.source], unl, cfg), test) - f1(train_nvt([p.source]), test))
    assert abs(np.mean(means) - 1.0) < 0.15
    assert abs(np.mean(gaps)) < 0.02


def test_overlapping_subpopulation_gets_more_weight():
    rng = np.random.default_rng(0)
    near = pool(300, seed=5)
    far = pool(300, seed=6, shift=1.5)
    src = EncodedPairs.concat([near, far])
    target = EncodedPairs(np.abs(rng.normal(0.55, 0.3, (400, 3))))
    (w,), _ = scenario1_weights([src], target, ScenarioConfig(scenario="adequate_nothing"))
    assert w[:300].mean() > w[300:].mean()
    assert np.all(np.isfinite(w)) and np.all(w >= 0)


def test_scenario1_weights_permutation_invariant():
    src = pool(200, seed=7)
    target = pool(150, seed=8, shift=0.3).without_labels()
    cfg = ScenarioConfig(scenario="adequate_nothing")
    perm = np.random.default_rng(1).permutation(200)
    (w,), _ = scenario1_weights([src], target, cfg)
    (wp,), _ = scenario1_weights([src.take(perm)], target, cfg)
    np.testing.assert_allclose(wp, w[perm], rtol=1e-7)


def test_scenario1_rejects_target_labels():
    with pytest.raises(TransferError):
        train_scenario1([pool(50)], pool(30), ScenarioConfig(scenario="adequate_nothing"))


def test_scenario1_budget_importance_sampling():
    cfg = ScenarioConfig(scenario="adequate_nothing", source_budget=60)
    m = train_scenario1([pool(200, seed=1), pool(200, seed=2)], pool(80, seed=3, shift=0.2).without_labels(), cfg)
    assert m.meta["training"]["counts"] == {"source_1": 30, "source_2": 30}


# ---------------------------------------------------------- scenarios 2 and 3

def test_scenario2_feature_dimension():
    tl = pool(40, seed=9)
    for n in (1, 2, 3):
        m = train_scenario2([pool(60, seed=10 + k) for k in range(n)], tl)
        assert m.n_features == (n + 2) * 3


def test_scenario2_same_distribution_close_to_pooled():
    diffs = []
    for seed in range(5):
        p = generate_synthetic(same_distribution(seed))
        tl, _, test = p.target_split(0.1, 0.0, seed)
        pooled = EncodedPairs.concat([p.source, tl])
        diffs.append(f1(train_scenario2(p.source, tl, ScenarioConfig(seed=seed)), test) - f1(train_nvt([pooled]), test))
    assert abs(np.mean(diffs)) <= 0.03


def test_scenario3_unlabeled_rows_and_fallback():
    tl, unl = pool(40, seed=11), pool(25, seed=12).without_labels()
    src = pool(200, seed=13)
    cfg = ScenarioConfig(scenario="limited_limited")
    m = train_scenario3(src, tl, unl, cfg)
    assert m.meta["training"]["counts"]["unlabeled_rows"] == 2 * 25
    fallback = train_scenario3(src, tl, None, cfg)
    s2 = train_scenario2(src, tl, cfg)
    assert np.array_equal(fallback.coef, s2.coef)
    assert np.array_equal(train_scenario3(src, tl, unl.take([]), cfg).coef, s2.coef)


def test_scenario3_one_percent_labels_not_below_pooled():
    from ertransfer.synthetic import conflicting_features
    gaps = []
    for seed in range(10):
        p = generate_synthetic(conflicting_features(seed))
        tl, unl, test = p.target_split(0.01, 0.2, seed)
        sl, _, _ = split_pool(p.source, 0.01, 0.0, seed)
        cfg = ScenarioConfig(scenario="limited_limited", seed=seed)
        gaps.append(f1(train_scenario3(sl, tl, unl, cfg), test) - f1(train_nvt([sl]), test))
    assert np.mean(gaps) >= 0.0


def test_scenario_trainers_deterministic():
    src, tl, unl = pool(300, seed=14), pool(20, seed=15), pool(30, seed=16).without_labels()
    for fn in (lambda: train_scenario2(src, tl, ScenarioConfig(seed=3)),
               lambda: train_scenario3(src, tl, unl, ScenarioConfig(scenario="limited_limited", seed=3)),
               lambda: train_scenario1([src], unl, ScenarioConfig(scenario="adequate_nothing", seed=3))):
        assert learners.model_to_dict(fn()) == learners.model_to_dict(fn())


# ------------------------------------------------------------ imbalance policy

def test_cap_on_large_source():
    src, tgt = pool(100_000, d=2, seed=17), pool(100, d=2, seed=18)
    chosen, target = apply_imbalance_policy(src, tgt, ScenarioConfig(), parity=False)
    assert sum(len(s) for s in chosen) <= 1000


def test_target_replicated_to_parity():
    src, tgt = pool(1000, seed=19), pool(100, seed=20)
    chosen, target = apply_imbalance_policy(src, tgt, ScenarioConfig())
    assert len(chosen[0]) == 1000
    assert len(target) == 1000
    assert set(target.keys()) <= set(tgt.keys())


def test_cap_inactive_keeps_source():
    src, tgt = pool(400, seed=21), pool(40, seed=22)
    chosen, _ = apply_imbalance_policy(src, tgt, ScenarioConfig(), parity=False)
    assert chosen[0].keys() == src.keys()


def test_cap_shared_equally_between_sources():
    srcs = [pool(800, seed=23), pool(800, seed=24)]
    chosen, _ = apply_imbalance_policy(srcs, pool(40, seed=25), ScenarioConfig(), parity=False)
    assert [len(c) for c in chosen] == [200, 200]
