from __future__ import annotations

import numpy as np
import pytest

from ertransfer.selection import relatedness_gate
from ertransfer.synthetic import (ShiftSpec, ShiftSpecError, generate_synthetic, generate_text_relations, named_spec,
                                  split_pool)


def test_duplicate_rate_is_exact():
    p = generate_synthetic(ShiftSpec(n_source=400, n_target=400, dup_rate=0.25, seed=3))
    for pool in (p.source, p.target):
        assert (pool.labels == 1).sum() == 100 and (pool.labels == 0).sum() == 300


def test_same_seed_same_pools():
    a = generate_synthetic(ShiftSpec(seed=7, n_source=100, n_target=100))
    b = generate_synthetic(ShiftSpec(seed=7, n_source=100, n_target=100))
    c = generate_synthetic(ShiftSpec(seed=8, n_source=100, n_target=100))
    assert a.source.X.tobytes() == b.source.X.tobytes() and a.target.X.tobytes() == b.target.X.tobytes()
    assert a.source.X.tobytes() != c.source.X.tobytes()


def test_zero_shift_is_related():
    p = generate_synthetic(ShiftSpec(seed=0, n_source=500, n_target=500))
    assert relatedness_gate(p.source.X, p.target.X, seed=1).verdict == "related"


def test_flip_reverses_signal_direction():
    p = generate_synthetic(ShiftSpec(seed=0, n_source=800, n_target=800, flip=(0,)))
    def gap(pool):
        return pool.X[pool.labels == 1, 0].mean() - pool.X[pool.labels == 0, 0].mean()
    assert np.sign(gap(p.source)) == -np.sign(gap(p.target))


@pytest.mark.parametrize("kw", [dict(dup_rate=0.0), dict(dup_rate=1.0), dict(n_source=5), dict(dim=4),
                                dict(flip=(99,)), dict(noise=0.0), dict(mean_offset=(1.0, 2.0))])
def test_invalid_specs(kw):
    with pytest.raises(ShiftSpecError):
        ShiftSpec(**kw)


def test_unknown_generator():
    with pytest.raises(ShiftSpecError, match="unknown generator"):
        named_spec("nope")


def test_split_is_disjoint_and_stratified():
    pool = generate_synthetic(ShiftSpec(seed=1, n_source=200, n_target=200)).target
    lab, unl, test = split_pool(pool, 0.1, 0.2, seed=0)
    keys = [set(p.keys()) for p in (lab, unl, test)]
    assert not (keys[0] & keys[1] or keys[0] & keys[2] or keys[1] & keys[2])
    assert sum(len(k) for k in keys) == 200
    assert set(lab.labels.tolist()) == {0, 1}
    assert np.all(unl.labels == -1)


def test_text_relations_truth_covers_all_combinations():
    left, right, labels = generate_text_relations(10, seed=0)
    assert len(labels) == 100
    assert sum(lab for *_, lab in labels.entries) <= 10
