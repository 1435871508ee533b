"""Weighted-Gini CART trees and bootstrap forests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


def leaf_probability(pos_weight: float, neg_weight: float) -> float:
    """Laplace-smoothed positive fraction of a leaf."""
    return (pos_weight + 1.0) / (pos_weight + neg_weight + 2.0)


@dataclass
class TreeArrays:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while np.any(active):
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return self.value[node]

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(), "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeArrays":
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=np.float64),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=np.float64))

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


def _best_split(X, y, w, features):
    """Highest weighted-Gini reduction over ``features`` (scanned in ascending order).

    Only a strictly larger gain replaces the incumbent, so ties go to the
    lowest feature index and then the lowest threshold.
    """
    W = w.sum()
    P = float(w @ y)
    parent = W - (P * P + (W - P) ** 2) / W
    best = (0.0, None, None)
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ws = w[order]
        wp = ws * y[order]
        cw = np.cumsum(ws)[:-1]
        cp = np.cumsum(wp)[:-1]
        valid = (xs[1:] > xs[:-1]) & (cw > 0) & (cw < W)
        if not np.any(valid):
            continue
        cw, cp = cw[valid], cp[valid]
        rw, rp = W - cw, P - cp
        left = cw - (cp * cp + (cw - cp) ** 2) / cw
        right = rw - (rp * rp + (rw - rp) ** 2) / rw
        gain = parent - left - right
        k = int(np.argmax(gain))
        if gain[k] > best[0] + 1e-12:
            pos = np.flatnonzero(valid)[k]
            best = (float(gain[k]), f, 0.5 * (xs[pos] + xs[pos + 1]))
    return best


def build_tree(X, y, w, max_depth=8, min_samples_split=2, max_features=None, rng=None) -> TreeArrays:
    """Grow a CART tree on positive-weight examples.

    Weights are rescaled to average 1 so the Laplace-smoothed leaves behave
    like counts; examples with zero weight are dropped before anything else,
    which makes a zero weight identical to deleting the example.
    """
    keep = w > 0
    X, y, w = X[keep], y[keep].astype(np.float64), w[keep]
    w = w * (len(w) / w.sum())
    d = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(0.5)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        wn, yn = w[idx], y[idx]
        pw = float(wn @ yn)
        value[node] = leaf_probability(pw, float(wn.sum()) - pw)
        if depth >= max_depth or len(idx) < min_samples_split or pw == 0 or pw == wn.sum():
            continue
        if max_features is not None and max_features < d:
            feats = np.sort(rng.choice(d, max_features, replace=False))
        else:
            feats = range(d)
        gain, f, t = _best_split(X[idx], yn, wn, feats)
        if f is None:
            continue
        go_left = X[idx, f] <= t
        feature[node], threshold[node] = int(f), float(t)
        l_node, r_node = new_node(), new_node()
        left[node], right[node] = l_node, r_node
        # right pushed first so the left subtree is numbered first
        stack.append((r_node, idx[~go_left], depth + 1))
        stack.append((l_node, idx[go_left], depth + 1))
    return TreeArrays(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                      np.array(right, dtype=np.int64), np.array(value))


def tree_seed(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(master_seed), int(index)])


def build_forest(X, y, w, n_trees=32, max_depth=8, min_samples_split=2, max_features="sqrt", seed=0) -> list[TreeArrays]:
    d = X.shape[1]
    if max_features == "sqrt":
        max_features = max(1, int(np.sqrt(d)))
    p = w / w.sum()
    trees = []
    for t in range(n_trees):
        rng = tree_seed(seed, t)
        boot = rng.choice(len(y), size=len(y), replace=True, p=p)
        trees.append(build_tree(X[boot], y[boot], np.ones(len(boot)), max_depth, min_samples_split, max_features, rng))
    return trees
