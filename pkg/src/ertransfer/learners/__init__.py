"""Weighted binary classifiers with probability outputs.

Every transfer algorithm only needs per-example weights from its learner, so
all four kinds accept ``sample_weights``; the effective weight of an example
is its sample weight times the weight of its class.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .linear import (fit_logistic, fit_platt, fit_svm, logistic_objective, numerical_gradient, sigmoid)
from .tree import TreeArrays, build_forest, build_tree, leaf_probability

KINDS = ("logistic_regression", "decision_tree", "random_forest", "linear_svm")
MODEL_FORMAT = "ertransfer-model"
MODEL_VERSION = 1


class LearnerError(ValueError):
    pass


@dataclass(frozen=True)
class LearnerSpec:
    kind: str = "logistic_regression"
    l2: float = 1e-3
    max_epochs: int = 500
    tol: float = 1e-8
    max_depth: int = 8
    n_trees: int = 32
    min_samples_split: int = 2
    max_features: Any = "sqrt"
    svm_smoothing: float = 0.1
    class_weight: Any = None  # None, "balanced" or {0: w0, 1: w1}
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise LearnerError(f"unknown learner kind {self.kind!r}")
        for name in ("l2", "tol", "svm_smoothing"):
            if getattr(self, name) < 0:
                raise LearnerError(f"{name} must be non-negative")
        for name in ("max_epochs", "max_depth", "n_trees", "min_samples_split"):
            if getattr(self, name) < 1:
                raise LearnerError(f"{name} must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.class_weight, dict):
            d["class_weight"] = {str(k): v for k, v in self.class_weight.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerSpec":
        d = dict(d)
        if isinstance(d.get("class_weight"), dict):
            d["class_weight"] = {int(k): float(v) for k, v in d["class_weight"].items()}
        return cls(**d)


@dataclass(frozen=True)
class LearnerModel:
    spec: LearnerSpec
    n_features: int
    params: dict = field(repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def coef(self) -> np.ndarray:
        return self.params["coef"]

    @property
    def intercept(self) -> float:
        return self.params["intercept"]


def balanced_class_weights(y) -> dict[int, float]:
    """N / (2 * N_c) for each class c."""
    y = np.asarray(y)
    n = len(y)
    return {c: n / (2.0 * int(np.sum(y == c))) for c in (0, 1) if np.any(y == c)}


def effective_weights(spec: LearnerSpec, y: np.ndarray, sample_weights: np.ndarray) -> np.ndarray:
    if spec.class_weight is None:
        return sample_weights.astype(np.float64)
    cw = balanced_class_weights(y) if spec.class_weight == "balanced" else spec.class_weight
    return sample_weights * np.where(y == 1, cw.get(1, 1.0), cw.get(0, 1.0))


def _validate(X, y, sample_weights):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise LearnerError("X must be a 2-D array")
    n = X.shape[0]
    s = np.ones(n) if sample_weights is None else np.asarray(sample_weights, dtype=np.float64)
    if len(y) != n or len(s) != n:
        raise LearnerError("X, y and sample_weights must have the same length")
    if n < 2:
        raise LearnerError("need at least two examples")
    if not np.all(np.isfinite(X)):
        raise LearnerError("non-finite feature values")
    if not np.all(np.isin(y, (0, 1))):
        raise LearnerError("labels must be 0/1")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise LearnerError("sample weights must be finite and non-negative")
    if s.sum() <= 0:
        raise LearnerError("total sample weight is zero")
    if len(np.unique(y[s > 0])) < 2:
        raise LearnerError("both classes must be present with positive weight")
    return X, y.astype(np.int64), s


def fit(spec: LearnerSpec, X, y, sample_weights=None) -> LearnerModel:
    X, y, s = _validate(X, y, sample_weights)
    w = effective_weights(spec, y, s)
    yf = y.astype(np.float64)
    d = X.shape[1]
    if spec.kind == "logistic_regression":
        params, epochs, loss = fit_logistic(X, yf, w, spec.l2, spec.max_epochs, spec.tol)
        return LearnerModel(spec, d, {"coef": params[:-1], "intercept": float(params[-1])},
                            {"epochs": epochs, "final_loss": float(loss)})
    if spec.kind == "linear_svm":
        params, epochs, loss = fit_svm(X, yf, w, spec.l2, spec.max_epochs, spec.tol, spec.svm_smoothing)
        margins = X @ params[:-1] + params[-1]
        a, b = fit_platt(margins, yf, w)
        return LearnerModel(spec, d, {"coef": params[:-1], "intercept": float(params[-1]), "platt": (a, b)},
                            {"epochs": epochs, "final_loss": float(loss)})
    if spec.kind == "decision_tree":
        mf = None if spec.max_features in (None, "sqrt") else int(spec.max_features)
        tree = build_tree(X, yf, w, spec.max_depth, spec.min_samples_split, mf, np.random.default_rng(spec.seed))
        return LearnerModel(spec, d, {"trees": [tree]}, {"nodes": tree.n_nodes})
    trees = build_forest(X, yf, w, spec.n_trees, spec.max_depth, spec.min_samples_split, spec.max_features, spec.seed)
    return LearnerModel(spec, d, {"trees": trees}, {"nodes": sum(t.n_nodes for t in trees)})


def decision_function(model: LearnerModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X @ model.params["coef"] + model.params["intercept"]


def predict_proba(model: LearnerModel, x):
    """P(y=1 | x) for one vector (returns float) or a matrix (returns array)."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = X.reshape(1, -1) if single else X
    if X.shape[1] != model.n_features:
        raise LearnerError(f"expected {model.n_features} features, got {X.shape[1]}")
    kind = model.spec.kind
    if kind == "logistic_regression":
        p = sigmoid(decision_function(model, X))
    elif kind == "linear_svm":
        a, b = model.params["platt"]
        p = sigmoid(a * decision_function(model, X) + b)
    else:
        p = np.mean([t.predict(X) for t in model.params["trees"]], axis=0)
    return float(p[0]) if single else p


def predict(model: LearnerModel, x, threshold: float = 0.5):
    if not 0.0 < threshold < 1.0:
        raise LearnerError("threshold must lie in (0, 1)")
    p = predict_proba(model, x)
    if np.ndim(p) == 0:
        return int(p >= threshold)
    return (p >= threshold).astype(np.int64)


def gradient_check(spec: LearnerSpec, X, y, weights, params=None, h: float = 1e-6, seed: int = 0) -> float:
    """Max elementwise relative error between the analytic logistic gradient and central differences."""
    if spec.kind != "logistic_regression":
        raise LearnerError("gradient_check applies to logistic_regression")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    s = effective_weights(spec, y, np.asarray(weights, dtype=np.float64))
    yf = y.astype(np.float64)
    if params is None:
        params = np.random.default_rng(seed).normal(size=X.shape[1] + 1)
    params = np.asarray(params, dtype=np.float64)
    _, analytic = logistic_objective(params, X, yf, s, spec.l2)
    numeric = numerical_gradient(lambda p: logistic_objective(p, X, yf, s, spec.l2)[0], params, h)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def model_to_dict(model: LearnerModel) -> dict:
    params: dict[str, Any] = {}
    for key, val in model.params.items():
        if key == "trees":
            params[key] = [t.to_dict() for t in val]
        elif isinstance(val, np.ndarray):
            params[key] = val.tolist()
        else:
            params[key] = list(val) if isinstance(val, tuple) else val
    return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": model.spec.kind,
            "n_features": model.n_features, "spec": model.spec.to_dict(), "params": params,
            "meta": {k: (float(v) if isinstance(v, (np.floating,)) else v) for k, v in model.meta.items()}}


def model_from_dict(d: dict) -> LearnerModel:
    if d.get("format") != MODEL_FORMAT:
        raise LearnerError("not a serialized model")
    if d.get("version") != MODEL_VERSION:
        raise LearnerError(f"unsupported model version {d.get('version')}")
    spec = LearnerSpec.from_dict(d["spec"])
    p = d["params"]
    if "trees" in p:
        params = {"trees": [TreeArrays.from_dict(t) for t in p["trees"]]}
    else:
        params = {"coef": np.array(p["coef"], dtype=np.float64), "intercept": float(p["intercept"])}
        if "platt" in p:
            params["platt"] = tuple(float(v) for v in p["platt"])
    return LearnerModel(spec, int(d["n_features"]), params, dict(d.get("meta", {})))


def save_model(model: LearnerModel, path: str | Path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> LearnerModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


__all__ = [
    "KINDS", "LearnerError", "LearnerModel", "LearnerSpec", "balanced_class_weights", "decision_function",
    "effective_weights", "fit", "gradient_check", "leaf_probability", "load_model", "model_from_dict",
    "model_to_dict", "predict", "predict_proba", "save_model",
]
