"""Encoded tuple pairs: similarity vectors with optional labels, weights and origin."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

UNLABELED = -1


@dataclass(frozen=True)
class EncodedPair:
    left_id: str
    right_id: str
    x: np.ndarray
    label: int | None = None
    weight: float = 1.0
    origin: str = ""


class EncodedPairs:
    """Columnar collection of encoded pairs.

    ``labels`` holds 0/1, or -1 for an unlabeled pair.
    """

    def __init__(self, X, left_ids: Sequence[str] | None = None, right_ids: Sequence[str] | None = None,
                 labels=None, weights=None, origin: str | Sequence[str] = ""):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1) if X.size else X.reshape(0, 0)
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        n = X.shape[0]
        self.X = X
        self.left_ids = [str(i) for i in (left_ids if left_ids is not None else range(n))]
        self.right_ids = [str(i) for i in (right_ids if right_ids is not None else range(n))]
        if labels is None:
            self.labels = np.full(n, UNLABELED, dtype=np.int64)
        else:
            self.labels = np.array([UNLABELED if v is None else v for v in labels], dtype=np.int64)
        self.weights = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64).copy()
        self.origin = [origin] * n if isinstance(origin, str) else [str(o) for o in origin]
        for name, arr in (("left_ids", self.left_ids), ("right_ids", self.right_ids),
                          ("labels", self.labels), ("weights", self.weights), ("origin", self.origin)):
            if len(arr) != n:
                raise ValueError(f"{name} has length {len(arr)}, expected {n}")
        if np.any((self.labels != UNLABELED) & (self.labels != 0) & (self.labels != 1)):
            raise ValueError("labels must be 0, 1 or unlabeled")
        if np.any(~np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValueError("weights must be finite and non-negative")

    def __len__(self) -> int:
        return self.X.shape[0]

    def __getitem__(self, i: int) -> EncodedPair:
        label = int(self.labels[i])
        return EncodedPair(self.left_ids[i], self.right_ids[i], self.X[i],
                           None if label == UNLABELED else label, float(self.weights[i]), self.origin[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def y(self) -> np.ndarray:
        return self.labels

    def is_labeled(self) -> bool:
        return len(self) > 0 and bool(np.all(self.labels != UNLABELED))

    def labeled(self) -> "EncodedPairs":
        return self.take(np.flatnonzero(self.labels != UNLABELED))

    def take(self, idx: Iterable[int]) -> "EncodedPairs":
        idx = np.asarray(list(idx) if not isinstance(idx, np.ndarray) else idx, dtype=np.int64)
        return EncodedPairs(self.X[idx].reshape(len(idx), self.X.shape[1]),
                            [self.left_ids[i] for i in idx], [self.right_ids[i] for i in idx],
                            self.labels[idx], self.weights[idx], [self.origin[i] for i in idx])

    def with_weights(self, weights) -> "EncodedPairs":
        return EncodedPairs(self.X, self.left_ids, self.right_ids, self.labels, weights, self.origin)

    def with_origin(self, origin: str) -> "EncodedPairs":
        return EncodedPairs(self.X, self.left_ids, self.right_ids, self.labels, self.weights, origin)

    def without_labels(self) -> "EncodedPairs":
        return EncodedPairs(self.X, self.left_ids, self.right_ids, None, self.weights, self.origin)

    def keys(self) -> list[tuple[str, str]]:
        return list(zip(self.left_ids, self.right_ids))

    @classmethod
    def concat(cls, parts: Sequence["EncodedPairs"]) -> "EncodedPairs":
        parts = [p for p in parts if len(p)]
        if not parts:
            raise ValueError("nothing to concatenate")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise ValueError(f"dimension mismatch: {sorted(dims)}")
        return cls(np.vstack([p.X for p in parts]),
                   [i for p in parts for i in p.left_ids], [i for p in parts for i in p.right_ids],
                   np.concatenate([p.labels for p in parts]), np.concatenate([p.weights for p in parts]),
                   [o for p in parts for o in p.origin])

    @classmethod
    def from_pairs(cls, pairs: Sequence[EncodedPair]) -> "EncodedPairs":
        return cls(np.vstack([p.x for p in pairs]), [p.left_id for p in pairs], [p.right_id for p in pairs],
                   [p.label for p in pairs], [p.weight for p in pairs], [p.origin for p in pairs])


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def save_pairs(pairs: EncodedPairs, path: str | Path, meta: dict | None = None) -> None:
    """Write ``left_id,right_id,label,weight,x_0..x_{d-1}`` plus a JSON sidecar."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["left_id", "right_id", "label", "weight"] + [f"x_{j}" for j in range(pairs.dim)])
        for i in range(len(pairs)):
            label = "" if pairs.labels[i] == UNLABELED else str(int(pairs.labels[i]))
            w.writerow([pairs.left_ids[i], pairs.right_ids[i], label, repr(float(pairs.weights[i]))]
                       + [repr(float(v)) for v in pairs.X[i]])
    side = {"d": pairs.dim, "origin": pairs.origin[0] if len(set(pairs.origin)) == 1 and len(pairs) else ""}
    side.update(meta or {})
    sidecar_path(path).write_text(json.dumps(side, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_pairs(path: str | Path, origin: str | None = None) -> EncodedPairs:
    path = Path(path)
    meta = {}
    if sidecar_path(path).exists():
        meta = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["left_id", "right_id", "label", "weight"]:
            raise ValueError(f"{path}: unexpected header {header[:4]}")
        d = len(header) - 4
        left, right, labels, weights, rows = [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 4:
                raise ValueError(f"{path}:{lineno}: expected {d + 4} fields, got {len(row)}")
            left.append(row[0])
            right.append(row[1])
            if row[2] not in ("", "0", "1"):
                raise ValueError(f"{path}:{lineno}: bad label {row[2]!r}")
            labels.append(None if row[2] == "" else int(row[2]))
            weights.append(float(row[3]))
            rows.append([float(v) for v in row[4:]])
    X = np.array(rows, dtype=np.float64).reshape(len(rows), d)
    return EncodedPairs(X, left, right, labels, weights,
                        origin if origin is not None else meta.get("origin", "") or path.stem)


def read_meta(path: str | Path) -> dict:
    p = sidecar_path(path)
    return json.loads(p.read_text(encoding="utf-8")) if p.exists() else {}
