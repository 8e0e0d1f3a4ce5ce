"""Gradient-boosted regression trees mapping feature vectors to fitness.

Deliberately minimal boosting: squared-error loss, exact greedy
variance-reduction splits, no subsampling and no regularisation, so that
two fits on the same data are structurally identical and the attribution
step can be checked against an exhaustive oracle.  Split thresholds sit at
midpoints between consecutive distinct feature values; ties break toward
the lowest feature index, then the smallest threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# Splits with gain at or below this are noise; the node stays a leaf.
_MIN_GAIN = 1e-12


class InsufficientData(Exception):
    """Fewer than two training samples."""


class DimensionMismatch(Exception):
    """Query vector length does not match the trained feature count."""


@dataclass
class TreeNode:
    cover: int
    value: float = 0.0
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value, "cover": self.cover}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "cover": self.cover,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TreeNode":
        if "feature" not in data:
            return cls(cover=data["cover"], value=data["value"])
        return cls(
            cover=data["cover"],
            feature=data["feature"],
            threshold=data["threshold"],
            left=cls.from_dict(data["left"]),
            right=cls.from_dict(data["right"]),
        )


@dataclass
class RegressionTree:
    root: TreeNode

    def predict_one(self, x: Sequence[float]) -> float:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.value

    def expected_value(self) -> float:
        """Cover-weighted mean leaf value (the tree's output on no evidence)."""

        def walk(node: TreeNode) -> float:
            if node.is_leaf:
                return node.cover * node.value
            return walk(node.left) + walk(node.right)

        return walk(self.root) / self.root.cover


@dataclass
class GbtParams:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_leaf: int = 1


@dataclass
class SurrogateModel:
    base_prediction: float
    trees: list[RegressionTree]
    learning_rate: float
    feature_names: tuple[str, ...]
    training_size: int
    training_mse: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict(self, x: Sequence[float]) -> float:
        x = getattr(x, "values", x)
        if len(x) != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {len(x)}")
        return self.base_prediction + self.learning_rate * sum(t.predict_one(x) for t in self.trees)

    def to_dict(self) -> dict:
        return {
            "base_prediction": self.base_prediction,
            "learning_rate": self.learning_rate,
            "feature_names": list(self.feature_names),
            "training_size": self.training_size,
            "training_mse": self.training_mse,
            "trees": [t.root.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "SurrogateModel":
        return cls(
            base_prediction=data["base_prediction"],
            trees=[RegressionTree(TreeNode.from_dict(t)) for t in data["trees"]],
            learning_rate=data["learning_rate"],
            feature_names=tuple(data["feature_names"]),
            training_size=data["training_size"],
            training_mse=list(data.get("training_mse", [])),
        )

    @classmethod
    def from_json(cls, text: str) -> "SurrogateModel":
        return cls.from_dict(json.loads(text))


def _best_split(X: np.ndarray, r: np.ndarray, min_leaf: int):
    """Exact greedy search over all (feature, midpoint) splits.

    Returns (gain, feature, threshold) or None. np.argmin picks the first
    minimal SSE within a feature, i.e. the smallest threshold; a strict
    comparison across features keeps the lowest feature index on ties.
    """
    n, d = X.shape
    total_sum = float(r.sum())
    total_sq = float((r * r).sum())
    base_sse = total_sq - total_sum**2 / n
    left_n = np.arange(1, n, dtype=float)
    right_n = n - left_n
    best = None
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        sx = X[order, j]
        sr = r[order]
        valid = (sx[:-1] < sx[1:]) & (left_n >= min_leaf) & (right_n >= min_leaf)
        if not valid.any():
            continue
        left_sum = np.cumsum(sr)[:-1]
        left_sq = np.cumsum(sr * sr)[:-1]
        sse = (left_sq - left_sum**2 / left_n) + (
            (total_sq - left_sq) - (total_sum - left_sum) ** 2 / right_n
        )
        sse[~valid] = np.inf
        i = int(np.argmin(sse))
        gain = base_sse - float(sse[i])
        if best is None or gain > best[0]:
            best = (gain, j, float((sx[i] + sx[i + 1]) / 2.0))
    return best


def _build(X: np.ndarray, r: np.ndarray, depth: int, params: GbtParams) -> TreeNode:
    node = TreeNode(cover=len(r), value=float(r.mean()))
    if depth >= params.max_depth or len(r) < 2 * params.min_leaf:
        return node
    found = _best_split(X, r, params.min_leaf)
    if found is None or found[0] <= _MIN_GAIN:
        return node
    _, j, threshold = found
    mask = X[:, j] <= threshold
    node.feature = j
    node.threshold = threshold
    node.left = _build(X[mask], r[mask], depth + 1, params)
    node.right = _build(X[~mask], r[~mask], depth + 1, params)
    return node


def _as_matrix(features: Sequence) -> np.ndarray:
    return np.asarray([tuple(getattr(f, "values", f)) for f in features], dtype=float)


def fit(
    features: Sequence,
    targets: Sequence[float],
    params: Optional[GbtParams] = None,
    feature_names: Optional[Sequence[str]] = None,
) -> SurrogateModel:
    """Fit the boosted ensemble; fully deterministic for fixed inputs.

    Each round fits one tree to the current residuals and shrinks it by the
    learning rate, so training MSE is non-increasing round over round.
    Constant targets simply produce single-leaf trees.
    """
    params = params or GbtParams()
    X = _as_matrix(features)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise InsufficientData("features and targets must align")
    if len(y) < 2:
        raise InsufficientData(f"need at least 2 samples, got {len(y)}")
    if not np.isfinite(y).all():
        raise ValueError("targets must be finite")
    if feature_names is None:
        feature_names = tuple(f"f{j}" for j in range(X.shape[1]))

    base = float(y.mean())
    pred = np.full(len(y), base)
    trees: list[RegressionTree] = []
    mse_history: list[float] = []
    for _ in range(params.n_trees):
        tree = RegressionTree(_build(X, y - pred, 0, params))
        trees.append(tree)
        pred = pred + params.learning_rate * np.array([tree.predict_one(row) for row in X])
        mse_history.append(float(((y - pred) ** 2).mean()))
    return SurrogateModel(
        base_prediction=base,
        trees=trees,
        learning_rate=params.learning_rate,
        feature_names=tuple(feature_names),
        training_size=len(y),
        training_mse=mse_history,
    )
