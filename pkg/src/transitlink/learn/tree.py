"""From-scratch CART decision tree for binary classification.

Split search is vectorized per node: each candidate feature is sorted once,
weighted class counts are accumulated cumulatively, and every boundary between
distinct values is scored in one pass. Ties between equally good splits keep
the first feature in canonical column order, so fits are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError, DataError
from ..seeding import derive

_MIN_IMPROVEMENT = 1e-12
CRITERIA = ("gini", "entropy")


@dataclass
class TreeNode:
    """Internal node (feature/threshold set) or leaf (prediction only)."""

    prob: float
    n_samples: int
    depth: int
    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"prob": self.prob, "n": self.n_samples, "depth": self.depth}
        return {
            "prob": self.prob,
            "n": self.n_samples,
            "depth": self.depth,
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TreeNode":
        node = cls(prob=data["prob"], n_samples=data["n"], depth=data["depth"])
        if "feature" in data:
            node.feature = data["feature"]
            node.threshold = data["threshold"]
            node.left = cls.from_dict(data["left"])
            node.right = cls.from_dict(data["right"])
        return node


def resolve_max_features(max_features, d: int) -> int:
    """Map a max_features setting to a candidate count; 'auto' means all."""
    if max_features is None or max_features == "auto":
        return d
    if max_features == "sqrt":
        return max(1, int(math.sqrt(d)))
    if max_features == "log2":
        return max(1, int(math.log2(d))) if d > 1 else 1
    if isinstance(max_features, (int, np.integer)) and not isinstance(max_features, bool):
        if max_features < 1:
            raise ConfigError(f"max_features must be >= 1, got {max_features}")
        return min(int(max_features), d)
    raise ConfigError(f"unsupported max_features value {max_features!r}")


def _impurity_costs(
    wl: np.ndarray, wyl: np.ndarray, wr: np.ndarray, wyr: np.ndarray, criterion: str
) -> np.ndarray:
    """Weighted child impurity summed over both sides, per candidate cut."""
    with np.errstate(divide="ignore", invalid="ignore"):
        if criterion == "gini":
            left = np.where(wl > 0, 2.0 * wyl * (wl - wyl) / wl, 0.0)
            right = np.where(wr > 0, 2.0 * wyr * (wr - wyr) / wr, 0.0)
            return left + right
        # entropy, natural log; 0 log 0 taken as 0
        def side(w, wy):
            wn = w - wy
            term_pos = np.where(wy > 0, wy * np.log(np.where(wy > 0, wy / w, 1.0)), 0.0)
            term_neg = np.where(wn > 0, wn * np.log(np.where(wn > 0, wn / w, 1.0)), 0.0)
            return -(term_pos + term_neg)

        return side(wl, wyl) + side(wr, wyr)


def _node_cost(w_total: float, wy_total: float, criterion: str) -> float:
    if w_total <= 0:
        return 0.0
    p = wy_total / w_total
    if criterion == "gini":
        return 2.0 * w_total * p * (1.0 - p)
    cost = 0.0
    if p > 0:
        cost -= wy_total * math.log(p)
    if p < 1:
        cost -= (w_total - wy_total) * math.log(1.0 - p)
    return cost


@dataclass
class DecisionTreeClassifier:
    """Binary CART with gini or entropy impurity and sample weights."""

    criterion: str = "gini"
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: object = None
    seed: int = 0

    root: Optional[TreeNode] = field(default=None, repr=False)
    n_features_: Optional[int] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.criterion not in CRITERIA:
            raise ConfigError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise ConfigError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.min_samples_leaf < 1:
            raise ConfigError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")

    def fit(
        self, X: np.ndarray, y: np.ndarray, sample_weight: Optional[np.ndarray] = None
    ) -> "DecisionTreeClassifier":
        X = np.asarray(X, dtype=float)
        yb = np.asarray(y, dtype=bool)
        n, d = X.shape
        if sample_weight is None:
            w = np.ones(n)
        else:
            w = np.asarray(sample_weight, dtype=float)
            if w.shape != (n,) or np.any(w < 0) or not np.any(w > 0):
                raise DataError("sample weights must be non-negative with a positive sum")
        self.n_features_ = d
        self._n_candidates = resolve_max_features(self.max_features, d)
        self._rng = derive(self.seed, "tree-splits")
        self.root = self._grow(X, yb.astype(float), w, depth=0)
        return self

    def _candidate_features(self, d: int) -> np.ndarray:
        if self._n_candidates >= d:
            return np.arange(d)
        picked = self._rng.choice(d, size=self._n_candidates, replace=False)
        return np.sort(picked)

    def _grow(self, X: np.ndarray, y: np.ndarray, w: np.ndarray, depth: int) -> TreeNode:
        n = X.shape[0]
        w_total = float(w.sum())
        wy_total = float((w * y).sum())
        prob = wy_total / w_total if w_total > 0 else 0.5
        node = TreeNode(prob=prob, n_samples=n, depth=depth)

        if (
            n < self.min_samples_split
            or n < 2 * self.min_samples_leaf
            or (self.max_depth is not None and depth >= self.max_depth)
            or prob in (0.0, 1.0)
        ):
            return node

        parent_cost = _node_cost(w_total, wy_total, self.criterion)
        best = self._best_split(X, y, w, parent_cost)
        if best is None:
            return node

        feature, threshold = best
        mask = X[:, feature] <= threshold
        node.feature = int(feature)
        node.threshold = float(threshold)
        node.left = self._grow(X[mask], y[mask], w[mask], depth + 1)
        node.right = self._grow(X[~mask], y[~mask], w[~mask], depth + 1)
        return node

    def _best_split(
        self, X: np.ndarray, y: np.ndarray, w: np.ndarray, parent_cost: float
    ) -> Optional[tuple[int, float]]:
        n, d = X.shape
        msl = self.min_samples_leaf
        best_cost = parent_cost - _MIN_IMPROVEMENT
        best: Optional[tuple[int, float]] = None
        wy = w * y
        sizes = np.arange(1, n)
        for feature in self._candidate_features(d):
            xs = X[:, feature]
            order = np.argsort(xs, kind="stable")
            xs_s = xs[order]
            cw = np.cumsum(w[order])
            cwy = np.cumsum(wy[order])
            valid = (xs_s[1:] > xs_s[:-1]) & (sizes >= msl) & (n - sizes >= msl)
            if not valid.any():
                continue
            wl = cw[:-1]
            wyl = cwy[:-1]
            wr = cw[-1] - wl
            wyr = cwy[-1] - wyl
            costs = _impurity_costs(wl, wyl, wr, wyr, self.criterion)
            costs = np.where(valid, costs, np.inf)
            pos = int(np.argmin(costs))
            cost = float(costs[pos])
            if cost < best_cost:
                best_cost = cost
                best = (int(feature), float((xs_s[pos] + xs_s[pos + 1]) / 2.0))
        return best

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.root is None:
            raise DataError("tree is not fitted")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise DataError(
                f"expected {self.n_features_} feature columns, got shape {X.shape}"
            )
        out = np.empty(X.shape[0])
        self._fill(self.root, X, np.arange(X.shape[0]), out)
        return out

    def _fill(self, node: TreeNode, X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
        if node.is_leaf or idx.size == 0:
            out[idx] = node.prob
            return
        mask = X[idx, node.feature] <= node.threshold
        self._fill(node.left, X, idx[mask], out)
        self._fill(node.right, X, idx[~mask], out)

    # structural audit helpers

    def actual_depth(self) -> int:
        def walk(node: TreeNode) -> int:
            if node.is_leaf:
                return node.depth
            return max(walk(node.left), walk(node.right))

        return walk(self.root) if self.root else 0

    def leaf_sizes(self) -> list[int]:
        sizes: list[int] = []

        def walk(node: TreeNode) -> None:
            if node.is_leaf:
                sizes.append(node.n_samples)
            else:
                walk(node.left)
                walk(node.right)

        if self.root:
            walk(self.root)
        return sizes

    def to_params(self) -> dict:
        return {"root": self.root.to_dict(), "n_features": self.n_features_}

    def load_params(self, params: dict) -> "DecisionTreeClassifier":
        self.root = TreeNode.from_dict(params["root"])
        self.n_features_ = params["n_features"]
        return self
