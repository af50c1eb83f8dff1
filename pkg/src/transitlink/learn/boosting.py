"""Stagewise gradient boosting on logistic loss with regularized leaf weights.

Each stage fits a small regression tree to the current gradients/hessians.
Leaf weights use the second-order objective -soft(G, alpha) / (H + lambda)
with an L1 soft threshold and L2 shrinkage, split gain is the corresponding
score improvement, and min_child_weight bounds each child's hessian mass.
This makes externally tuned configurations with lambda / alpha /
min_child_weight / subsample / colsample_bytree directly consumable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError, DataError
from ..seeding import derive
from .tree import resolve_max_features

log = logging.getLogger(__name__)

_MIN_GAIN = 1e-12
_PRIOR_CLIP = 1e-6


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_loss(y: np.ndarray, margin: np.ndarray) -> float:
    # log(1 + exp(-sign * margin)) done stably through logaddexp
    sign = np.where(y, 1.0, -1.0)
    return float(np.logaddexp(0.0, -sign * margin).mean())


def _soft(g: np.ndarray, alpha: float) -> np.ndarray:
    return np.sign(g) * np.maximum(np.abs(g) - alpha, 0.0)


class _BoostTree:
    """Regression tree over (gradient, hessian) pairs."""

    __slots__ = ("root",)

    def __init__(self, root: Optional[dict] = None):
        self.root = root

    def fit(self, X, g, h, *, params, rng) -> "_BoostTree":
        self.root = _grow(X, g, h, depth=0, params=params, rng=rng)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        _fill(self.root, X, np.arange(X.shape[0]), out)
        return out


def _leaf_value(G: float, H: float, reg_lambda: float, reg_alpha: float) -> float:
    return -float(_soft(np.array(G), reg_alpha)) / (H + reg_lambda)


def _score(G, H, reg_lambda: float, reg_alpha: float):
    s = _soft(np.asarray(G, dtype=float), reg_alpha)
    return s * s / (np.asarray(H, dtype=float) + reg_lambda)


def _grow(X, g, h, depth, params, rng) -> dict:
    n = X.shape[0]
    G, H = float(g.sum()), float(h.sum())
    node = {
        "value": _leaf_value(G, H, params["reg_lambda"], params["reg_alpha"]),
        "n": n,
    }
    if (
        depth >= params["max_depth"]
        or n < params["min_samples_split"]
        or n < 2 * params["min_samples_leaf"]
    ):
        return node

    best = _best_split(X, g, h, G, H, params, rng)
    if best is None:
        return node
    feature, threshold = best
    mask = X[:, feature] <= threshold
    node["feature"] = int(feature)
    node["threshold"] = float(threshold)
    node["left"] = _grow(X[mask], g[mask], h[mask], depth + 1, params, rng)
    node["right"] = _grow(X[~mask], g[~mask], h[~mask], depth + 1, params, rng)
    return node


def _best_split(X, g, h, G, H, params, rng) -> Optional[tuple[int, float]]:
    n, d = X.shape
    lam, alpha = params["reg_lambda"], params["reg_alpha"]
    msl = params["min_samples_leaf"]
    mcw = params["min_child_weight"]
    parent = float(_score(G, H, lam, alpha))
    n_candidates = params["n_feature_candidates"]
    if n_candidates >= d:
        candidates = np.arange(d)
    else:
        candidates = np.sort(rng.choice(d, size=n_candidates, replace=False))

    sizes = np.arange(1, n)
    best_gain = _MIN_GAIN
    best: Optional[tuple[int, float]] = None
    for feature in candidates:
        xs = X[:, feature]
        order = np.argsort(xs, kind="stable")
        xs_s = xs[order]
        cg = np.cumsum(g[order])
        ch = np.cumsum(h[order])
        GL, HL = cg[:-1], ch[:-1]
        GR, HR = G - GL, H - HL
        valid = (
            (xs_s[1:] > xs_s[:-1])
            & (sizes >= msl)
            & (n - sizes >= msl)
            & (HL >= mcw)
            & (HR >= mcw)
        )
        if not valid.any():
            continue
        gains = _score(GL, HL, lam, alpha) + _score(GR, HR, lam, alpha) - parent
        gains = np.where(valid, gains, -np.inf)
        pos = int(np.argmax(gains))
        gain = float(gains[pos])
        if gain > best_gain:
            best_gain = gain
            best = (int(feature), float((xs_s[pos] + xs_s[pos + 1]) / 2.0))
    return best


def _fill(node: dict, X, idx, out) -> None:
    if "feature" not in node or idx.size == 0:
        out[idx] = node["value"]
        return
    mask = X[idx, node["feature"]] <= node["threshold"]
    _fill(node["left"], X, idx[mask], out)
    _fill(node["right"], X, idx[~mask], out)


@dataclass
class GradientBoostingClassifier:
    """Boosted trees on logistic loss; probability = sigmoid of the margin."""

    n_estimators: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: object = None
    min_child_weight: float = 0.0
    reg_lambda: float = 0.0
    reg_alpha: float = 0.0
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    objective: str = "binary:logistic"
    seed: int = 0

    base_margin_: float = field(default=0.0, repr=False)
    stages_: list = field(default_factory=list, repr=False)
    loss_trace_: list = field(default_factory=list, repr=False)
    n_features_: Optional[int] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.n_estimators < 0:
            raise ConfigError(f"n_estimators must be >= 0, got {self.n_estimators}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(f"learning_rate must lie in (0,1], got {self.learning_rate}")
        if self.max_depth < 1:
            raise ConfigError(f"max_depth must be >= 1, got {self.max_depth}")
        for name in ("subsample", "colsample_bytree"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{name} must lie in (0,1], got {value}")
        if self.reg_lambda < 0 or self.reg_alpha < 0 or self.min_child_weight < 0:
            raise ConfigError("regularization settings must be non-negative")
        if self.objective != "binary:logistic":
            log.warning(
                "objective %r recorded but ignored: this binary task always "
                "trains on logistic loss",
                self.objective,
            )

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GradientBoostingClassifier":
        X = np.asarray(X, dtype=float)
        yb = np.asarray(y, dtype=bool)
        n, d = X.shape
        self.n_features_ = d
        prior = min(max(float(yb.mean()), _PRIOR_CLIP), 1.0 - _PRIOR_CLIP)
        self.base_margin_ = float(np.log(prior / (1.0 - prior)))
        yf = yb.astype(float)

        params = {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "min_child_weight": self.min_child_weight,
            "reg_lambda": self.reg_lambda,
            "reg_alpha": self.reg_alpha,
        }

        margin = np.full(n, self.base_margin_)
        self.stages_ = []
        self.loss_trace_ = [_log_loss(yb, margin)]
        n_cols = max(1, int(round(self.colsample_bytree * d)))
        for t in range(self.n_estimators):
            if self.subsample < 1.0:
                # per-row Bernoulli inclusion, so stage sizes fluctuate
                # around subsample * n instead of being clamped to it
                rows = np.flatnonzero(
                    derive(self.seed, "rows", t).random(n) < self.subsample
                )
                if rows.size == 0:
                    rows = np.arange(n)
            else:
                rows = np.arange(n)
            if n_cols < d:
                cols = np.sort(derive(self.seed, "cols", t).choice(d, size=n_cols, replace=False))
            else:
                cols = np.arange(d)
            p = _sigmoid(margin)
            g = p - yf
            h = p * (1.0 - p)
            stage_params = dict(params)
            stage_params["n_feature_candidates"] = resolve_max_features(
                self.max_features, cols.size
            )
            tree = _BoostTree().fit(
                X[np.ix_(rows, cols)],
                g[rows],
                h[rows],
                params=stage_params,
                rng=derive(self.seed, "feature-pick", t),
            )
            margin += self.learning_rate * tree.predict(X[:, cols])
            self.stages_.append((cols, tree))
            self.loss_trace_.append(_log_loss(yb, margin))
        return self

    def decision_margin(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.n_features_ is None:
            raise DataError("boosting model is not fitted")
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise DataError(
                f"expected {self.n_features_} feature columns, got shape {X.shape}"
            )
        margin = np.full(X.shape[0], self.base_margin_)
        for cols, tree in self.stages_:
            margin += self.learning_rate * tree.predict(X[:, cols])
        return margin

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision_margin(X))

    def to_params(self) -> dict:
        return {
            "base_margin": self.base_margin_,
            "n_features": self.n_features_,
            "stages": [
                {"cols": [int(c) for c in cols], "tree": tree.root}
                for cols, tree in self.stages_
            ],
            "loss_trace": list(self.loss_trace_),
        }

    def load_params(self, params: dict) -> "GradientBoostingClassifier":
        self.base_margin_ = params["base_margin"]
        self.n_features_ = params["n_features"]
        self.loss_trace_ = list(params.get("loss_trace", []))
        self.stages_ = [
            (np.array(stage["cols"], dtype=int), _BoostTree(stage["tree"]))
            for stage in params["stages"]
        ]
        return self
