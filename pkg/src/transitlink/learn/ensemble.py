"""Bagged forests and stagewise-reweighting boosting over CART trees."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError, DataError
from ..seeding import derive, derive_int
from .tree import DecisionTreeClassifier

log = logging.getLogger(__name__)

_ERR_FLOOR = 1e-10


@dataclass
class RandomForestClassifier:
    """Mean-probability vote over bootstrapped CART trees."""

    n_estimators: int = 100
    criterion: str = "gini"
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: object = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    trees: list = field(default_factory=list, repr=False)
    n_features_: Optional[int] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise ConfigError(f"n_estimators must be >= 1, got {self.n_estimators}")

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForestClassifier":
        X = np.asarray(X, dtype=float)
        yb = np.asarray(y, dtype=bool)
        n = X.shape[0]
        self.n_features_ = X.shape[1]
        self.trees = []
        for t in range(self.n_estimators):
            if self.bootstrap:
                rows = derive(self.seed, "bootstrap", t).integers(0, n, size=n)
            else:
                rows = np.arange(n)
            tree = DecisionTreeClassifier(
                criterion=self.criterion,
                max_depth=self.max_depth,
                min_samples_split=self.min_samples_split,
                min_samples_leaf=self.min_samples_leaf,
                max_features=self.max_features,
                seed=derive_int(self.seed, "tree", t),
            )
            tree.fit(X[rows], yb[rows])
            self.trees.append(tree)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if not self.trees:
            raise DataError("forest is not fitted")
        stacked = np.stack([tree.predict_proba(X) for tree in self.trees])
        return stacked.mean(axis=0)

    def to_params(self) -> dict:
        return {
            "trees": [tree.to_params() for tree in self.trees],
            "n_features": self.n_features_,
        }

    def load_params(self, params: dict) -> "RandomForestClassifier":
        self.n_features_ = params["n_features"]
        self.trees = []
        for tree_params in params["trees"]:
            tree = DecisionTreeClassifier(criterion=self.criterion)
            tree.load_params(tree_params)
            self.trees.append(tree)
        return self


@dataclass
class AdaBoostClassifier:
    """Stagewise reweighting over depth-1 stumps; weighted vote share score.

    Stages stop early when a stump fits perfectly (its vote decides) or does
    no better than chance on the current weights.
    """

    n_estimators: int = 50
    learning_rate: float = 1.0
    seed: int = 0

    stumps: list = field(default_factory=list, repr=False)
    alphas: list = field(default_factory=list, repr=False)
    prior_: float = field(default=0.5, repr=False)
    n_features_: Optional[int] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise ConfigError(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")

    def fit(self, X: np.ndarray, y: np.ndarray) -> "AdaBoostClassifier":
        X = np.asarray(X, dtype=float)
        yb = np.asarray(y, dtype=bool)
        n = X.shape[0]
        self.n_features_ = X.shape[1]
        self.prior_ = float(yb.mean())
        self.stumps = []
        self.alphas = []
        w = np.full(n, 1.0 / n)
        for t in range(self.n_estimators):
            stump = DecisionTreeClassifier(
                max_depth=1, seed=derive_int(self.seed, "stump", t)
            )
            stump.fit(X, yb, sample_weight=w)
            pred = stump.predict_proba(X) > 0.5
            miss = pred != yb
            err = float(w[miss].sum() / w.sum())
            if err >= 0.5:
                if not self.stumps:
                    log.warning("first stump no better than chance; ensemble is empty")
                break
            clipped = min(max(err, _ERR_FLOOR), 1.0 - _ERR_FLOOR)
            alpha = self.learning_rate * math.log((1.0 - clipped) / clipped)
            self.stumps.append(stump)
            self.alphas.append(alpha)
            if err <= 0.0:
                break
            w = w * np.exp(alpha * miss)
            w = w / w.sum()
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.n_features_ is None:
            raise DataError("ensemble is not fitted")
        if not self.stumps:
            return np.full(X.shape[0], self.prior_)
        votes = np.zeros(X.shape[0])
        for stump, alpha in zip(self.stumps, self.alphas):
            votes += alpha * (stump.predict_proba(X) > 0.5)
        return votes / sum(self.alphas)

    def to_params(self) -> dict:
        return {
            "stumps": [s.to_params() for s in self.stumps],
            "alphas": list(self.alphas),
            "prior": self.prior_,
            "n_features": self.n_features_,
        }

    def load_params(self, params: dict) -> "AdaBoostClassifier":
        self.n_features_ = params["n_features"]
        self.prior_ = params["prior"]
        self.alphas = list(params["alphas"])
        self.stumps = []
        for stump_params in params["stumps"]:
            stump = DecisionTreeClassifier(max_depth=1)
            stump.load_params(stump_params)
            self.stumps.append(stump)
        return self
