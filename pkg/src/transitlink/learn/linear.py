"""Logistic regression trained by proximal gradient descent.

Features are standardized internally (train-set mean/scale, folded back in at
prediction). The smooth part of the objective is mean logistic loss plus the
L2 penalty; the L1 penalty enters through a soft-threshold proximal step, so
l1 / l2 / elasticnet all run through one optimizer. The regularization weight
is alpha = 1 / (C * n), keeping C an inverse regularization strength.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError, DataError

log = logging.getLogger(__name__)

PENALTIES = ("l1", "l2", "elasticnet")
_KNOWN_SOLVERS = ("liblinear", "saga", "lbfgs", "newton-cg", "sag")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def smooth_objective(wb: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean logistic loss + (l2/2)||w||^2 and its gradient.

    wb packs the coefficient vector with the intercept last; the intercept is
    never penalized. Returns (loss, gradient) with the gradient analytic, the
    quantity checked against finite differences in the test suite.
    """
    w, b = wb[:-1], wb[-1]
    n = X.shape[0]
    sign = np.where(y, 1.0, -1.0)
    margin = sign * (X @ w + b)
    loss = float(np.logaddexp(0.0, -margin).mean()) + 0.5 * l2 * float(w @ w)
    # d/dm log(1+exp(-m)) = -sigmoid(-m)
    coef = -sign * _sigmoid(-margin) / n
    grad = np.empty_like(wb)
    grad[:-1] = X.T @ coef + l2 * w
    grad[-1] = coef.sum()
    return loss, grad


def _prox(wb: np.ndarray, step: float, l1: float) -> np.ndarray:
    if l1 <= 0:
        return wb
    out = wb.copy()
    out[:-1] = np.sign(wb[:-1]) * np.maximum(np.abs(wb[:-1]) - step * l1, 0.0)
    return out


@dataclass
class LogisticRegressionClassifier:
    """Binary logistic regression with l1/l2/elasticnet penalties."""

    C: float = 1.0
    penalty: str = "l2"
    l1_ratio: float = 0.5
    tol: float = 1e-6
    max_iter: int = 2000
    solver: Optional[str] = None
    seed: int = 0

    coef_: Optional[np.ndarray] = field(default=None, repr=False)
    intercept_: float = field(default=0.0, repr=False)
    mean_: Optional[np.ndarray] = field(default=None, repr=False)
    scale_: Optional[np.ndarray] = field(default=None, repr=False)
    n_iter_: int = field(default=0, repr=False)
    loss_trace_: list = field(default_factory=list, repr=False)
    n_features_: Optional[int] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise ConfigError(f"C must be > 0, got {self.C}")
        if self.penalty not in PENALTIES:
            raise ConfigError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if not 0.0 <= self.l1_ratio <= 1.0:
            raise ConfigError(f"l1_ratio must lie in [0,1], got {self.l1_ratio}")
        if self.solver is not None:
            if self.solver not in _KNOWN_SOLVERS:
                raise ConfigError(f"unknown solver {self.solver!r}")
            log.warning(
                "solver %r accepted and ignored: one internal optimizer", self.solver
            )

    def _penalty_weights(self, n: int) -> tuple[float, float]:
        alpha = 1.0 / (self.C * n)
        if self.penalty == "l2":
            return alpha, 0.0
        if self.penalty == "l1":
            return 0.0, alpha
        return alpha * (1.0 - self.l1_ratio), alpha * self.l1_ratio

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LogisticRegressionClassifier":
        X = np.asarray(X, dtype=float)
        yb = np.asarray(y, dtype=bool)
        n, d = X.shape
        self.n_features_ = d
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0.0] = 1.0
        self.scale_ = scale
        Z = (X - self.mean_) / scale

        l2, l1 = self._penalty_weights(n)
        wb = np.zeros(d + 1)
        step = 1.0
        self.loss_trace_ = []
        for iteration in range(self.max_iter):
            loss, grad = smooth_objective(wb, Z, yb, l2)
            self.loss_trace_.append(loss + l1 * float(np.abs(wb[:-1]).sum()))
            while True:
                candidate = _prox(wb - step * grad, step, l1)
                delta = candidate - wb
                cand_loss, _ = smooth_objective(candidate, Z, yb, l2)
                bound = loss + float(grad @ delta) + float(delta @ delta) / (2.0 * step)
                if cand_loss <= bound + 1e-15 or step < 1e-12:
                    break
                step *= 0.5
            move = float(np.max(np.abs(candidate - wb)))
            wb = candidate
            self.n_iter_ = iteration + 1
            if move <= self.tol * max(1.0, float(np.max(np.abs(wb)))):
                break
            step = min(step * 1.25, 1e6)

        self.coef_ = wb[:-1]
        self.intercept_ = float(wb[-1])
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.coef_ is None:
            raise DataError("logistic model is not fitted")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise DataError(
                f"expected {self.n_features_} feature columns, got shape {X.shape}"
            )
        Z = (X - self.mean_) / self.scale_
        return _sigmoid(Z @ self.coef_ + self.intercept_)

    def to_params(self) -> dict:
        return {
            "coef": [float(c) for c in self.coef_],
            "intercept": self.intercept_,
            "mean": [float(m) for m in self.mean_],
            "scale": [float(s) for s in self.scale_],
            "n_features": self.n_features_,
            "n_iter": self.n_iter_,
        }

    def load_params(self, params: dict) -> "LogisticRegressionClassifier":
        self.coef_ = np.array(params["coef"], dtype=float)
        self.intercept_ = params["intercept"]
        self.mean_ = np.array(params["mean"], dtype=float)
        self.scale_ = np.array(params["scale"], dtype=float)
        self.n_features_ = params["n_features"]
        self.n_iter_ = params.get("n_iter", 0)
        return self
