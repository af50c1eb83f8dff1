"""Randomized hyperparameter search with stratified k-fold cross-validation."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from ..errors import ConfigError, DataError
from ..seeding import derive, derive_int
from .data import stratified_kfold
from .models import ModelSpec, train

log = logging.getLogger(__name__)

N_ITER_DEFAULT = 25


@dataclass(frozen=True)
class CandidateResult:
    """One evaluated configuration with its per-fold scores."""

    hyperparameters: Mapping[str, object]
    fold_scores: tuple[float, ...]
    mean_score: float


@dataclass(frozen=True)
class SearchResult:
    algorithm: str
    best: ModelSpec
    table: tuple[CandidateResult, ...]
    n_iter: int
    k: int
    seed: int


def _balanced_accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    pos = y_true
    neg = ~y_true
    tpr = float((y_pred & pos).sum()) / float(pos.sum())
    tnr = float((~y_pred & neg).sum()) / float(neg.sum())
    return 0.5 * (tpr + tnr)


def cross_validate_spec(
    spec: ModelSpec,
    X: np.ndarray,
    y: np.ndarray,
    folds: Sequence[tuple[np.ndarray, np.ndarray]],
    seed: int = 0,
) -> tuple[tuple[float, ...], float]:
    """Per-fold balanced accuracy and the mean over usable folds.

    Folds whose test side misses a class (or train side collapses to one
    class) cannot be scored; they are skipped with a warning and recorded as
    NaN in the per-fold tuple.
    """
    yb = np.asarray(y, dtype=bool)
    scores: list[float] = []
    usable: list[float] = []
    for f, (train_idx, test_idx) in enumerate(folds):
        y_train = yb[train_idx]
        y_test = yb[test_idx]
        if y_test.all() or not y_test.any() or y_train.all() or not y_train.any():
            log.warning("fold %d has a single class on one side; skipped", f)
            scores.append(float("nan"))
            continue
        fitted = train(
            ModelSpec(spec.algorithm, spec.hyperparameters, seed=derive_int(seed, "fold", f)),
            X[train_idx],
            y_train,
        )
        ba = _balanced_accuracy(y_test, fitted.predict_proba(X[test_idx]) > 0.5)
        scores.append(ba)
        usable.append(ba)
    if not usable:
        raise DataError("every cross-validation fold was skipped")
    return tuple(scores), float(np.mean(usable))


def enumerate_grid(grid: Mapping[str, Sequence]) -> list[dict]:
    """All configurations of a name -> values grid, deduplicated, in a stable
    order (sorted names, value order as given)."""
    if not grid:
        raise ConfigError("empty hyperparameter grid")
    names = sorted(grid)
    for name in names:
        if len(grid[name]) == 0:
            raise ConfigError(f"grid entry {name!r} has no values")
    configs: list[dict] = []
    seen: set[tuple] = set()
    for combo in itertools.product(*(grid[name] for name in names)):
        key = tuple(zip(names, map(repr, combo)))
        if key not in seen:
            seen.add(key)
            configs.append(dict(zip(names, combo)))
    return configs


def randomized_search_cv(
    algorithm: str,
    grid: Mapping[str, Sequence],
    X: np.ndarray,
    y: np.ndarray,
    n_iter: int = N_ITER_DEFAULT,
    k: int = 10,
    seed: int = 0,
    base_hyperparameters: Optional[Mapping[str, object]] = None,
) -> SearchResult:
    """Sample n_iter distinct configurations, score each by stratified k-fold
    mean balanced accuracy on shared folds, return the best plus the table.

    n_iter at or above the grid size evaluates every configuration once. Ties
    on the mean keep the earliest candidate in evaluation order.
    """
    X = np.asarray(X, dtype=float)
    yb = np.asarray(y, dtype=bool)
    if n_iter < 1:
        raise ConfigError(f"n_iter must be >= 1, got {n_iter}")
    if X.shape[0] < k:
        raise DataError(f"{X.shape[0]} rows cannot fill {k} folds")
    configs = enumerate_grid(grid)
    if n_iter < len(configs):
        picks = derive(seed, "search").choice(len(configs), size=n_iter, replace=False)
        configs = [configs[i] for i in np.sort(picks)]

    folds = stratified_kfold(yb, k, derive_int(seed, "cv"))
    base = dict(base_hyperparameters or {})
    table: list[CandidateResult] = []
    best_idx = -1
    best_mean = -np.inf
    for ci, config in enumerate(configs):
        spec = ModelSpec(algorithm, {**base, **config}, seed=derive_int(seed, "candidate", ci))
        fold_scores, mean_score = cross_validate_spec(spec, X, yb, folds, seed=spec.seed)
        table.append(
            CandidateResult(
                hyperparameters=dict(config),
                fold_scores=fold_scores,
                mean_score=mean_score,
            )
        )
        if mean_score > best_mean:
            best_mean = mean_score
            best_idx = ci

    best_config = table[best_idx].hyperparameters
    best_spec = ModelSpec(algorithm, {**base, **best_config}, seed=seed)
    return SearchResult(
        algorithm=algorithm,
        best=best_spec,
        table=tuple(table),
        n_iter=n_iter,
        k=k,
        seed=seed,
    )
