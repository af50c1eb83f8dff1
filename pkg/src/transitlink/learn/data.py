"""Labeled datasets, time-based splitting, rebalancing, stratified folds."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ..errors import DataError
from ..features import FeatureVector, component_names
from ..months import MonthKey
from ..seeding import derive

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledDataset:
    """Feature rows with months and binary labels, fixed column order."""

    months: tuple[MonthKey, ...]
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.X.ndim != 2:
            raise DataError("feature matrix must be 2-dimensional")
        n, d = self.X.shape
        if len(self.months) != n or len(self.y) != n:
            raise DataError("months, features and labels disagree on row count")
        if len(self.feature_names) != d:
            raise DataError(
                f"{d} feature columns but {len(self.feature_names)} feature names"
            )

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def months_present(self) -> list[MonthKey]:
        return sorted(set(self.months))

    def month_indices(self, month: MonthKey) -> np.ndarray:
        return np.array([i for i, m in enumerate(self.months) if m == month], dtype=int)

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=int)
        return LabeledDataset(
            months=tuple(self.months[i] for i in idx),
            X=self.X[idx],
            y=self.y[idx],
            feature_names=self.feature_names,
        )


def assemble_dataset(vectors: Iterable[FeatureVector], sets: Sequence[str]) -> LabeledDataset:
    """Join per-set feature vectors into one wide row per labeled edge.

    Rows are ordered by (month, source, target); every requested set must be
    present for every row, and every row must carry a label.
    """
    names = component_names(sets)
    by_row: dict[tuple[MonthKey, str, str], dict[str, FeatureVector]] = {}
    for vec in vectors:
        if vec.set_id not in sets:
            continue
        by_row.setdefault((vec.month, vec.source, vec.target), {})[vec.set_id] = vec
    if not by_row:
        raise DataError("no feature vectors for the requested sets")

    keys = sorted(by_row)
    rows = np.empty((len(keys), len(names)))
    labels = np.empty(len(keys), dtype=bool)
    months: list[MonthKey] = []
    for i, key in enumerate(keys):
        parts = by_row[key]
        missing = [s for s in sets if s not in parts]
        if missing:
            raise DataError(
                f"row {key[0]} {key[1]}->{key[2]} lacks feature sets: {', '.join(missing)}"
            )
        label = parts[sets[0]].label
        if label is None:
            raise DataError(f"row {key[0]} {key[1]}->{key[2]} has no label")
        rows[i] = np.concatenate([np.asarray(parts[s].values) for s in sets])
        labels[i] = bool(label)
        months.append(key[0])
    return LabeledDataset(
        months=tuple(months), X=rows, y=labels, feature_names=tuple(names)
    )


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint, exhaustive train/test row indices for one dataset."""

    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    train_fraction: float

    def __post_init__(self) -> None:
        overlap = np.intersect1d(self.train_idx, self.test_idx)
        if overlap.size:
            raise DataError("split sides overlap")


def time_based_split(
    ds: LabeledDataset, train_fraction: float = 0.7, seed: int = 0
) -> SplitPlan:
    """Per month: floor(fraction * n) rows to train (at least 1, at most n-1
    when the month has 2 or more rows), the rest to test, seed-deterministic.

    A month with a single row sends it to train with a warning; that month is
    then absent from the test side.
    """
    if ds.n_rows == 0:
        raise DataError("cannot split an empty dataset")
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must lie in (0,1), got {train_fraction}")
    train: list[int] = []
    test: list[int] = []
    for month in ds.months_present():
        idx = ds.month_indices(month)
        n = idx.size
        if n == 1:
            log.warning("month %s has a single row; it goes to train", month)
            train.append(int(idx[0]))
            continue
        k = min(max(1, math.floor(train_fraction * n)), n - 1)
        rng = derive(seed, "split", str(month))
        perm = rng.permutation(n)
        train.extend(int(i) for i in idx[perm[:k]])
        test.extend(int(i) for i in idx[perm[k:]])
    return SplitPlan(
        train_idx=np.array(sorted(train), dtype=int),
        test_idx=np.array(sorted(test), dtype=int),
        seed=seed,
        train_fraction=train_fraction,
    )


def undersample_indices(
    y: np.ndarray, seed: int, indices: Optional[np.ndarray] = None
) -> np.ndarray:
    """Indices of a class-balanced subsample of `indices` (default: all rows).

    The majority class is sampled down to the minority count without
    replacement; single-class input is an error.
    """
    idx = np.arange(len(y)) if indices is None else np.asarray(indices, dtype=int)
    labels = np.asarray(y, dtype=bool)[idx]
    pos = idx[labels]
    neg = idx[~labels]
    if pos.size == 0 or neg.size == 0:
        raise DataError("cannot rebalance: only one class present")
    m = min(pos.size, neg.size)
    rng = derive(seed, "undersample")
    if pos.size > m:
        pos = rng.choice(pos, size=m, replace=False)
    if neg.size > m:
        neg = rng.choice(neg, size=m, replace=False)
    return np.sort(np.concatenate([pos, neg]))


def random_undersample(ds: LabeledDataset, seed: int) -> LabeledDataset:
    """Dataset-level wrapper around undersample_indices."""
    return ds.subset(undersample_indices(ds.y, seed))


def stratified_kfold(
    y: np.ndarray, k: int, seed: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """k (train, test) index pairs; each class spread round-robin over folds,
    so per-fold class counts deviate from proportionality by under 1 sample."""
    labels = np.asarray(y, dtype=bool)
    n = labels.size
    if k < 2:
        raise DataError(f"need at least 2 folds, got {k}")
    if n < k:
        raise DataError(f"{n} rows cannot fill {k} folds")
    rng = derive(seed, "folds")
    assignment = np.empty(n, dtype=int)
    for cls in (False, True):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(members.size)]
        assignment[members] = np.arange(members.size) % k
    folds = []
    everything = np.arange(n)
    for f in range(k):
        test = everything[assignment == f]
        train = everything[assignment != f]
        folds.append((train, test))
    return folds
