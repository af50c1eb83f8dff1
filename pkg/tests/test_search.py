"""Grid enumeration and randomized cross-validated search."""

import logging
import math

import numpy as np
import pytest

from transitlink.errors import ConfigError, DataError
from transitlink.learn.models import ModelSpec, grid_for
from transitlink.learn.search import (
    cross_validate_spec,
    enumerate_grid,
    randomized_search_cv,
)
from transitlink.seeding import derive


def data(n=120, seed=0):
    rng = derive(seed, "search-data")
    X = rng.normal(size=(n, 3))
    y = X[:, 0] - 0.5 * X[:, 2] > 0.0
    return X, y


class TestEnumerateGrid:
    def test_product_size(self):
        grid = {"a": [1, 2, 3], "b": ["x", "y"]}
        assert len(enumerate_grid(grid)) == 6

    def test_stable_name_order(self):
        grid = {"b": [1], "a": [2]}
        (only,) = enumerate_grid(grid)
        assert list(only) == ["a", "b"]

    def test_duplicate_values_deduplicated(self):
        grid = {"a": [1, 1, 2]}
        assert enumerate_grid(grid) == [{"a": 1}, {"a": 2}]

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigError):
            enumerate_grid({})

    def test_empty_value_list_rejected(self):
        with pytest.raises(ConfigError, match="no values"):
            enumerate_grid({"a": []})

    def test_none_values_survive(self):
        grid = {"max_depth": [None, 3]}
        assert {"max_depth": None} in enumerate_grid(grid)


class TestCrossValidate:
    def test_scores_every_fold(self):
        X, y = data()
        spec = ModelSpec("decision_tree", {"max_depth": 3})
        from transitlink.learn.data import stratified_kfold

        folds = stratified_kfold(y, 4, seed=1)
        scores, mean = cross_validate_spec(spec, X, y, folds)
        assert len(scores) == 4
        assert mean == pytest.approx(np.mean(scores))
        assert all(0.0 <= s <= 1.0 for s in scores)

    def test_single_class_fold_skipped_with_nan(self, caplog):
        X, y = data(20, seed=2)
        # craft folds: one test side is all positive, the other is mixed
        pos = np.flatnonzero(y)[:4]
        rest = np.setdiff1d(np.arange(20), pos)
        mixed = np.concatenate([np.flatnonzero(y[rest])[:2], np.flatnonzero(~y[rest])[:2]])
        test2 = rest[mixed]
        train2 = np.setdiff1d(rest, test2)
        folds = [(rest, pos), (train2, test2)]
        spec = ModelSpec("decision_tree")
        with caplog.at_level(logging.WARNING, logger="transitlink.learn.search"):
            scores, mean = cross_validate_spec(spec, X, y, folds)
        assert math.isnan(scores[0])
        assert not math.isnan(scores[1])
        assert mean == pytest.approx(scores[1])

    def test_all_folds_skipped_is_an_error(self):
        X = np.random.default_rng(0).normal(size=(10, 2))
        y = np.array([True] * 5 + [False] * 5)
        pos = np.arange(5)
        neg = np.arange(5, 10)
        folds = [(neg, pos), (pos, neg)]  # both test sides single-class
        with pytest.raises(DataError, match="every cross-validation fold"):
            cross_validate_spec(ModelSpec("decision_tree"), X, y, folds)


class TestRandomizedSearch:
    def test_small_grid_fully_enumerated(self):
        X, y = data(80, seed=3)
        grid = {"max_depth": [2, 4], "criterion": ["gini", "entropy"]}
        result = randomized_search_cv(
            "decision_tree", grid, X, y, n_iter=50, k=4, seed=0
        )
        assert len(result.table) == 4
        assert result.best.algorithm == "decision_tree"

    def test_n_iter_caps_candidates(self):
        X, y = data(80, seed=4)
        grid = {"max_depth": [2, 3, 4, 5, 6, 7]}
        result = randomized_search_cv(
            "decision_tree", grid, X, y, n_iter=3, k=4, seed=1
        )
        assert len(result.table) == 3

    def test_best_has_highest_mean(self):
        X, y = data(100, seed=5)
        grid = {"max_depth": [1, 2, 6]}
        result = randomized_search_cv(
            "decision_tree", grid, X, y, n_iter=10, k=5, seed=2
        )
        best_mean = max(c.mean_score for c in result.table)
        winner = next(
            c for c in result.table if c.hyperparameters == dict(result.best.hyperparameters)
        )
        assert winner.mean_score == pytest.approx(best_mean)

    def test_deterministic_per_seed(self):
        X, y = data(90, seed=6)
        grid = {"max_depth": [2, 4, 8], "min_samples_leaf": [1, 3]}
        a = randomized_search_cv("decision_tree", grid, X, y, n_iter=4, k=3, seed=7)
        b = randomized_search_cv("decision_tree", grid, X, y, n_iter=4, k=3, seed=7)
        assert [c.hyperparameters for c in a.table] == [c.hyperparameters for c in b.table]
        assert [c.mean_score for c in a.table] == [c.mean_score for c in b.table]

    def test_base_hyperparameters_fold_into_every_candidate(self):
        X, y = data(60, seed=8)
        grid = {"n_estimators": [5, 10]}
        result = randomized_search_cv(
            "gradient_boosting",
            grid,
            X,
            y,
            n_iter=4,
            k=3,
            seed=3,
            base_hyperparameters={"max_depth": 2},
        )
        assert result.best.hyperparameters["max_depth"] == 2

    def test_too_few_rows_for_folds(self):
        X, y = data(5, seed=9)
        with pytest.raises(DataError):
            randomized_search_cv(
                "decision_tree", {"max_depth": [2]}, X, y, n_iter=1, k=10, seed=0
            )

    def test_bad_n_iter(self):
        X, y = data(30, seed=10)
        with pytest.raises(ConfigError):
            randomized_search_cv(
                "decision_tree", {"max_depth": [2]}, X, y, n_iter=0, k=3, seed=0
            )


class TestRosterGrids:
    def test_known_grids_enumerable(self):
        for name in ("decision_tree", "random_forest", "logistic_regression"):
            configs = enumerate_grid(grid_for(name))
            assert len(configs) > 1

    def test_tuned_entry_has_no_grid(self):
        with pytest.raises(ConfigError):
            grid_for("xgboost")
