"""Random forest and adaptive boosting behavior."""

import numpy as np
import pytest

from transitlink.errors import ConfigError, DataError
from transitlink.learn.ensemble import AdaBoostClassifier, RandomForestClassifier
from transitlink.seeding import derive


def separable(n=60, seed=0):
    rng = derive(seed, "ens")
    X = rng.normal(size=(n, 4))
    y = X[:, 2] + 0.3 * X[:, 0] > 0.0
    return X, y


class TestRandomForest:
    def test_single_tree_without_bootstrap_equals_plain_tree(self):
        from transitlink.learn.tree import DecisionTreeClassifier
        from transitlink.seeding import derive_int

        X, y = separable(50, seed=1)
        forest = RandomForestClassifier(
            n_estimators=1, bootstrap=False, max_features=None, seed=7
        ).fit(X, y)
        tree = DecisionTreeClassifier(seed=derive_int(7, "tree", 0)).fit(X, y)
        np.testing.assert_array_equal(
            forest.predict_proba(X), tree.predict_proba(X)
        )

    def test_vote_is_mean_of_tree_probabilities(self):
        X, y = separable(80, seed=2)
        forest = RandomForestClassifier(n_estimators=5, seed=3).fit(X, y)
        stacked = np.stack([t.predict_proba(X) for t in forest.trees])
        np.testing.assert_allclose(forest.predict_proba(X), stacked.mean(axis=0))

    def test_deterministic_per_seed(self):
        X, y = separable(70, seed=4)
        a = RandomForestClassifier(n_estimators=8, seed=11).fit(X, y)
        b = RandomForestClassifier(n_estimators=8, seed=11).fit(X, y)
        np.testing.assert_array_equal(a.predict_proba(X), b.predict_proba(X))

    def test_different_seeds_differ(self):
        X, y = separable(70, seed=4)
        a = RandomForestClassifier(n_estimators=8, seed=1).fit(X, y)
        b = RandomForestClassifier(n_estimators=8, seed=2).fit(X, y)
        assert not np.array_equal(a.predict_proba(X), b.predict_proba(X))

    def test_fits_separable_data(self):
        X, y = separable(200, seed=5)
        forest = RandomForestClassifier(n_estimators=30, seed=0).fit(X, y)
        acc = np.mean((forest.predict_proba(X) >= 0.5) == y)
        assert acc >= 0.97

    def test_params_roundtrip(self):
        X, y = separable(60, seed=6)
        forest = RandomForestClassifier(n_estimators=4, seed=9).fit(X, y)
        clone = RandomForestClassifier(n_estimators=4).load_params(forest.to_params())
        np.testing.assert_array_equal(
            clone.predict_proba(X), forest.predict_proba(X)
        )

    def test_unfitted_raises(self):
        with pytest.raises(DataError):
            RandomForestClassifier().predict_proba(np.zeros((3, 2)))

    def test_bad_n_estimators(self):
        with pytest.raises(ConfigError):
            RandomForestClassifier(n_estimators=0)


class TestAdaBoost:
    def test_perfect_stump_short_circuits(self):
        X = np.array([[0.0], [0.1], [0.9], [1.0]])
        y = np.array([False, False, True, True])
        model = AdaBoostClassifier(n_estimators=25).fit(X, y)
        assert len(model.stumps) == 1
        assert np.array_equal(model.predict_proba(X) >= 0.5, y)

    def test_chance_first_stump_leaves_prior(self, caplog):
        # XOR layout: no stump beats chance, so the ensemble stays empty
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([False, True, True, False])
        import logging

        with caplog.at_level(logging.WARNING, logger="transitlink.learn.ensemble"):
            model = AdaBoostClassifier().fit(X, y)
        assert model.stumps == []
        np.testing.assert_allclose(model.predict_proba(X), 0.5)
        assert any("chance" in r.message for r in caplog.records)

    def test_boosting_beats_single_stump_on_stripes(self):
        # 1-d three-band pattern: one stump cannot separate, several can help
        X = np.linspace(0, 1, 30).reshape(-1, 1)
        y = (X[:, 0] > 0.7) | (X[:, 0] < 0.25)
        model = AdaBoostClassifier(n_estimators=40).fit(X, y)
        stump = AdaBoostClassifier(n_estimators=1).fit(X, y)
        acc_many = np.mean((model.predict_proba(X) >= 0.5) == y)
        acc_one = np.mean((stump.predict_proba(X) >= 0.5) == y)
        assert acc_many >= acc_one
        assert acc_many >= 0.9

    def test_scores_live_in_unit_interval(self):
        X, y = separable(100, seed=8)
        model = AdaBoostClassifier(n_estimators=20).fit(X, y)
        scores = model.predict_proba(X)
        assert np.all((scores >= 0.0) & (scores <= 1.0))

    def test_params_roundtrip(self):
        X, y = separable(60, seed=10)
        model = AdaBoostClassifier(n_estimators=10, seed=4).fit(X, y)
        clone = AdaBoostClassifier().load_params(model.to_params())
        np.testing.assert_array_equal(clone.predict_proba(X), model.predict_proba(X))

    def test_determinism(self):
        X, y = separable(60, seed=12)
        a = AdaBoostClassifier(n_estimators=15, seed=2).fit(X, y)
        b = AdaBoostClassifier(n_estimators=15, seed=2).fit(X, y)
        np.testing.assert_array_equal(a.predict_proba(X), b.predict_proba(X))

    def test_bad_learning_rate(self):
        with pytest.raises(ConfigError):
            AdaBoostClassifier(learning_rate=0.0)

    def test_unfitted_raises(self):
        with pytest.raises(DataError):
            AdaBoostClassifier().predict_proba(np.zeros((3, 2)))
