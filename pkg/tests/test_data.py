"""Dataset assembly, time-aware splitting, undersampling, fold building."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transitlink.errors import DataError
from transitlink.features import FeatureVector
from transitlink.learn.data import (
    LabeledDataset,
    assemble_dataset,
    random_undersample,
    stratified_kfold,
    time_based_split,
    undersample_indices,
)
from transitlink.months import MonthKey
from tests.conftest import M1

M2 = MonthKey(2020, 2)
M3 = MonthKey(2020, 3)


WIDTHS = {"tf": 11, "wtf": 11, "ncm": 6}


def vec(month, source, target, set_id="tf", values=(1.0, 2.0), label=True):
    # pad to the canonical component width of the set
    padded = tuple(values) + (0.0,) * (WIDTHS[set_id] - len(values))
    return FeatureVector(
        month=month,
        source=source,
        target=target,
        set_id=set_id,
        values=padded,
        label=label,
    )


def toy_dataset(per_month=20, months=(M1, M2, M3), seed=0, balance=0.5):
    rng = np.random.default_rng(seed)
    rows = []
    for m in months:
        for i in range(per_month):
            rows.append(
                vec(
                    m,
                    f"s{i}",
                    f"t{i}",
                    values=(float(i), rng.random()),
                    label=bool(rng.random() < balance),
                )
            )
    return assemble_dataset(rows, sets=["tf"])


class TestAssemble:
    def test_row_order_is_month_then_pair(self):
        rows = [
            vec(M2, "b", "c"),
            vec(M1, "b", "a"),
            vec(M1, "a", "b"),
        ]
        ds = assemble_dataset(rows, sets=["tf"])
        assert ds.months == (M1, M1, M2)
        assert ds.X.shape == (3, 11)

    def test_multiple_sets_concatenate_columns(self):
        rows = [
            vec(M1, "a", "b", set_id="tf", values=(1.0, 2.0)),
            vec(M1, "a", "b", set_id="ncm", values=(9.0,)),
        ]
        ds = assemble_dataset(rows, sets=["tf", "ncm"])
        assert ds.X.shape == (1, 17)
        assert ds.X[0, 0] == 1.0
        assert ds.X[0, 1] == 2.0
        assert ds.X[0, 11] == 9.0

    def test_missing_set_for_a_row_is_an_error(self):
        rows = [vec(M1, "a", "b", set_id="tf")]
        with pytest.raises(DataError):
            assemble_dataset(rows, sets=["tf", "ncm"])

    def test_unlabeled_row_is_an_error(self):
        rows = [vec(M1, "a", "b", label=None)]
        with pytest.raises(DataError, match="label"):
            assemble_dataset(rows, sets=["tf"])

    def test_feature_names_follow_set_order(self):
        rows = [
            vec(M1, "a", "b", set_id="tf", values=(1.0, 2.0)),
            vec(M1, "a", "b", set_id="ncm", values=(9.0,)),
        ]
        ds = assemble_dataset(rows, sets=["tf", "ncm"])
        assert len(ds.feature_names) == 17
        assert ds.feature_names[0] == "cn"
        assert ds.feature_names[11] == "deg_src"

    def test_subset_keeps_alignment(self):
        ds = toy_dataset(per_month=5)
        sub = ds.subset(np.array([0, 7, 9]))
        assert sub.n_rows == 3
        np.testing.assert_array_equal(sub.X, ds.X[[0, 7, 9]])
        np.testing.assert_array_equal(sub.y, ds.y[[0, 7, 9]])


class TestTimeBasedSplit:
    def test_fraction_per_month(self):
        ds = toy_dataset(per_month=10)
        plan = time_based_split(ds, train_fraction=0.7, seed=1)
        for month in (M1, M2, M3):
            idx = ds.month_indices(month)
            train_here = np.intersect1d(plan.train_idx, idx)
            assert len(train_here) == 7

    def test_partition_is_exact(self):
        ds = toy_dataset(per_month=9)
        plan = time_based_split(ds, seed=2)
        combined = np.sort(np.concatenate([plan.train_idx, plan.test_idx]))
        np.testing.assert_array_equal(combined, np.arange(ds.n_rows))

    def test_deterministic_per_seed(self):
        ds = toy_dataset()
        a = time_based_split(ds, seed=5)
        b = time_based_split(ds, seed=5)
        np.testing.assert_array_equal(a.train_idx, b.train_idx)
        c = time_based_split(ds, seed=6)
        assert not np.array_equal(a.train_idx, c.train_idx)

    def test_single_row_month_goes_to_train(self):
        rows = [vec(M1, "a", "b"), vec(M1, "a", "c", label=False), vec(M2, "a", "b")]
        ds = assemble_dataset(rows, sets=["tf"])
        plan = time_based_split(ds, seed=0)
        m2_idx = ds.month_indices(M2)
        assert set(m2_idx.tolist()).issubset(set(plan.train_idx.tolist()))

    def test_every_month_keeps_at_least_one_test_row(self):
        ds = toy_dataset(per_month=3)
        plan = time_based_split(ds, train_fraction=0.99, seed=3)
        for month in ds.months_present():
            idx = ds.month_indices(month)
            assert len(np.intersect1d(plan.test_idx, idx)) >= 1


class TestUndersample:
    def test_balances_classes_exactly(self):
        y = np.array([True] * 30 + [False] * 10)
        idx = undersample_indices(y, seed=1)
        assert len(idx) == 20
        assert int(y[idx].sum()) == 10

    def test_respects_candidate_restriction(self):
        y = np.array([True, True, False, False, True, False])
        pool = np.array([0, 1, 2])
        idx = undersample_indices(y, seed=4, indices=pool)
        assert set(idx.tolist()).issubset(set(pool.tolist()))

    def test_sorted_and_deterministic(self):
        y = np.random.default_rng(0).random(50) < 0.7
        a = undersample_indices(y, seed=9)
        b = undersample_indices(y, seed=9)
        np.testing.assert_array_equal(a, b)
        assert np.all(np.diff(a) > 0)

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            undersample_indices(np.ones(5, dtype=bool), seed=0)

    def test_random_undersample_returns_balanced_dataset(self):
        ds = toy_dataset(per_month=20, balance=0.3, seed=2)
        balanced = random_undersample(ds, seed=3)
        assert int(balanced.y.sum()) * 2 == balanced.n_rows


class TestStratifiedKFold:
    def test_test_folds_partition_all_rows(self):
        y = np.random.default_rng(1).random(37) < 0.4
        folds = stratified_kfold(y, k=4, seed=0)
        everything = np.sort(np.concatenate([test for _, test in folds]))
        np.testing.assert_array_equal(everything, np.arange(37))

    def test_train_test_complementary(self):
        y = np.random.default_rng(2).random(20) < 0.5
        for train, test in stratified_kfold(y, k=3, seed=5):
            assert np.intersect1d(train, test).size == 0
            assert len(train) + len(test) == 20

    def test_class_counts_near_even(self):
        y = np.array([True] * 20 + [False] * 20)
        folds = stratified_kfold(y, k=5, seed=1)
        for _, test in folds:
            assert int(y[test].sum()) == 4

    def test_k_bounds(self):
        y = np.array([True, False, True, False])
        with pytest.raises(DataError):
            stratified_kfold(y, k=1, seed=0)
        with pytest.raises(DataError):
            stratified_kfold(y, k=5, seed=0)

    @settings(max_examples=30, deadline=None)
    @given(
        n=st.integers(8, 60),
        k=st.integers(2, 4),
        seed=st.integers(0, 50),
    )
    def test_property_fold_sizes_balanced(self, n, k, seed):
        y = np.random.default_rng(seed).random(n) < 0.5
        if y.all() or not y.any():
            y[0] = not y[0]
        folds = stratified_kfold(y, k=k, seed=seed)
        sizes = sorted(len(test) for _, test in folds)
        assert sizes[-1] - sizes[0] <= 2
