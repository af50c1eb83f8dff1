"""Metrics, experiment protocols, and permutation feature importance.

Two protocols mirror the study design. Simultaneous: every month gets its own
70/30 split, its own class-balanced training side, and its own model; test
predictions pool into one confusion matrix. Non-simultaneous: one model
trained on a range of earlier months is applied unchanged to strictly later
months. The fixed classification threshold is 0.5 throughout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .learn.data import LabeledDataset, time_based_split, undersample_indices
from .learn.models import ModelSpec, TrainedModel, train
from .months import MonthKey
from .seeding import derive, derive_int

log = logging.getLogger(__name__)

TRAIN_FRACTION_DEFAULT = 0.7


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise DataError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, y_pred: np.ndarray) -> "ConfusionMatrix":
        t = np.asarray(y_true, dtype=bool)
        p = np.asarray(y_pred, dtype=bool)
        if t.shape != p.shape:
            raise DataError("prediction/truth length mismatch")
        return cls(
            tp=int((p & t).sum()),
            fp=int((p & ~t).sum()),
            tn=int((~p & ~t).sum()),
            fn=int((~p & t).sum()),
        )

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    """Mean of the two per-class recalls; needs both classes in the truth."""
    pos = cm.tp + cm.fn
    neg = cm.tn + cm.fp
    if pos == 0 or neg == 0:
        raise DataError("balanced accuracy undefined: a class is absent from the truth")
    return 0.5 * (cm.tp / pos + cm.tn / neg)


def f1(cm: ConfusionMatrix) -> float:
    denominator = 2 * cm.tp + cm.fp + cm.fn
    if denominator == 0:
        raise DataError("f1 undefined: no positive truths or predictions")
    return 2 * cm.tp / denominator


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-statistic AUC; tied scores contribute half (midranks)."""
    s = np.asarray(scores, dtype=float)
    t = np.asarray(labels, dtype=bool)
    n_pos = int(t.sum())
    n_neg = int(t.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("roc auc undefined: labels contain a single class")
    order = np.argsort(s, kind="stable")
    sorted_scores = s[order]
    ranks = np.empty(t.size, dtype=float)
    i = 0
    while i < t.size:
        j = i
        while j + 1 < t.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # average 1-based rank over the tie block [i, j]
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    rank_sum_pos = float(ranks[t].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class NullBaseline:
    """Majority-class predictor fit on training labels."""

    predicted_class: bool
    accuracy: float
    confusion: ConfusionMatrix

    def balanced_accuracy(self) -> float:
        return balanced_accuracy(self.confusion)


def null_baseline(train_labels: np.ndarray, test_labels: np.ndarray) -> NullBaseline:
    """Score the constant majority-class prediction on the test labels.

    A training tie predicts the positive class. Balanced accuracy of the
    result is exactly 0.5 whenever the test side carries both classes, and
    is an error when it does not.
    """
    tr = np.asarray(train_labels, dtype=bool)
    te = np.asarray(test_labels, dtype=bool)
    if tr.size == 0 or te.size == 0:
        raise DataError("null baseline needs non-empty train and test labels")
    majority = bool(tr.sum() * 2 >= tr.size)
    pred = np.full(te.size, majority)
    cm = ConfusionMatrix.from_predictions(te, pred)
    return NullBaseline(
        predicted_class=majority,
        accuracy=float((pred == te).mean()),
        confusion=cm,
    )


@dataclass(frozen=True)
class MonthOutcome:
    month: MonthKey
    n_test: int
    balanced_accuracy: Optional[float]


@dataclass(frozen=True)
class MetricsReport:
    protocol: str
    classifier: str
    feature_set: str
    months: tuple[MonthKey, ...]
    seed: int
    balanced_accuracy: float
    f1: float
    roc_auc: float
    null_balanced_accuracy: float
    confusion: ConfusionMatrix
    per_month: tuple[MonthOutcome, ...] = ()
    months_skipped: tuple[MonthKey, ...] = ()

    def to_record(self) -> dict:
        return {
            "protocol": self.protocol,
            "classifier": self.classifier,
            "feature_set": self.feature_set,
            "months": [str(m) for m in self.months],
            "seed": self.seed,
            "ba": self.balanced_accuracy,
            "f1": self.f1,
            "auc": self.roc_auc,
            "null_ba": self.null_balanced_accuracy,
            "tp": self.confusion.tp,
            "fp": self.confusion.fp,
            "tn": self.confusion.tn,
            "fn": self.confusion.fn,
            "per_month": [
                {"month": str(o.month), "n_test": o.n_test, "ba": o.balanced_accuracy}
                for o in self.per_month
            ],
            "months_skipped": [str(m) for m in self.months_skipped],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "MetricsReport":
        return cls(
            protocol=rec["protocol"],
            classifier=rec["classifier"],
            feature_set=rec["feature_set"],
            months=tuple(MonthKey.parse(m) for m in rec["months"]),
            seed=rec["seed"],
            balanced_accuracy=rec["ba"],
            f1=rec["f1"],
            roc_auc=rec["auc"],
            null_balanced_accuracy=rec["null_ba"],
            confusion=ConfusionMatrix(
                tp=rec["tp"], fp=rec["fp"], tn=rec["tn"], fn=rec["fn"]
            ),
            per_month=tuple(
                MonthOutcome(
                    month=MonthKey.parse(o["month"]),
                    n_test=o["n_test"],
                    balanced_accuracy=o["ba"],
                )
                for o in rec.get("per_month", [])
            ),
            months_skipped=tuple(MonthKey.parse(m) for m in rec.get("months_skipped", [])),
        )


@dataclass
class FittedProtocol:
    """Trained models plus the row indices they must be scored on."""

    protocol: str
    spec: ModelSpec
    seed: int
    classifier: str
    feature_set: str
    # (month scope, model, train indices, test indices); simultaneous keeps
    # one entry per month, nonsimultaneous a single pooled entry.
    entries: list[tuple[tuple[MonthKey, ...], TrainedModel, np.ndarray, np.ndarray]] = field(
        default_factory=list
    )
    months_skipped: tuple[MonthKey, ...] = ()


def _safe_month_ba(y_true: np.ndarray, y_pred: np.ndarray) -> Optional[float]:
    try:
        return balanced_accuracy(ConfusionMatrix.from_predictions(y_true, y_pred))
    except DataError:
        return None


def fit_simultaneous(
    ds: LabeledDataset,
    spec: ModelSpec,
    seed: int,
    train_fraction: float = TRAIN_FRACTION_DEFAULT,
    classifier: str = "",
    feature_set: str = "",
) -> FittedProtocol:
    """One model per month on that month's balanced 70% side.

    Months whose training side cannot be balanced (single class) are skipped
    with a warning and excluded from scoring.
    """
    plan = time_based_split(ds, train_fraction=train_fraction, seed=seed)
    train_set = set(int(i) for i in plan.train_idx)
    fitted = FittedProtocol(
        protocol="simultaneous",
        spec=spec,
        seed=seed,
        classifier=classifier,
        feature_set=feature_set,
    )
    skipped: list[MonthKey] = []
    for month in ds.months_present():
        month_idx = ds.month_indices(month)
        train_idx = np.array([i for i in month_idx if int(i) in train_set], dtype=int)
        test_idx = np.array([i for i in month_idx if int(i) not in train_set], dtype=int)
        if test_idx.size == 0:
            skipped.append(month)
            log.warning("month %s has no test rows; skipped", month)
            continue
        try:
            balanced = undersample_indices(
                ds.y, derive_int(seed, "balance", str(month)), train_idx
            )
        except DataError:
            skipped.append(month)
            log.warning("month %s training side has a single class; skipped", month)
            continue
        model = train(spec, ds.X[balanced], ds.y[balanced], feature_names=ds.feature_names)
        fitted.entries.append(((month,), model, balanced, test_idx))
    if not fitted.entries:
        raise DataError("every month was skipped; nothing to evaluate")
    fitted.months_skipped = tuple(skipped)
    return fitted


def fit_nonsimultaneous(
    ds: LabeledDataset,
    train_months: Sequence[MonthKey],
    test_months: Sequence[MonthKey],
    spec: ModelSpec,
    seed: int,
    classifier: str = "",
    feature_set: str = "",
) -> FittedProtocol:
    """One model on pooled earlier months, tested on strictly later months."""
    train_set = set(train_months)
    test_set = set(test_months)
    if not train_set or not test_set:
        raise ConfigError("both month ranges must be non-empty")
    if train_set & test_set:
        raise ConfigError(
            f"month ranges overlap: {sorted(str(m) for m in train_set & test_set)}"
        )
    if max(train_set) >= min(test_set):
        raise ConfigError("training months must strictly precede test months")
    present = set(ds.months_present())
    for m in sorted(train_set | test_set):
        if m not in present:
            raise DataError(f"month {m} has no rows in the dataset")

    train_idx = np.array(
        [i for i, m in enumerate(ds.months) if m in train_set], dtype=int
    )
    test_idx = np.array([i for i, m in enumerate(ds.months) if m in test_set], dtype=int)
    balanced = undersample_indices(ds.y, derive_int(seed, "balance", "pooled"), train_idx)
    model = train(spec, ds.X[balanced], ds.y[balanced], feature_names=ds.feature_names)
    return FittedProtocol(
        protocol="nonsimultaneous",
        spec=spec,
        seed=seed,
        classifier=classifier,
        feature_set=feature_set,
        entries=[(tuple(sorted(test_set)), model, balanced, test_idx)],
    )


def evaluate_fitted(fitted: FittedProtocol, ds: LabeledDataset) -> MetricsReport:
    """Score a fitted protocol: pooled confusion matrix, pooled AUC, null
    baseline on pooled train labels, and per-month balanced accuracies."""
    all_scores: list[np.ndarray] = []
    all_truth: list[np.ndarray] = []
    all_train_truth: list[np.ndarray] = []
    per_month: list[MonthOutcome] = []
    cm = ConfusionMatrix()
    months_covered: set[MonthKey] = set()

    for month_scope, model, train_idx, test_idx in fitted.entries:
        scores = model.predict_proba(ds.X[test_idx])
        truth = ds.y[test_idx]
        preds = scores > 0.5
        cm = cm + ConfusionMatrix.from_predictions(truth, preds)
        all_scores.append(scores)
        all_truth.append(truth)
        all_train_truth.append(ds.y[train_idx])
        months_covered.update(month_scope)
        for month in month_scope:
            mask = np.array([ds.months[i] == month for i in test_idx], dtype=bool)
            if not mask.any():
                per_month.append(MonthOutcome(month, 0, None))
                continue
            per_month.append(
                MonthOutcome(
                    month,
                    int(mask.sum()),
                    _safe_month_ba(truth[mask], preds[mask]),
                )
            )

    pooled_scores = np.concatenate(all_scores)
    pooled_truth = np.concatenate(all_truth)
    pooled_train = np.concatenate(all_train_truth)
    null = null_baseline(pooled_train, pooled_truth)
    return MetricsReport(
        protocol=fitted.protocol,
        classifier=fitted.classifier,
        feature_set=fitted.feature_set,
        months=tuple(sorted(months_covered)),
        seed=fitted.seed,
        balanced_accuracy=balanced_accuracy(cm),
        f1=f1(cm),
        roc_auc=roc_auc(pooled_scores, pooled_truth),
        null_balanced_accuracy=null.balanced_accuracy(),
        confusion=cm,
        per_month=tuple(sorted(per_month, key=lambda o: o.month)),
        months_skipped=fitted.months_skipped,
    )


def run_simultaneous(
    ds: LabeledDataset,
    spec: ModelSpec,
    seed: int,
    train_fraction: float = TRAIN_FRACTION_DEFAULT,
    classifier: str = "",
    feature_set: str = "",
) -> MetricsReport:
    fitted = fit_simultaneous(
        ds, spec, seed, train_fraction=train_fraction, classifier=classifier, feature_set=feature_set
    )
    return evaluate_fitted(fitted, ds)


def run_nonsimultaneous(
    ds: LabeledDataset,
    train_months: Sequence[MonthKey],
    test_months: Sequence[MonthKey],
    spec: ModelSpec,
    seed: int,
    classifier: str = "",
    feature_set: str = "",
) -> MetricsReport:
    fitted = fit_nonsimultaneous(
        ds, train_months, test_months, spec, seed, classifier=classifier, feature_set=feature_set
    )
    return evaluate_fitted(fitted, ds)


def default_month_ranges(
    months: Sequence[MonthKey], fraction: float = TRAIN_FRACTION_DEFAULT
) -> tuple[list[MonthKey], list[MonthKey]]:
    """First fraction of the sorted months trains, the remainder tests."""
    ordered = sorted(set(months))
    if len(ordered) < 2:
        raise DataError("need at least 2 months to form train/test ranges")
    cut = min(max(1, int(len(ordered) * fraction)), len(ordered) - 1)
    return ordered[:cut], ordered[cut:]


_METRIC_NAMES = ("balanced_accuracy", "f1", "roc_auc")


def _metric_value(name: str, y_true: np.ndarray, scores: np.ndarray) -> float:
    if name == "balanced_accuracy":
        return balanced_accuracy(ConfusionMatrix.from_predictions(y_true, scores > 0.5))
    if name == "f1":
        return f1(ConfusionMatrix.from_predictions(y_true, scores > 0.5))
    if name == "roc_auc":
        return roc_auc(scores, y_true)
    raise ConfigError(f"unknown metric {name!r}; expected one of {_METRIC_NAMES}")


@dataclass(frozen=True)
class FeatureImportance:
    feature: str
    mean_drop: float
    per_repeat: tuple[float, ...]


@dataclass(frozen=True)
class ImportanceReport:
    """Permutation importance: metric drop when one column is shuffled.

    Serialized reports carry the method name so the numbers are never
    mistaken for a different attribution scheme.
    """

    method: str
    metric: str
    baseline: float
    repeats: int
    seed: int
    entries: tuple[FeatureImportance, ...]


def permutation_importance(
    model: TrainedModel,
    X: np.ndarray,
    y: np.ndarray,
    metric: str = "balanced_accuracy",
    repeats: int = 10,
    seed: int = 0,
    features: Optional[Sequence[str]] = None,
) -> ImportanceReport:
    """Mean metric drop per feature over seeded column permutations."""
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    X = np.asarray(X, dtype=float)
    yb = np.asarray(y, dtype=bool)
    if X.shape[0] < 2:
        raise DataError("permutation importance needs at least 2 test rows")
    names = list(model.feature_names) if model.feature_names else [
        f"f{i}" for i in range(X.shape[1])
    ]
    if len(names) != X.shape[1]:
        raise DataError("feature name count does not match the matrix width")
    if features is None:
        targets = list(range(len(names)))
    else:
        targets = []
        for f in features:
            if f not in names:
                raise DataError(f"unknown feature name {f!r}")
            targets.append(names.index(f))

    baseline = _metric_value(metric, yb, model.predict_proba(X))
    entries: list[FeatureImportance] = []
    for col in targets:
        drops: list[float] = []
        for r in range(repeats):
            rng = derive(seed, "perm", r, col)
            shuffled = X.copy()
            shuffled[:, col] = shuffled[rng.permutation(X.shape[0]), col]
            drops.append(baseline - _metric_value(metric, yb, model.predict_proba(shuffled)))
        entries.append(
            FeatureImportance(
                feature=names[col],
                mean_drop=float(np.mean(drops)),
                per_repeat=tuple(drops),
            )
        )
    return ImportanceReport(
        method="permutation",
        metric=metric,
        baseline=baseline,
        repeats=repeats,
        seed=seed,
        entries=tuple(entries),
    )


def metrics_matrix(reports: Sequence[MetricsReport]) -> str:
    """Classifier x feature-set table of mean balanced accuracy."""
    if not reports:
        raise DataError("no reports to aggregate")
    classifiers = sorted({r.classifier for r in reports})
    sets = sorted({r.feature_set for r in reports})
    cells: dict[tuple[str, str], list[float]] = {}
    for r in reports:
        cells.setdefault((r.classifier, r.feature_set), []).append(r.balanced_accuracy)
    lines = ["classifier," + ",".join(sets)]
    for c in classifiers:
        row = [c]
        for s in sets:
            values = cells.get((c, s))
            row.append(f"{np.mean(values):.6f}" if values else "")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
