"""Model specs, training entry point, serialization, and the classifier roster."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ..errors import ConfigError, DataError
from .boosting import GradientBoostingClassifier
from .ensemble import AdaBoostClassifier, RandomForestClassifier
from .linear import LogisticRegressionClassifier
from .tree import DecisionTreeClassifier

FORMAT_VERSION = 1

_LEARNERS = {
    "logistic": LogisticRegressionClassifier,
    "decision_tree": DecisionTreeClassifier,
    "random_forest": RandomForestClassifier,
    "gradient_boosting": GradientBoostingClassifier,
    "adaboost": AdaBoostClassifier,
}

ALGORITHM_IDS: tuple[str, ...] = tuple(sorted(_LEARNERS))

# Hyperparameter names each algorithm accepts (seed is injected separately).
_SCHEMAS: dict[str, tuple[str, ...]] = {
    "logistic": ("C", "penalty", "l1_ratio", "tol", "max_iter", "solver"),
    "decision_tree": (
        "criterion",
        "max_depth",
        "min_samples_split",
        "min_samples_leaf",
        "max_features",
    ),
    "random_forest": (
        "n_estimators",
        "criterion",
        "max_depth",
        "min_samples_split",
        "min_samples_leaf",
        "max_features",
        "bootstrap",
    ),
    "gradient_boosting": (
        "n_estimators",
        "learning_rate",
        "max_depth",
        "min_samples_split",
        "min_samples_leaf",
        "max_features",
        "min_child_weight",
        "reg_lambda",
        "reg_alpha",
        "subsample",
        "colsample_bytree",
        "objective",
    ),
    "adaboost": ("n_estimators", "learning_rate"),
}

# Externally tuned configurations commonly spell the penalties this way.
_ALIASES = {"lambda": "reg_lambda", "alpha": "reg_alpha"}


@dataclass(frozen=True)
class ModelSpec:
    """Algorithm id plus validated hyperparameters and a seed."""

    algorithm: str
    hyperparameters: Mapping[str, object] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.algorithm not in _SCHEMAS:
            raise ConfigError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHM_IDS}"
            )
        resolved = {}
        allowed = _SCHEMAS[self.algorithm]
        for name, value in self.hyperparameters.items():
            canon = _ALIASES.get(name, name)
            if canon not in allowed:
                raise ConfigError(
                    f"{self.algorithm} does not accept hyperparameter {name!r}; "
                    f"allowed: {', '.join(allowed)}"
                )
            resolved[canon] = value
        object.__setattr__(self, "hyperparameters", dict(sorted(resolved.items())))

    def build(self):
        return _LEARNERS[self.algorithm](seed=self.seed, **self.hyperparameters)


@dataclass
class TrainedModel:
    """A fitted learner plus its spec and training metadata."""

    spec: ModelSpec
    learner: object
    feature_names: Optional[tuple[str, ...]] = None
    metadata: dict = field(default_factory=dict)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return self.predict_proba(X[None, :])[0]
        probs = self.learner.predict_proba(X)
        if not np.all(np.isfinite(probs)) or probs.min() < 0.0 or probs.max() > 1.0:
            raise DataError("model produced scores outside [0,1]")
        return probs

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Labels at the fixed 0.5 operating point."""
        return self.predict_proba(X) > 0.5


def train(
    spec: ModelSpec,
    X: np.ndarray,
    y: np.ndarray,
    feature_names: Optional[Sequence[str]] = None,
) -> TrainedModel:
    """Fit one learner; rejects NaN features and single-class labels."""
    X = np.asarray(X, dtype=float)
    yb = np.asarray(y, dtype=bool)
    if X.ndim != 2 or X.shape[0] != yb.shape[0]:
        raise DataError(f"feature/label shape mismatch: {X.shape} vs {yb.shape}")
    if X.shape[0] < 2:
        raise DataError("training needs at least 2 rows")
    if not np.all(np.isfinite(X)):
        raise DataError("training features contain NaN or infinity")
    if yb.all() or not yb.any():
        raise DataError("training labels contain a single class")
    if feature_names is not None and len(feature_names) != X.shape[1]:
        raise DataError("feature name count does not match the matrix width")

    learner = spec.build()
    learner.fit(X, yb)
    metadata: dict = {"n_rows": int(X.shape[0]), "n_features": int(X.shape[1])}
    if hasattr(learner, "n_iter_"):
        metadata["iterations"] = int(learner.n_iter_)
    if getattr(learner, "loss_trace_", None):
        metadata["final_loss"] = float(learner.loss_trace_[-1])
    return TrainedModel(
        spec=spec,
        learner=learner,
        feature_names=tuple(feature_names) if feature_names is not None else None,
        metadata=metadata,
    )


def model_payload(model: TrainedModel) -> dict:
    """Self-describing serialization of a trained model."""
    return {
        "format_version": FORMAT_VERSION,
        "algorithm": model.spec.algorithm,
        "hyperparameters": model.spec.hyperparameters,
        "seed": model.spec.seed,
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "metadata": model.metadata,
        "params": model.learner.to_params(),
    }


def model_from_payload(payload: dict) -> TrainedModel:
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {version!r}")
    spec = ModelSpec(
        algorithm=payload["algorithm"],
        hyperparameters=payload["hyperparameters"],
        seed=payload["seed"],
    )
    learner = spec.build()
    learner.load_params(payload["params"])
    names = payload.get("feature_names")
    return TrainedModel(
        spec=spec,
        learner=learner,
        feature_names=tuple(names) if names else None,
        metadata=payload.get("metadata", {}),
    )


def save_model(model: TrainedModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(model_payload(model), handle, sort_keys=True)
        handle.write("\n")


def load_model(path: str) -> TrainedModel:
    with open(path, encoding="utf-8") as handle:
        return model_from_payload(json.load(handle))


# The roster used by the evaluation matrix. The xgboost entry runs the
# gradient-boosting learner under an externally tuned configuration.
XGBOOST_ROSTER_PARAMS: dict[str, object] = {
    "reg_lambda": 0.5650701862593042,
    "reg_alpha": 0.0016650896783581535,
    "colsample_bytree": 1.0,
    "subsample": 0.5,
    "learning_rate": 0.009,
    "n_estimators": 625,
    "objective": "reg:squarederror",
    "max_depth": 5,
    "min_child_weight": 6,
}

CLASSIFIER_ROSTER: dict[str, tuple[str, dict[str, object]]] = {
    "adaboost": ("adaboost", {}),
    "decision_tree": ("decision_tree", {}),
    "gradient_boosting": ("gradient_boosting", {}),
    "logistic_regression": ("logistic", {}),
    "random_forest": ("random_forest", {}),
    "xgboost": ("gradient_boosting", XGBOOST_ROSTER_PARAMS),
}


def roster_spec(name: str, seed: int = 0) -> ModelSpec:
    """ModelSpec for a roster entry name."""
    try:
        algorithm, overrides = CLASSIFIER_ROSTER[name]
    except KeyError:
        raise ConfigError(
            f"unknown classifier {name!r}; expected one of {', '.join(sorted(CLASSIFIER_ROSTER))}"
        ) from None
    return ModelSpec(algorithm=algorithm, hyperparameters=overrides, seed=seed)


# Hyperparameter grids for randomized search, keyed by roster name.
SEARCH_GRIDS: dict[str, dict[str, list]] = {
    "gradient_boosting": {
        "n_estimators": [50, 100, 200, 300],
        "learning_rate": [0.01, 0.05, 0.1, 0.2],
        "max_depth": [3, 5, 7, 9],
        "min_samples_split": [2, 5, 10],
        "min_samples_leaf": [1, 2, 4],
        "max_features": ["sqrt", "log2"],
    },
    "adaboost": {
        "n_estimators": [50, 100, 200, 400],
        "learning_rate": [0.01, 0.1, 0.5, 1.0],
    },
    "logistic_regression": {
        "C": [0.001, 0.01, 0.1, 1, 10, 100],
        "penalty": ["l1", "l2", "elasticnet"],
        "solver": ["liblinear", "saga"],
    },
    "random_forest": {
        "n_estimators": [100, 200, 500, 1000],
        "max_features": ["auto", "sqrt", "log2"],
        "max_depth": [10, 20, 30, None],
        "min_samples_split": [2, 5, 10],
        "min_samples_leaf": [1, 2, 4],
        "bootstrap": [True, False],
    },
    "decision_tree": {
        "max_features": ["auto", "sqrt", "log2"],
        "max_depth": [10, 20, 30, None],
        "min_samples_split": [2, 5, 10],
        "min_samples_leaf": [1, 2, 4],
        "criterion": ["gini", "entropy"],
    },
}


def grid_for(name: str) -> dict[str, list]:
    try:
        return SEARCH_GRIDS[name]
    except KeyError:
        raise ConfigError(
            f"no search grid for classifier {name!r}; "
            f"grids exist for: {', '.join(sorted(SEARCH_GRIDS))}"
        ) from None


def roster_algorithm(name: str) -> str:
    if name not in CLASSIFIER_ROSTER:
        raise ConfigError(f"unknown classifier {name!r}")
    return CLASSIFIER_ROSTER[name][0]
