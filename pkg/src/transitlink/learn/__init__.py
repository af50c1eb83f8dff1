"""Dataset assembly, from-scratch classifiers, and hyperparameter search."""

from .data import (
    LabeledDataset,
    SplitPlan,
    assemble_dataset,
    random_undersample,
    stratified_kfold,
    time_based_split,
    undersample_indices,
)
from .models import (
    ALGORITHM_IDS,
    CLASSIFIER_ROSTER,
    SEARCH_GRIDS,
    XGBOOST_ROSTER_PARAMS,
    ModelSpec,
    TrainedModel,
    load_model,
    roster_spec,
    save_model,
    train,
)
from .search import CandidateResult, SearchResult, cross_validate_spec, randomized_search_cv

__all__ = [
    "ALGORITHM_IDS",
    "CLASSIFIER_ROSTER",
    "CandidateResult",
    "LabeledDataset",
    "ModelSpec",
    "SEARCH_GRIDS",
    "SearchResult",
    "SplitPlan",
    "TrainedModel",
    "XGBOOST_ROSTER_PARAMS",
    "assemble_dataset",
    "cross_validate_spec",
    "load_model",
    "random_undersample",
    "randomized_search_cv",
    "roster_spec",
    "save_model",
    "stratified_kfold",
    "time_based_split",
    "train",
    "undersample_indices",
]
