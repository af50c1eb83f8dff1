"""Run configuration: flat key=value file, flag overrides, validation."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from typing import Optional

from .errors import ConfigError
from .features import FEATURE_SET_IDS
from .learn.models import CLASSIFIER_ROSTER
from .months import MonthKey

KINDS = ("rail", "air", "synthetic")
PROTOCOLS = ("simultaneous", "nonsimultaneous")


@dataclass(frozen=True)
class RunConfig:
    kind: str = "synthetic"
    input: Optional[str] = None
    out: str = "out"
    min_rides: int = 4
    percentile: float = 0.5
    station_allowlist: Optional[str] = None
    feature_sets: tuple[str, ...] = FEATURE_SET_IDS
    classifiers: tuple[str, ...] = tuple(sorted(CLASSIFIER_ROSTER))
    protocol: str = "simultaneous"
    train_months: tuple[str, ...] = ()
    test_months: tuple[str, ...] = ()
    train_fraction: float = 0.7
    seed: int = 0
    seeds: tuple[int, ...] = ()
    n_iter: int = 25
    cv_folds: int = 10
    importance_metric: str = "balanced_accuracy"
    importance_repeats: int = 10
    error_cap: int = 1000
    # synthetic corpus settings
    synth_months: int = 24
    synth_nodes: int = 60
    synth_edge_probability: float = 0.0928
    synth_weight_min: int = 1
    synth_weight_max: int = 9
    synth_signal_feature: str = "cn"
    synth_signal_strength: float = 4.0
    synth_stationary: bool = True

    def effective_seeds(self) -> tuple[int, ...]:
        return self.seeds if self.seeds else (self.seed,)

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    def validate(self, require_input: bool = False) -> None:
        problems: list[str] = []
        if self.kind not in KINDS:
            problems.append(f"kind: expected one of {KINDS}, got {self.kind!r}")
        if not 0.0 < self.percentile < 1.0:
            problems.append(f"percentile: must lie in (0,1), got {self.percentile}")
        if self.min_rides < 1:
            problems.append(f"min_rides: must be >= 1, got {self.min_rides}")
        if not 0.0 < self.train_fraction < 1.0:
            problems.append(
                f"train_fraction: must lie in (0,1), got {self.train_fraction}"
            )
        for s in self.feature_sets:
            if s not in FEATURE_SET_IDS:
                problems.append(f"feature_sets: unknown set {s!r}")
        for c in self.classifiers:
            if c not in CLASSIFIER_ROSTER:
                problems.append(f"classifiers: unknown classifier {c!r}")
        if self.protocol not in PROTOCOLS:
            problems.append(f"protocol: expected one of {PROTOCOLS}, got {self.protocol!r}")
        for label, months in (("train_months", self.train_months), ("test_months", self.test_months)):
            for m in months:
                try:
                    MonthKey.parse(m)
                except Exception:
                    problems.append(f"{label}: cannot parse month {m!r}")
        if self.n_iter < 1:
            problems.append(f"n_iter: must be >= 1, got {self.n_iter}")
        if self.cv_folds < 2:
            problems.append(f"cv_folds: must be >= 2, got {self.cv_folds}")
        if self.importance_repeats < 1:
            problems.append(
                f"importance_repeats: must be >= 1, got {self.importance_repeats}"
            )
        if require_input and self.kind in ("rail", "air"):
            if not self.input:
                problems.append("input: required for rail/air ingestion")
            elif not os.path.exists(self.input):
                problems.append(f"input: path does not exist: {self.input}")
        if self.station_allowlist and not os.path.exists(self.station_allowlist):
            problems.append(
                f"station_allowlist: path does not exist: {self.station_allowlist}"
            )
        if problems:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))

    def parsed_train_months(self) -> list[MonthKey]:
        return [MonthKey.parse(m) for m in self.train_months]

    def parsed_test_months(self) -> list[MonthKey]:
        return [MonthKey.parse(m) for m in self.test_months]


_BOOL_FIELDS = {"synth_stationary"}
_INT_FIELDS = {
    "min_rides",
    "seed",
    "n_iter",
    "cv_folds",
    "importance_repeats",
    "error_cap",
    "synth_months",
    "synth_nodes",
    "synth_weight_min",
    "synth_weight_max",
}
_FLOAT_FIELDS = {
    "percentile",
    "train_fraction",
    "synth_edge_probability",
    "synth_signal_strength",
}
_LIST_FIELDS = {"feature_sets", "classifiers", "train_months", "test_months", "seeds"}
_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _coerce(name: str, raw: str):
    value = raw.strip()
    if name in _BOOL_FIELDS:
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if name in _INT_FIELDS:
            return int(value)
        if name in _FLOAT_FIELDS:
            return float(value)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse number {raw!r}") from None
    if name in _LIST_FIELDS:
        items = tuple(item.strip() for item in value.split(",") if item.strip())
        if name == "seeds":
            try:
                return tuple(int(i) for i in items)
            except ValueError:
                raise ConfigError(f"seeds: expected integers, got {raw!r}") from None
        return items
    if value == "":
        return None
    return value


def load_config_file(path: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment; unknown keys error."""
    if not os.path.exists(path):
        raise ConfigError(f"config file does not exist: {path}")
    out: dict = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{path}:{line_no}: expected key=value, got {line.rstrip()!r}")
            key, _, raw = body.partition("=")
            key = key.strip()
            if key not in _FIELD_NAMES:
                raise ConfigError(f"{path}:{line_no}: unknown configuration key {key!r}")
            out[key] = _coerce(key, raw)
    return out


def build_config(file_values: dict, flag_values: dict) -> RunConfig:
    """Flags override file values; both override defaults."""
    merged = dict(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    config = RunConfig()
    try:
        config = replace(config, **merged)
    except TypeError as exc:
        raise ConfigError(f"bad configuration: {exc}") from None
    return config
