"""Stage artifact files: delimited text with a manifest line.

Every artifact starts with `# manifest digest=<sha256> seed=<int> version=<v>`
so a reader can tell which configuration and seed produced it. Nothing in an
artifact depends on wall clock; identical configuration, inputs, and seed
reproduce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .errors import DataError, FormatError
from .evaluation import FittedProtocol, MetricsReport
from .features import COMPONENTS, FeatureVector, component_names
from .ingest import ServiceTrajectory
from .learn.models import TrainedModel, model_from_payload, model_payload
from .learn.search import SearchResult
from .months import MonthKey
from .snapshots import GraphSnapshot, MonthlyEdgeAggregate

MANIFEST_PREFIX = "# manifest "


def config_digest(settings: dict, input_paths: Sequence[str] = ()) -> str:
    """sha256 over canonical settings plus the content digests of inputs."""
    h = hashlib.sha256()
    for key in sorted(settings):
        h.update(f"{key}={settings[key]!r}\n".encode("utf-8"))
    for path in input_paths:
        h.update(os.path.basename(path).encode("utf-8"))
        file_hash = hashlib.sha256()
        with open(path, "rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 20), b""):
                file_hash.update(chunk)
        h.update(file_hash.hexdigest().encode("utf-8"))
    return h.hexdigest()


def manifest_line(digest: str, seed: int) -> str:
    return f"{MANIFEST_PREFIX}digest={digest} seed={seed} version={__version__}"


def read_manifest(path: str) -> dict:
    with open(path, encoding="utf-8") as handle:
        first = handle.readline().rstrip("\n")
    if not first.startswith(MANIFEST_PREFIX):
        raise FormatError(f"{path}: missing manifest line")
    out = {}
    for token in first[len(MANIFEST_PREFIX):].split():
        key, _, value = token.partition("=")
        out[key] = value
    return out


def _write(path: str, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for line in lines:
            handle.write(line)
            handle.write("\n")


def _data_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as handle:
        lines = [line.rstrip("\n") for line in handle]
    if not lines or not lines[0].startswith(MANIFEST_PREFIX):
        raise FormatError(f"{path}: missing manifest line")
    return [line for line in lines[1:] if line and not line.startswith("#")]


def _token(value: str) -> str:
    """Field values ride a comma-delimited format; reject values that would
    corrupt it rather than silently quoting."""
    if "," in value or "\n" in value or value.startswith("#"):
        raise DataError(f"value {value!r} cannot appear in a delimited artifact")
    return value


def _fmt_bool(value: Optional[bool]) -> str:
    return "" if value is None else str(bool(value))


def _parse_opt_bool(text: str) -> Optional[bool]:
    if text == "":
        return None
    if text in ("True", "False"):
        return text == "True"
    raise DataError(f"not a boolean label: {text!r}")


# --- trajectories ----------------------------------------------------------

_TRAJ_HEADER = (
    "service_id,month,source,target,final_arrival_delay_min,"
    "final_arrival_cancelled,completely_cancelled,had_intermediate_delay"
)


def write_trajectories(
    rows: Sequence[ServiceTrajectory], path: str, digest: str, seed: int
) -> None:
    lines = [manifest_line(digest, seed), _TRAJ_HEADER]
    for t in rows:
        lines.append(
            f"{_token(t.service_id)},{t.month},{_token(t.source_station)},"
            f"{_token(t.target_station)},{t.final_arrival_delay_min},"
            f"{t.final_arrival_cancelled},{t.completely_cancelled},"
            f"{t.had_intermediate_delay}"
        )
    _write(path, lines)


def read_trajectories(path: str) -> list[ServiceTrajectory]:
    lines = _data_lines(path)
    if not lines or lines[0] != _TRAJ_HEADER:
        raise FormatError(f"{path}: unexpected trajectory header")
    out = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 8:
            raise DataError(f"{path}: bad trajectory row: {line!r}")
        out.append(
            ServiceTrajectory(
                service_id=parts[0],
                month=MonthKey.parse(parts[1]),
                source_station=parts[2],
                target_station=parts[3],
                final_arrival_delay_min=int(parts[4]),
                final_arrival_cancelled=parts[5] == "True",
                completely_cancelled=parts[6] == "True",
                had_intermediate_delay=parts[7] == "True",
            )
        )
    return out


# --- aggregates ------------------------------------------------------------

_AGG_HEADER = (
    "YearMonth,source,target,rides_planned,final_arrival_delay_count,"
    "final_arrival_cancelled_count,completely_cancelled_count,"
    "intermediate_delay_count,proportion_delayed,label"
)


def write_aggregates(
    rows: Sequence[MonthlyEdgeAggregate], path: str, digest: str, seed: int
) -> None:
    lines = [manifest_line(digest, seed), _AGG_HEADER]
    for a in rows:
        lines.append(
            f"{a.month},{_token(a.source)},{_token(a.target)},{a.rides_planned},"
            f"{a.final_arrival_delay_count},{a.final_arrival_cancelled_count},"
            f"{a.completely_cancelled_count},{a.intermediate_delay_count},"
            f"{a.proportion_delayed!r},{_fmt_bool(a.label)}"
        )
    _write(path, lines)


def read_aggregates(path: str) -> list[MonthlyEdgeAggregate]:
    lines = _data_lines(path)
    if not lines or lines[0] != _AGG_HEADER:
        raise FormatError(f"{path}: unexpected aggregate header")
    out = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 10:
            raise DataError(f"{path}: bad aggregate row: {line!r}")
        out.append(
            MonthlyEdgeAggregate(
                month=MonthKey.parse(parts[0]),
                source=parts[1],
                target=parts[2],
                rides_planned=int(parts[3]),
                final_arrival_delay_count=int(parts[4]),
                final_arrival_cancelled_count=int(parts[5]),
                completely_cancelled_count=int(parts[6]),
                intermediate_delay_count=int(parts[7]),
                proportion_delayed=float(parts[8]),
                label=_parse_opt_bool(parts[9]),
            )
        )
    return out


# --- snapshots -------------------------------------------------------------

_SNAP_HEADER = "month,source,target,weight"


def write_snapshots(
    snapshots: dict[MonthKey, GraphSnapshot], path: str, digest: str, seed: int
) -> None:
    lines = [manifest_line(digest, seed), _SNAP_HEADER]
    for month in sorted(snapshots):
        for u, v, w in snapshots[month].edges():
            lines.append(f"{month},{_token(u)},{_token(v)},{w}")
    _write(path, lines)


def read_snapshots(path: str) -> dict[MonthKey, GraphSnapshot]:
    lines = _data_lines(path)
    if not lines or lines[0] != _SNAP_HEADER:
        raise FormatError(f"{path}: unexpected snapshot header")
    edges: dict[MonthKey, dict[tuple[str, str], int]] = {}
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 4:
            raise DataError(f"{path}: bad snapshot row: {line!r}")
        month = MonthKey.parse(parts[0])
        edges.setdefault(month, {})[(parts[1], parts[2])] = int(parts[3])
    return {month: GraphSnapshot(month, pairs) for month, pairs in sorted(edges.items())}


# --- feature matrix --------------------------------------------------------


def write_features(
    vectors: Sequence[FeatureVector],
    sets: Sequence[str],
    path: str,
    digest: str,
    seed: int,
) -> None:
    """Wide per-row matrix: month,source,target,label + requested components."""
    names = component_names(sets)
    by_row: dict[tuple[MonthKey, str, str], dict[str, FeatureVector]] = {}
    for vec in vectors:
        if vec.set_id in sets:
            by_row.setdefault((vec.month, vec.source, vec.target), {})[vec.set_id] = vec
    lines = [
        manifest_line(digest, seed),
        "month,source,target,label," + ",".join(names),
    ]
    for key in sorted(by_row):
        parts = by_row[key]
        missing = [s for s in sets if s not in parts]
        if missing:
            raise DataError(
                f"row {key[0]} {key[1]}->{key[2]} lacks feature sets: {', '.join(missing)}"
            )
        values: list[str] = []
        for set_id in sets:
            values.extend(repr(float(x)) for x in parts[set_id].values)
        label = parts[sets[0]].label
        lines.append(
            f"{key[0]},{_token(key[1])},{_token(key[2])},{_fmt_bool(label)},"
            + ",".join(values)
        )
    _write(path, lines)


def read_features(path: str) -> list[FeatureVector]:
    lines = _data_lines(path)
    if not lines:
        raise FormatError(f"{path}: empty feature file")
    header = lines[0].split(",")
    if header[:4] != ["month", "source", "target", "label"]:
        raise FormatError(f"{path}: unexpected feature header")
    columns = header[4:]
    # which sets are fully present, and where their components sit
    layouts: dict[str, list[int]] = {}
    for set_id, comps in COMPONENTS.items():
        if all(c in columns for c in comps):
            layouts[set_id] = [columns.index(c) for c in comps]
    if not layouts:
        raise FormatError(f"{path}: no complete feature set in header")
    out: list[FeatureVector] = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(header):
            raise DataError(f"{path}: bad feature row: {line!r}")
        month = MonthKey.parse(parts[0])
        label = _parse_opt_bool(parts[3])
        values = parts[4:]
        for set_id, positions in layouts.items():
            out.append(
                FeatureVector(
                    month=month,
                    source=parts[1],
                    target=parts[2],
                    set_id=set_id,
                    values=tuple(float(values[i]) for i in positions),
                    label=label,
                )
            )
    return out


# --- metrics ---------------------------------------------------------------


def write_metrics(
    reports: Sequence[MetricsReport], path: str, digest: str, seed: int
) -> None:
    lines = [manifest_line(digest, seed)]
    for report in reports:
        lines.append(json.dumps(report.to_record(), sort_keys=True))
    _write(path, lines)


def read_metrics(path: str) -> list[MetricsReport]:
    return [MetricsReport.from_record(json.loads(line)) for line in _data_lines(path)]


# --- fitted protocols ------------------------------------------------------


def write_fitted_protocol(
    fitted: FittedProtocol, path: str, digest: str, seed: int
) -> None:
    payload = {
        "protocol": fitted.protocol,
        "classifier": fitted.classifier,
        "feature_set": fitted.feature_set,
        "seed": fitted.seed,
        "months_skipped": [str(m) for m in fitted.months_skipped],
        "entries": [
            {
                "months": [str(m) for m in months],
                "model": model_payload(model),
                "train_idx": [int(i) for i in train_idx],
                "test_idx": [int(i) for i in test_idx],
            }
            for months, model, train_idx, test_idx in fitted.entries
        ],
    }
    _write(path, [manifest_line(digest, seed), json.dumps(payload, sort_keys=True)])


def read_fitted_protocol(path: str) -> FittedProtocol:
    lines = _data_lines(path)
    if len(lines) != 1:
        raise FormatError(f"{path}: expected one protocol record")
    payload = json.loads(lines[0])
    entries = []
    spec = None
    for entry in payload["entries"]:
        model = model_from_payload(entry["model"])
        spec = model.spec
        entries.append(
            (
                tuple(MonthKey.parse(m) for m in entry["months"]),
                model,
                np.array(entry["train_idx"], dtype=int),
                np.array(entry["test_idx"], dtype=int),
            )
        )
    if spec is None:
        raise DataError(f"{path}: protocol carries no models")
    return FittedProtocol(
        protocol=payload["protocol"],
        spec=spec,
        seed=payload["seed"],
        classifier=payload["classifier"],
        feature_set=payload["feature_set"],
        entries=entries,
        months_skipped=tuple(MonthKey.parse(m) for m in payload["months_skipped"]),
    )


# --- search and importance reports ----------------------------------------


def write_search_report(result: SearchResult, path: str, digest: str, seed: int) -> None:
    lines = [
        manifest_line(digest, seed),
        f"# algorithm={result.algorithm} n_iter={result.n_iter} k={result.k}",
        f"# best={json.dumps(result.best.hyperparameters, sort_keys=True)}",
        "configuration,fold_scores,mean_ba",
    ]
    for cand in result.table:
        config = json.dumps(dict(cand.hyperparameters), sort_keys=True)
        folds = ";".join(repr(s) for s in cand.fold_scores)
        lines.append(f"{config!r},{folds},{cand.mean_score!r}")
    _write(path, lines)


def write_importance_report(report, path: str, digest: str, seed: int) -> None:
    lines = [
        manifest_line(digest, seed),
        f"# method={report.method} metric={report.metric} "
        f"baseline={report.baseline!r} repeats={report.repeats}",
        "feature,mean_drop",
    ]
    for entry in report.entries:
        lines.append(f"{entry.feature},{entry.mean_drop!r}")
    _write(path, lines)
