"""Command line front end.

Subcommands map to pipeline stages and compose through files in the output
directory only:

    synth      -> aggregates.csv, snapshots.csv   (synthetic corpora)
    ingest     -> trajectories.csv (rail) or aggregates.csv (air)
    label      -> aggregates.csv (labeled), snapshots.csv
    featurize  -> features.csv
    train      -> models/<classifier>__<set>__s<seed>.json
    evaluate   -> metrics.jsonl, metrics_matrix.csv (matrix also printed)
    search     -> search_<classifier>__<set>.csv
    importance -> importance_<classifier>__<set>.csv
    pipeline   -> chains the stages for the configured dataset kind

Exit codes: 0 success, 1 usage/configuration error, 2 data error, 3 internal.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import Optional, Sequence

from . import __version__, artifacts, evaluation, features, ingest, snapshots, synth
from .config import RunConfig, build_config, load_config_file
from .errors import ConfigError, DataError
from .learn import (
    SEARCH_GRIDS,
    assemble_dataset,
    randomized_search_cv,
    roster_spec,
    undersample_indices,
)
from .learn.models import grid_for, roster_algorithm
from .months import MonthKey, consecutive
from .seeding import derive_int

log = logging.getLogger(__name__)

TRAJECTORIES = "trajectories.csv"
AGGREGATES = "aggregates.csv"
SNAPSHOTS = "snapshots.csv"
FEATURES = "features.csv"
METRICS = "metrics.jsonl"
MATRIX = "metrics_matrix.csv"
MODELS_DIR = "models"


def _out(config: RunConfig, name: str) -> str:
    return os.path.join(config.out, name)


def _require(path: str, producer: str) -> str:
    if not os.path.exists(path):
        raise DataError(
            f"missing upstream artifact {path}; run `transitlink {producer}` first"
        )
    return path


def _digest(config: RunConfig, command: str, inputs: Sequence[str] = ()) -> str:
    settings = config.as_dict()
    # the output directory is not part of what a run computes
    settings.pop("out", None)
    settings["command"] = command
    return artifacts.config_digest(settings, inputs)


def _write_run_manifest(
    config: RunConfig, command: str, digest: str, inputs: Sequence[str]
) -> None:
    payload = {
        "command": command,
        "digest": digest,
        "inputs": {
            os.path.basename(p): artifacts.config_digest({}, [p]) for p in inputs
        },
        "seed": config.seed,
        "version": __version__,
    }
    path = _out(config, f"manifest_{command}.json")
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True, indent=1)
        handle.write("\n")


def _ensure_out(config: RunConfig) -> None:
    os.makedirs(config.out, exist_ok=True)


def _load_allowlist(config: RunConfig) -> Optional[set[str]]:
    if not config.station_allowlist:
        return None
    with open(config.station_allowlist, encoding="utf-8") as handle:
        return {line.strip() for line in handle if line.strip()}


def cmd_synth(config: RunConfig) -> None:
    config.validate()
    if config.kind != "synthetic":
        raise ConfigError("the synth command requires kind=synthetic")
    _ensure_out(config)
    synth_config = synth.SynthConfig(
        months=config.synth_months,
        nodes=config.synth_nodes,
        edge_probability=config.synth_edge_probability,
        weight_min=config.synth_weight_min,
        weight_max=config.synth_weight_max,
        signal_feature=config.synth_signal_feature,
        signal_strength=config.synth_signal_strength,
        stationary=config.synth_stationary,
        seed=config.seed,
    )
    result = synth.generate(synth_config)
    digest = _digest(config, "synth")
    artifacts.write_aggregates(result.aggregates, _out(config, AGGREGATES), digest, config.seed)
    artifacts.write_snapshots(result.snapshots, _out(config, SNAPSHOTS), digest, config.seed)
    _write_run_manifest(config, "synth", digest, [])
    log.info(
        "synthetic corpus: %d aggregate rows over %d months",
        len(result.aggregates),
        config.synth_months,
    )


def cmd_ingest(config: RunConfig) -> None:
    config.validate(require_input=True)
    if config.kind == "synthetic":
        raise ConfigError("synthetic corpora come from `transitlink synth`, not ingest")
    _ensure_out(config)
    stats = ingest.IngestStats()
    digest = _digest(config, "ingest", [config.input])
    if config.kind == "rail":
        records = ingest.parse_service_archive(
            config.input, error_cap=config.error_cap, stats=stats
        )
        cleaned = ingest.clean_services(records, stats=stats)
        trajectories = ingest.extract_trajectories(cleaned, stats=stats)
        artifacts.write_trajectories(
            trajectories, _out(config, TRAJECTORIES), digest, config.seed
        )
        log.info(
            "ingested %d stop rows -> %d trajectories (%d parse issues, "
            "%d dropped by company, %d by type, %d services skipped)",
            stats.rows_read,
            len(trajectories),
            len(stats.issues),
            stats.dropped_company,
            stats.dropped_type,
            stats.services_skipped,
        )
    else:
        flights = ingest.parse_flight_table(
            config.input, error_cap=config.error_cap, stats=stats
        )
        cleaned = ingest.clean_flights(flights, stats=stats)
        aggregates = snapshots.flights_to_aggregates(cleaned)
        artifacts.write_aggregates(aggregates, _out(config, AGGREGATES), digest, config.seed)
        log.info(
            "ingested %d flight rows -> %d aggregates (%d self-loops, %d zero-weight dropped)",
            stats.rows_read,
            len(aggregates),
            stats.flights_dropped_self_loop,
            stats.flights_dropped_zero_weight,
        )
    _write_run_manifest(config, "ingest", digest, [config.input])


def _label_rail(config: RunConfig, digest: str) -> None:
    trajectories = artifacts.read_trajectories(
        _require(_out(config, TRAJECTORIES), "ingest")
    )
    aggregates = snapshots.aggregate_monthly(trajectories)
    filtered = snapshots.apply_filters(
        aggregates, min_rides=config.min_rides, domestic_stations=_load_allowlist(config)
    )
    threshold = snapshots.significant_delay_threshold(filtered, config.percentile)
    labeled = snapshots.label_significant_delay(filtered, threshold)
    graphs = snapshots.build_monthly_graphs(labeled)
    artifacts.write_aggregates(labeled, _out(config, AGGREGATES), digest, config.seed)
    artifacts.write_snapshots(graphs, _out(config, SNAPSHOTS), digest, config.seed)
    log.info(
        "labeled %d aggregates; delay threshold %.4f; %d months",
        len(labeled),
        threshold,
        len(graphs),
    )


def _label_air(config: RunConfig, digest: str) -> None:
    aggregates = artifacts.read_aggregates(_require(_out(config, AGGREGATES), "ingest"))
    filtered = snapshots.apply_filters(
        aggregates, min_rides=config.min_rides, domestic_stations=_load_allowlist(config)
    )
    graphs = snapshots.build_monthly_graphs(filtered)
    months = sorted(graphs)
    labeled: list = []
    for i, month in enumerate(months[:-1]):
        nxt = months[i + 1]
        if not consecutive(month, nxt):
            log.warning("months %s and %s are not consecutive; %s unlabeled", month, nxt, month)
            continue
        removal = {
            (e.source, e.target): e.label
            for e in snapshots.label_removed_links(graphs[month], graphs[nxt])
        }
        for a in filtered:
            if a.month != month:
                continue
            pair = (a.source, a.target) if a.source < a.target else (a.target, a.source)
            labeled.append(dataclasses.replace(a, label=removal[pair]))
    if not labeled:
        raise DataError("no consecutive month pairs; removed-link labels undefined")
    kept_months = {a.month for a in labeled}
    artifacts.write_aggregates(labeled, _out(config, AGGREGATES), digest, config.seed)
    artifacts.write_snapshots(
        {m: g for m, g in graphs.items() if m in kept_months},
        _out(config, SNAPSHOTS),
        digest,
        config.seed,
    )
    log.info("labeled %d aggregates for removal over %d months", len(labeled), len(kept_months))


def _label_synthetic(config: RunConfig, digest: str) -> None:
    aggregates = artifacts.read_aggregates(_require(_out(config, AGGREGATES), "synth"))
    if any(a.label is None for a in aggregates):
        raise DataError("synthetic aggregates must already carry labels")
    graphs = snapshots.build_monthly_graphs(aggregates)
    artifacts.write_aggregates(aggregates, _out(config, AGGREGATES), digest, config.seed)
    artifacts.write_snapshots(graphs, _out(config, SNAPSHOTS), digest, config.seed)


def cmd_label(config: RunConfig) -> None:
    config.validate()
    _ensure_out(config)
    inputs = [
        p
        for p in (_out(config, TRAJECTORIES), _out(config, AGGREGATES))
        if os.path.exists(p)
    ]
    digest = _digest(config, "label", inputs)
    if config.kind == "rail":
        _label_rail(config, digest)
    elif config.kind == "air":
        _label_air(config, digest)
    else:
        _label_synthetic(config, digest)
    _write_run_manifest(config, "label", digest, inputs)


def cmd_featurize(config: RunConfig) -> None:
    config.validate()
    _ensure_out(config)
    producer = "synth" if config.kind == "synthetic" else "label"
    agg_path = _require(_out(config, AGGREGATES), producer)
    snap_path = _require(_out(config, SNAPSHOTS), producer)
    digest = _digest(config, "featurize", [agg_path, snap_path])
    aggregates = artifacts.read_aggregates(agg_path)
    graphs = artifacts.read_snapshots(snap_path)
    vectors = []
    for month in sorted(graphs):
        rows = [a for a in aggregates if a.month == month]
        vectors.extend(
            features.featurize_snapshot(graphs[month], rows, config.feature_sets)
        )
    artifacts.write_features(
        vectors, config.feature_sets, _out(config, FEATURES), digest, config.seed
    )
    _write_run_manifest(config, "featurize", digest, [agg_path, snap_path])
    log.info("featurized %d vectors across %d months", len(vectors), len(graphs))


def _dataset_for_set(config: RunConfig, set_id: str):
    vectors = artifacts.read_features(_require(_out(config, FEATURES), "featurize"))
    return assemble_dataset(vectors, [set_id])


def _model_path(config: RunConfig, classifier: str, set_id: str, seed: int) -> str:
    return os.path.join(
        config.out, MODELS_DIR, f"{classifier}__{set_id}__s{seed}.json"
    )


def _fit_one(config: RunConfig, ds, classifier: str, set_id: str, seed: int):
    spec = roster_spec(classifier, seed=derive_int(seed, classifier, set_id))
    if config.protocol == "simultaneous":
        return evaluation.fit_simultaneous(
            ds,
            spec,
            seed,
            train_fraction=config.train_fraction,
            classifier=classifier,
            feature_set=set_id,
        )
    if config.train_months and config.test_months:
        train_months = config.parsed_train_months()
        test_months = config.parsed_test_months()
    else:
        train_months, test_months = evaluation.default_month_ranges(
            ds.months_present(), config.train_fraction
        )
    return evaluation.fit_nonsimultaneous(
        ds, train_months, test_months, spec, seed, classifier=classifier, feature_set=set_id
    )


def cmd_train(config: RunConfig) -> None:
    config.validate()
    _ensure_out(config)
    os.makedirs(os.path.join(config.out, MODELS_DIR), exist_ok=True)
    feature_path = _require(_out(config, FEATURES), "featurize")
    digest = _digest(config, "train", [feature_path])
    count = 0
    for set_id in config.feature_sets:
        ds = _dataset_for_set(config, set_id)
        for classifier in config.classifiers:
            for seed in config.effective_seeds():
                fitted = _fit_one(config, ds, classifier, set_id, seed)
                artifacts.write_fitted_protocol(
                    fitted, _model_path(config, classifier, set_id, seed), digest, seed
                )
                count += 1
    _write_run_manifest(config, "train", digest, [feature_path])
    log.info("trained %d protocol fits", count)


def cmd_evaluate(config: RunConfig) -> None:
    config.validate()
    _ensure_out(config)
    feature_path = _require(_out(config, FEATURES), "featurize")
    reports = []
    model_files = []
    for set_id in config.feature_sets:
        ds = _dataset_for_set(config, set_id)
        for classifier in config.classifiers:
            for seed in config.effective_seeds():
                path = _model_path(config, classifier, set_id, seed)
                fitted = artifacts.read_fitted_protocol(_require(path, "train"))
                reports.append(evaluation.evaluate_fitted(fitted, ds))
                model_files.append(path)
    digest = _digest(config, "evaluate", [feature_path] + model_files)
    artifacts.write_metrics(reports, _out(config, METRICS), digest, config.seed)
    matrix = evaluation.metrics_matrix(reports)
    with open(_out(config, MATRIX), "w", encoding="utf-8", newline="") as handle:
        handle.write(artifacts.manifest_line(digest, config.seed) + "\n")
        handle.write(matrix)
    _write_run_manifest(config, "evaluate", digest, [feature_path] + model_files)
    sys.stdout.write(matrix)


def cmd_search(config: RunConfig) -> None:
    config.validate()
    _ensure_out(config)
    feature_path = _require(_out(config, FEATURES), "featurize")
    digest = _digest(config, "search", [feature_path])
    ran = 0
    for set_id in config.feature_sets:
        ds = _dataset_for_set(config, set_id)
        for classifier in config.classifiers:
            if classifier not in SEARCH_GRIDS:
                log.warning("no search grid for %s; skipped", classifier)
                continue
            algorithm = roster_algorithm(classifier)
            balanced = undersample_indices(ds.y, derive_int(config.seed, "search", classifier, set_id))
            result = randomized_search_cv(
                algorithm,
                grid_for(classifier),
                ds.X[balanced],
                ds.y[balanced],
                n_iter=config.n_iter,
                k=config.cv_folds,
                seed=derive_int(config.seed, classifier, set_id),
            )
            artifacts.write_search_report(
                result,
                _out(config, f"search_{classifier}__{set_id}.csv"),
                digest,
                config.seed,
            )
            ran += 1
    if ran == 0:
        raise ConfigError("no requested classifier has a search grid")
    _write_run_manifest(config, "search", digest, [feature_path])


def cmd_importance(config: RunConfig) -> None:
    config.validate()
    _ensure_out(config)
    feature_path = _require(_out(config, FEATURES), "featurize")
    digest = _digest(config, "importance", [feature_path])
    for set_id in config.feature_sets:
        ds = _dataset_for_set(config, set_id)
        train_months, test_months = evaluation.default_month_ranges(
            ds.months_present(), config.train_fraction
        )
        if config.train_months and config.test_months:
            train_months = config.parsed_train_months()
            test_months = config.parsed_test_months()
        for classifier in config.classifiers:
            spec = roster_spec(classifier, seed=derive_int(config.seed, classifier, set_id))
            fitted = evaluation.fit_nonsimultaneous(
                ds,
                train_months,
                test_months,
                spec,
                config.seed,
                classifier=classifier,
                feature_set=set_id,
            )
            _, model, _, test_idx = fitted.entries[0]
            report = evaluation.permutation_importance(
                model,
                ds.X[test_idx],
                ds.y[test_idx],
                metric=config.importance_metric,
                repeats=config.importance_repeats,
                seed=config.seed,
            )
            artifacts.write_importance_report(
                report,
                _out(config, f"importance_{classifier}__{set_id}.csv"),
                digest,
                config.seed,
            )
    _write_run_manifest(config, "importance", digest, [feature_path])


def cmd_pipeline(config: RunConfig) -> None:
    if config.kind == "synthetic":
        cmd_synth(config)
        cmd_featurize(config)
    else:
        cmd_ingest(config)
        cmd_label(config)
        cmd_featurize(config)
    cmd_train(config)
    cmd_evaluate(config)


_COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "label": cmd_label,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "search": cmd_search,
    "importance": cmd_importance,
    "pipeline": cmd_pipeline,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2; usage errors are 1
        raise ConfigError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="transitlink", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__, parents=[_common_flags()])
    return parser


def _common_flags() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--input", help="raw archive path (rail/air)")
    common.add_argument("--kind", choices=("rail", "air", "synthetic"))
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--seed", type=int)
    common.add_argument(
        "--feature-sets", dest="feature_sets", help="comma list from tf,wtf,ncm"
    )
    common.add_argument("--classifiers", help="comma list of roster names")
    common.add_argument("--protocol", choices=("simultaneous", "nonsimultaneous"))
    common.add_argument(
        "--train-months", dest="train_months", help="comma list of YYYY-MM"
    )
    common.add_argument("--test-months", dest="test_months", help="comma list of YYYY-MM")
    common.add_argument("--min-rides", dest="min_rides", type=int)
    common.add_argument("--percentile", type=float)
    common.add_argument("--n-iter", dest="n_iter", type=int)
    common.add_argument("--verbose", action="store_true")
    return common


_LIST_FLAGS = ("feature_sets", "classifiers", "train_months", "test_months")


def _flag_values(args: argparse.Namespace) -> dict:
    values: dict = {}
    for name in (
        "input",
        "kind",
        "out",
        "seed",
        "protocol",
        "min_rides",
        "percentile",
        "n_iter",
    ):
        values[name] = getattr(args, name, None)
    for name in _LIST_FLAGS:
        raw = getattr(args, name, None)
        if raw is not None:
            values[name] = tuple(s.strip() for s in raw.split(",") if s.strip())
    return values


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = None
    try:
        parser = _build_parser()
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
        )
        file_values = load_config_file(args.config) if args.config else {}
        config = build_config(file_values, _flag_values(args))
        _COMMANDS[args.command](config)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except SystemExit:
        raise
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
