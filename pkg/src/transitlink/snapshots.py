"""Monthly aggregation, labeling, and graph snapshots.

Trajectories (or flight rows) are grouped per (month, source, target) into
edge aggregates carrying ride and delay counts. Aggregates pass through a
minimum-rides filter, receive a binary label (significantly delayed, or
removed next month), and fold into one undirected weighted graph per month.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DataError
from .ingest import FlightRecord, ServiceTrajectory
from .months import MonthKey, consecutive

log = logging.getLogger(__name__)

MIN_RIDES_DEFAULT = 4
PERCENTILE_DEFAULT = 0.5


@dataclass(frozen=True)
class MonthlyEdgeAggregate:
    """Counts for one directed (month, source, target) group.

    proportion_delayed = delayed / (planned - completely cancelled); completely
    cancelled rides never ran, so they leave the denominator. A ride counts as
    delayed when its final arrival delay is > 0; the -1 unfinished sentinel is
    neither delayed nor cancelled.
    """

    month: MonthKey
    source: str
    target: str
    rides_planned: int
    final_arrival_delay_count: int
    final_arrival_cancelled_count: int
    completely_cancelled_count: int
    intermediate_delay_count: int
    proportion_delayed: float
    label: Optional[bool] = None

    def __post_init__(self) -> None:
        if self.final_arrival_delay_count > self.rides_planned:
            raise DataError(
                f"{self.month} {self.source}->{self.target}: "
                "delay count exceeds rides planned"
            )
        if self.completely_cancelled_count > self.rides_planned:
            raise DataError(
                f"{self.month} {self.source}->{self.target}: "
                "cancellation count exceeds rides planned"
            )


class GraphSnapshot:
    """Undirected weighted graph for one month. Immutable after construction."""

    __slots__ = ("month", "_adj", "_nodes")

    def __init__(self, month: MonthKey, edge_weights: Mapping[tuple[str, str], int]):
        adj: dict[str, dict[str, int]] = {}
        for (u, v), w in edge_weights.items():
            if u == v:
                raise DataError(f"self-loop on node {u!r} in month {month}")
            if w < 1:
                raise DataError(f"edge weight below 1 on {u!r}-{v!r} in month {month}")
            # (u,v) and (v,u) keys both accumulate into one undirected edge.
            total = adj.setdefault(u, {}).get(v, 0) + int(w)
            adj[u][v] = total
            adj.setdefault(v, {})[u] = total
        self.month = month
        self._adj = adj
        self._nodes: tuple[str, ...] = tuple(sorted(adj))

    @property
    def nodes(self) -> tuple[str, ...]:
        return self._nodes

    @property
    def n_nodes(self) -> int:
        return len(self._nodes)

    @property
    def n_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self._adj.values()) // 2

    def has_node(self, u: str) -> bool:
        return u in self._adj

    def has_edge(self, u: str, v: str) -> bool:
        return v in self._adj.get(u, {})

    def neighbors(self, u: str) -> Sequence[str]:
        return sorted(self._adj.get(u, {}))

    def degree(self, u: str) -> int:
        return len(self._adj.get(u, {}))

    def strength(self, u: str) -> int:
        return sum(self._adj.get(u, {}).values())

    def weight(self, u: str, v: str) -> int:
        return self._adj.get(u, {}).get(v, 0)

    def edges(self):
        """Yield (u, v, weight) with u < v, in sorted order."""
        for u in self._nodes:
            for v in sorted(self._adj[u]):
                if u < v:
                    yield u, v, self._adj[u][v]

    def edge_pairs(self) -> set[tuple[str, str]]:
        return {(u, v) for u, v, _ in self.edges()}


@dataclass(frozen=True)
class EdgeLabel:
    """Label for one unordered snapshot edge (source < target)."""

    month: MonthKey
    source: str
    target: str
    label: bool


def _is_delayed(traj: ServiceTrajectory) -> bool:
    return traj.final_arrival_delay_min > 0


def aggregate_monthly(trajectories: Iterable[ServiceTrajectory]) -> list[MonthlyEdgeAggregate]:
    """Group trajectories into one aggregate per (month, source, target)."""
    groups: dict[tuple[MonthKey, str, str], list[ServiceTrajectory]] = {}
    for traj in trajectories:
        groups.setdefault((traj.month, traj.source_station, traj.target_station), []).append(traj)

    out: list[MonthlyEdgeAggregate] = []
    for (month, source, target) in sorted(groups):
        members = groups[(month, source, target)]
        planned = len(members)
        delayed = sum(1 for t in members if _is_delayed(t))
        cancelled = sum(1 for t in members if t.final_arrival_cancelled)
        completely = sum(1 for t in members if t.completely_cancelled)
        intermediate = sum(1 for t in members if t.had_intermediate_delay)
        out.append(
            MonthlyEdgeAggregate(
                month=month,
                source=source,
                target=target,
                rides_planned=planned,
                final_arrival_delay_count=delayed,
                final_arrival_cancelled_count=cancelled,
                completely_cancelled_count=completely,
                intermediate_delay_count=intermediate,
                proportion_delayed=proportion_delayed(planned, delayed, completely),
            )
        )
    return out


def proportion_delayed(planned: int, delayed: int, completely_cancelled: int) -> float:
    """Delay rate over rides that actually ran; 0 when none did."""
    denominator = planned - completely_cancelled
    if denominator <= 0:
        return 0.0
    return delayed / denominator


def flights_to_aggregates(flights: Iterable[FlightRecord]) -> list[MonthlyEdgeAggregate]:
    """Adapt flight rows to edge aggregates: weight plays the ride count."""
    merged: dict[tuple[MonthKey, str, str], int] = {}
    for rec in flights:
        key = (MonthKey(rec.year, rec.month), rec.source, rec.target)
        merged[key] = merged.get(key, 0) + rec.weight
    return [
        MonthlyEdgeAggregate(
            month=month,
            source=source,
            target=target,
            rides_planned=weight,
            final_arrival_delay_count=0,
            final_arrival_cancelled_count=0,
            completely_cancelled_count=0,
            intermediate_delay_count=0,
            proportion_delayed=0.0,
        )
        for (month, source, target), weight in sorted(merged.items())
    ]


def apply_filters(
    aggregates: Sequence[MonthlyEdgeAggregate],
    min_rides: int = MIN_RIDES_DEFAULT,
    domestic_stations: Optional[set[str]] = None,
) -> list[MonthlyEdgeAggregate]:
    """Keep aggregates with at least min_rides planned rides and, when an
    allowlist is given, both endpoints on it."""
    if min_rides < 1:
        raise DataError(f"min_rides must be >= 1, got {min_rides}")
    kept = [
        a
        for a in aggregates
        if a.rides_planned >= min_rides
        and (
            domestic_stations is None
            or (a.source in domestic_stations and a.target in domestic_stations)
        )
    ]
    if not kept:
        log.warning("filters removed every aggregate (min_rides=%d)", min_rides)
    return kept


def significant_delay_threshold(
    aggregates: Sequence[MonthlyEdgeAggregate],
    percentile: float = PERCENTILE_DEFAULT,
) -> float:
    """Percentile (linear interpolation) of proportion_delayed over all rows.

    Computed dataset-wide across months, after filtering, so one threshold
    applies to the whole corpus.
    """
    if not aggregates:
        raise DataError("cannot take a delay threshold of zero aggregates")
    if not 0.0 <= percentile <= 1.0:
        raise DataError(f"percentile must lie in [0,1], got {percentile}")
    props = np.array([a.proportion_delayed for a in aggregates], dtype=float)
    return float(np.quantile(props, percentile))


def label_significant_delay(
    aggregates: Sequence[MonthlyEdgeAggregate], threshold: float
) -> list[MonthlyEdgeAggregate]:
    """Label = proportion_delayed strictly above the threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise DataError(f"threshold must lie in [0,1], got {threshold}")
    return [
        dataclasses.replace(a, label=bool(a.proportion_delayed > threshold))
        for a in aggregates
    ]


def label_removed_links(current: GraphSnapshot, nxt: GraphSnapshot) -> list[EdgeLabel]:
    """Label each edge of `current` True when it is absent from `nxt`."""
    if not consecutive(current.month, nxt.month):
        raise DataError(
            f"snapshots are not consecutive months: {current.month} then {nxt.month}"
        )
    return [
        EdgeLabel(month=current.month, source=u, target=v, label=not nxt.has_edge(u, v))
        for u, v, _ in current.edges()
    ]


def build_graph(aggregates: Sequence[MonthlyEdgeAggregate]) -> GraphSnapshot:
    """Fold one month's aggregates into an undirected snapshot.

    Directed aggregates symmetrize by weight summation: (a,b) and (b,a) ride
    counts add into one edge weight.
    """
    months = {a.month for a in aggregates}
    if len(months) > 1:
        raise DataError(f"aggregates span several months: {sorted(map(str, months))}")
    if not aggregates:
        raise DataError("cannot build a snapshot from zero aggregates")
    month = next(iter(months))
    weights: dict[tuple[str, str], int] = {}
    for a in aggregates:
        key = (a.source, a.target) if a.source < a.target else (a.target, a.source)
        weights[key] = weights.get(key, 0) + a.rides_planned
    return GraphSnapshot(month, weights)


def build_monthly_graphs(
    aggregates: Sequence[MonthlyEdgeAggregate],
) -> dict[MonthKey, GraphSnapshot]:
    """One snapshot per month present in the aggregates."""
    by_month: dict[MonthKey, list[MonthlyEdgeAggregate]] = {}
    for a in aggregates:
        by_month.setdefault(a.month, []).append(a)
    return {month: build_graph(rows) for month, rows in sorted(by_month.items())}
