"""Monthly aggregation, delay proportions, labeling, graph snapshots."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from transitlink.errors import DataError
from transitlink.ingest import FlightRecord, ServiceTrajectory
from transitlink.months import MonthKey
from transitlink.snapshots import (
    GraphSnapshot,
    MonthlyEdgeAggregate,
    aggregate_monthly,
    apply_filters,
    build_graph,
    build_monthly_graphs,
    flights_to_aggregates,
    label_removed_links,
    label_significant_delay,
    proportion_delayed,
    significant_delay_threshold,
)
from tests.conftest import M1, graph

M2 = MonthKey(2020, 2)


def agg(month, source, target, planned, prop, label=None, delayed=0):
    return MonthlyEdgeAggregate(
        month=month,
        source=source,
        target=target,
        rides_planned=planned,
        final_arrival_delay_count=delayed,
        final_arrival_cancelled_count=0,
        completely_cancelled_count=0,
        intermediate_delay_count=0,
        proportion_delayed=prop,
        label=label,
    )


class TestProportion:
    # hand-checked: delayed rides over rides actually run
    CASES = [
        (57, 20, 0, 0.3509),
        (1106, 99, 5, 0.0899),
        (757, 247, 2, 0.3272),
        (44, 2, 4, 0.0500),
        (1257, 727, 70, 0.6125),
    ]

    @pytest.mark.parametrize("planned,delayed,cancelled,expected", CASES)
    def test_reference_rows(self, planned, delayed, cancelled, expected):
        assert proportion_delayed(planned, delayed, cancelled) == pytest.approx(
            expected, abs=5e-5
        )

    def test_zero_denominator_is_zero(self):
        assert proportion_delayed(4, 0, 4) == 0.0
        assert proportion_delayed(0, 0, 0) == 0.0

    @given(
        planned=st.integers(1, 10_000),
        delayed=st.integers(0, 10_000),
        cancelled=st.integers(0, 10_000),
    )
    def test_always_finite_and_nonnegative(self, planned, delayed, cancelled):
        p = proportion_delayed(planned, min(delayed, planned), min(cancelled, planned))
        assert math.isfinite(p)
        assert p >= 0.0


def traj(sid, source, target, delay=0, month=M1, cancelled=False,
         completely=False, intermediate=False):
    return ServiceTrajectory(
        service_id=sid,
        month=month,
        source_station=source,
        target_station=target,
        final_arrival_delay_min=delay,
        final_arrival_cancelled=cancelled,
        completely_cancelled=completely,
        had_intermediate_delay=intermediate,
    )


class TestAggregateMonthly:
    def test_counts_by_month_and_endpoint_pair(self):
        rows = aggregate_monthly(
            [
                traj("1", "A", "B", delay=5),
                traj("2", "A", "B", delay=0),
                traj("3", "A", "B", delay=-1),  # unfinished, not delayed
                traj("4", "A", "B", completely=True),
                traj("5", "B", "C", delay=1, month=M2),
            ]
        )
        assert len(rows) == 2
        first = rows[0]
        assert (first.month, first.source, first.target) == (M1, "A", "B")
        assert first.rides_planned == 4
        assert first.final_arrival_delay_count == 1
        assert first.completely_cancelled_count == 1
        assert first.proportion_delayed == pytest.approx(1 / 3)

    def test_output_sorted_by_month_then_pair(self):
        rows = aggregate_monthly(
            [
                traj("1", "B", "C", month=M2),
                traj("2", "B", "A"),
                traj("3", "A", "B"),
            ]
        )
        keys = [(r.month, r.source, r.target) for r in rows]
        assert keys == sorted(keys)

    def test_intermediate_and_cancelled_counters(self):
        (row,) = aggregate_monthly(
            [
                traj("1", "A", "B", intermediate=True),
                traj("2", "A", "B", cancelled=True),
            ]
        )
        assert row.intermediate_delay_count == 1
        assert row.final_arrival_cancelled_count == 1


class TestFilters:
    def test_min_rides_cutoff(self):
        rows = [agg(M1, "A", "B", 4, 0.1), agg(M1, "A", "C", 3, 0.9)]
        kept = apply_filters(rows, min_rides=4)
        assert [(r.source, r.target) for r in kept] == [("A", "B")]

    def test_station_allowlist_requires_both_endpoints(self):
        rows = [agg(M1, "A", "B", 9, 0.1), agg(M1, "A", "X", 9, 0.1)]
        kept = apply_filters(rows, domestic_stations={"A", "B"})
        assert [(r.source, r.target) for r in kept] == [("A", "B")]

    def test_min_rides_below_one_rejected(self):
        with pytest.raises(DataError):
            apply_filters([agg(M1, "A", "B", 4, 0.1)], min_rides=0)


class TestThresholdLabeling:
    def test_median_of_proportions(self):
        rows = [agg(M1, "A", "B", 9, p) for p in (0.1, 0.2, 0.3, 0.4, 0.5)]
        assert significant_delay_threshold(rows) == pytest.approx(0.3)

    def test_percentile_interpolates_linearly(self):
        rows = [agg(M1, "A", "B", 9, p) for p in (0.0, 1.0)]
        assert significant_delay_threshold(rows, percentile=0.25) == pytest.approx(0.25)

    def test_empty_input_rejected(self):
        with pytest.raises(DataError):
            significant_delay_threshold([])

    @pytest.mark.parametrize("pct", [-0.01, 1.01])
    def test_percentile_bounds(self, pct):
        with pytest.raises(DataError):
            significant_delay_threshold([agg(M1, "A", "B", 9, 0.5)], percentile=pct)

    def test_strictly_above_threshold_is_true(self):
        rows = [agg(M1, "A", "B", 9, p) for p in (0.2, 0.3, 0.4)]
        labeled = label_significant_delay(rows, threshold=0.3)
        assert [r.label for r in labeled] == [False, False, True]
        # inputs are not mutated
        assert all(r.label is None for r in rows)


class TestRemovedLinkLabels:
    def test_label_true_when_link_absent_next_month(self):
        g1 = graph({("a", "b"): 2, ("b", "c"): 1})
        g2 = GraphSnapshot(month=M2, edge_weights={("a", "b"): 2})
        labels = {(l.source, l.target): l.label for l in label_removed_links(g1, g2)}
        assert labels == {("a", "b"): False, ("b", "c"): True}

    def test_months_must_be_consecutive(self):
        g1 = graph({("a", "b"): 2})
        g3 = GraphSnapshot(month=MonthKey(2020, 3), edge_weights={("a", "b"): 2})
        with pytest.raises(DataError, match="consecutive"):
            label_removed_links(g1, g3)


class TestGraphSnapshot:
    def test_rejects_self_loops(self):
        with pytest.raises(DataError):
            graph({("a", "a"): 1})

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(DataError):
            graph({("a", "b"): 0})

    def test_directed_pairs_fold_into_one_undirected_edge(self):
        g = graph({("a", "b"): 2, ("b", "a"): 3})
        assert g.n_edges == 1
        assert g.weight("a", "b") == 5
        assert g.weight("b", "a") == 5

    def test_neighbors_sorted_and_degree(self):
        g = graph({("b", "a"): 1, ("b", "c"): 1, ("b", "d"): 2})
        assert g.neighbors("b") == ["a", "c", "d"]
        assert g.degree("b") == 3
        assert g.strength("b") == 4.0

    def test_edges_iterates_canonical_sorted(self):
        g = graph({("d", "c"): 1, ("a", "b"): 1})
        assert [(u, v) for u, v, _ in g.edges()] == [("a", "b"), ("c", "d")]

    def test_absent_edge_weight_zero(self):
        g = graph({("a", "b"): 1})
        assert g.weight("a", "c") == 0.0
        assert not g.has_edge("a", "c")


class TestBuildGraphs:
    def test_build_graph_sums_directed_aggregates(self):
        rows = [agg(M1, "A", "B", 4, 0.0), agg(M1, "B", "A", 6, 0.0)]
        g = build_graph(rows)
        assert g.weight("A", "B") == 10.0

    def test_build_graph_rejects_mixed_months(self):
        rows = [agg(M1, "A", "B", 4, 0.0), agg(M2, "B", "A", 6, 0.0)]
        with pytest.raises(DataError):
            build_graph(rows)

    def test_build_monthly_graphs_partitions(self):
        rows = [agg(M1, "A", "B", 4, 0.0), agg(M2, "A", "B", 6, 0.0)]
        graphs = build_monthly_graphs(rows)
        assert sorted(graphs) == [M1, M2]
        assert graphs[M1].weight("A", "B") == 4.0


def test_flights_to_aggregates_merges_duplicates():
    flights = [
        FlightRecord(year=2020, month=1, source="ABE", target="ORD", passengers=10, weight=3),
        FlightRecord(year=2020, month=1, source="ABE", target="ORD", passengers=5, weight=2),
    ]
    (row,) = flights_to_aggregates(flights)
    assert row.month == M1
    assert row.rides_planned == 5
    assert row.proportion_delayed == 0.0
