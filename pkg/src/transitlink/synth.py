"""Synthetic monthly corpora with planted labels, plus the brute-force
feature oracle used by the test suite.

The generator draws an Erdos-Renyi weighted graph per month and labels each
edge with probability sigmoid(signal_strength * z), where z is the
within-month standardized value of one chosen feature component. Everything
is seed-deterministic, and the generating scores are returned so tests can
evaluate the Bayes-optimal decision rule on the corpus itself.

oracle_features() re-derives all 28 components by direct definition (explicit
set scans, triple-loop walk counts, queue-based BFS). It deliberately shares
no code with the features module; agreement between the two is what the
module-crossing acceptance test checks.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .features import COMPONENTS, SnapshotFeaturizer
from .months import MonthKey
from .seeding import derive
from .snapshots import GraphSnapshot, MonthlyEdgeAggregate

_ALL_COMPONENT_NAMES = tuple(n for set_id in ("tf", "wtf", "ncm") for n in COMPONENTS[set_id])


@dataclass(frozen=True)
class SynthConfig:
    months: int = 12
    nodes: int = 60
    edge_probability: float = 0.0928
    weight_min: int = 1
    weight_max: int = 9
    signal_feature: str = "cn"
    signal_strength: float = 4.0
    stationary: bool = True
    seed: int = 0
    start: MonthKey = MonthKey(2020, 1)

    def __post_init__(self) -> None:
        if self.months < 1:
            raise ConfigError(f"months must be >= 1, got {self.months}")
        if self.nodes < 4:
            raise ConfigError(f"nodes must be >= 4, got {self.nodes}")
        if not 0.0 < self.edge_probability <= 1.0:
            raise ConfigError(
                f"edge_probability must lie in (0,1], got {self.edge_probability}"
            )
        if not 1 <= self.weight_min <= self.weight_max:
            raise ConfigError(
                f"need 1 <= weight_min <= weight_max, got "
                f"[{self.weight_min}, {self.weight_max}]"
            )
        if self.signal_strength < 0:
            raise ConfigError(f"signal_strength must be >= 0, got {self.signal_strength}")
        if self.signal_feature not in _ALL_COMPONENT_NAMES:
            raise ConfigError(
                f"unknown signal feature {self.signal_feature!r}; "
                f"expected a component name such as cn, wcn, deg_src"
            )


@dataclass
class SynthResult:
    config: SynthConfig
    aggregates: list[MonthlyEdgeAggregate]
    snapshots: dict[MonthKey, GraphSnapshot] = field(default_factory=dict)
    # generating P(label=True) per aggregate row, aligned with `aggregates`
    scores: list[float] = field(default_factory=list)


def _signal_column(feature: str) -> tuple[str, int]:
    for set_id, names in COMPONENTS.items():
        if feature in names:
            return set_id, names.index(feature)
    raise ConfigError(f"unknown signal feature {feature!r}")


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def generate(config: SynthConfig) -> SynthResult:
    """Seed-deterministic corpus of labeled aggregates plus snapshots."""
    set_id, column = _signal_column(config.signal_feature)
    node_names = [f"n{i:03d}" for i in range(config.nodes)]
    result = SynthResult(config=config, aggregates=[], snapshots={}, scores=[])
    flip_from = (config.months + 1) // 2  # sign inverts from this index on

    month = config.start
    for m in range(config.months):
        edges = _random_edges(config, m, node_names)
        g = GraphSnapshot(month, edges)
        result.snapshots[month] = g

        featurizer = SnapshotFeaturizer(g)
        pairs = sorted(edges)
        raw = np.array(
            [featurizer.compute(set_id, u, v)[column] for u, v in pairs]
        )
        std = float(raw.std())
        z = (raw - raw.mean()) / std if std > 0 else np.zeros_like(raw)
        sign = 1.0
        if not config.stationary and m >= flip_from:
            sign = -1.0

        rng_labels = derive(config.seed, "labels", m)
        draws = rng_labels.random(len(pairs))
        for (u, v), zi, draw in zip(pairs, z, draws):
            p = _sigmoid(config.signal_strength * sign * float(zi))
            label = bool(draw < p)
            result.scores.append(p)
            result.aggregates.append(
                MonthlyEdgeAggregate(
                    month=month,
                    source=u,
                    target=v,
                    rides_planned=edges[(u, v)],
                    final_arrival_delay_count=0,
                    final_arrival_cancelled_count=0,
                    completely_cancelled_count=0,
                    intermediate_delay_count=0,
                    proportion_delayed=0.0,
                    label=label,
                )
            )
        month = month.successor()
    return result


def _random_edges(
    config: SynthConfig, month_index: int, node_names: list[str]
) -> dict[tuple[str, str], int]:
    """Erdos-Renyi edge set with integer weights; never empty (retries with a
    derived stream, then falls back to one forced edge)."""
    n = len(node_names)
    for attempt in range(20):
        rng = derive(config.seed, "graph", month_index, attempt)
        mask = rng.random(n * (n - 1) // 2) < config.edge_probability
        weights = rng.integers(config.weight_min, config.weight_max + 1, size=mask.size)
        edges: dict[tuple[str, str], int] = {}
        pos = 0
        for i in range(n):
            for j in range(i + 1, n):
                if mask[pos]:
                    edges[(node_names[i], node_names[j])] = int(weights[pos])
                pos += 1
        if edges:
            return edges
    return {(node_names[0], node_names[1]): config.weight_min}


def shuffle_labels(
    aggregates: list[MonthlyEdgeAggregate], seed: int
) -> list[MonthlyEdgeAggregate]:
    """The permutation-null control: same rows, labels shuffled globally."""
    labels = [a.label for a in aggregates]
    perm = derive(seed, "shuffle-labels").permutation(len(labels))
    return [
        dataclasses.replace(a, label=labels[perm[i]])
        for i, a in enumerate(aggregates)
    ]


# ---------------------------------------------------------------------------
# Brute-force oracle. Direct definitions only: set scans, triple loops, BFS.
# ---------------------------------------------------------------------------


def oracle_features(g: GraphSnapshot, edge: tuple[str, str]) -> dict[str, float]:
    """Every TF/WTF/NCM component for one edge, by literal definition."""
    u, v = edge
    nodes = list(g.nodes)
    adjacency: dict[str, dict[str, float]] = {a: {} for a in nodes}
    for a, b, w in g.edges():
        adjacency[a][b] = float(w)
        adjacency[b][a] = float(w)

    def deg(x: str) -> float:
        return float(len(adjacency[x]))

    def strength(x: str) -> float:
        return float(sum(adjacency[x].values()))

    common: list[str] = []
    for node in nodes:
        if node in (u, v):
            continue
        if node in adjacency[u] and node in adjacency[v]:
            common.append(node)

    union = 0
    for node in nodes:
        if node in adjacency[u] or node in adjacency[v]:
            union += 1

    def safe_div(num: float, den: float) -> float:
        return num / den if den > 0 else 0.0

    ku, kv = deg(u), deg(v)
    cn = float(len(common))
    aa = 0.0
    ra = 0.0
    for node in common:
        aa += 1.0 / math.log(deg(node))
        ra += 1.0 / deg(node)

    # walk counts, literal loops
    s2 = 0.0
    t2 = 0.0
    for k in nodes:
        if k in adjacency[u] and v in adjacency[k]:
            s2 += 1.0
            t2 += adjacency[u][k] * adjacency[k][v]
    s3 = 0.0
    t3 = 0.0
    for k in nodes:
        if k not in adjacency[u]:
            continue
        for l in nodes:
            if l in adjacency[k] and v in adjacency[l]:
                s3 += 1.0
                t3 += adjacency[u][k] * adjacency[k][l] * adjacency[l][v]

    wcn = 0.0
    waa = 0.0
    wra = 0.0
    for node in common:
        wcn += min(adjacency[u][node], adjacency[v][node])
        sn = strength(node)
        if sn > 1:
            waa += 1.0 / math.log(sn)
        wra += 1.0 / sn
    su, sv = strength(u), strength(v)

    def bfs_closeness(start: str) -> float:
        dist = {start: 0}
        queue = [start]
        while queue:
            here = queue.pop(0)
            for nbr in adjacency[here]:
                if nbr not in dist:
                    dist[nbr] = dist[here] + 1
                    queue.append(nbr)
        total = sum(d for d in dist.values())
        return 1.0 / total if total > 0 else 0.0

    return {
        "cn": cn,
        "sa": safe_div(cn, math.sqrt(ku * kv)),
        "ja": safe_div(cn, float(union)),
        "so": safe_div(2.0 * cn, ku + kv),
        "hpi": safe_div(cn, min(ku, kv)),
        "hdi": safe_div(cn, max(ku, kv)),
        "lhni": safe_div(cn, ku * kv),
        "pa": ku * kv,
        "aa": aa,
        "ra": ra,
        "lpi": s2 + 0.01 * s3,
        "wcn": wcn,
        "wsa": safe_div(wcn, math.sqrt(su * sv)),
        "wja": safe_div(wcn, su + sv - wcn),
        "wso": safe_div(2.0 * wcn, su + sv),
        "whpi": safe_div(wcn, min(su, sv)),
        "whdi": safe_div(wcn, max(su, sv)),
        "wlhni": safe_div(wcn, su * sv),
        "wpa": su * sv,
        "waa": waa,
        "wra": wra,
        "wlpi": t2 + 0.01 * t3,
        "deg_src": ku,
        "deg_tgt": kv,
        "clo_src": bfs_closeness(u),
        "clo_tgt": bfs_closeness(v),
        "str_src": su,
        "str_tgt": sv,
    }
