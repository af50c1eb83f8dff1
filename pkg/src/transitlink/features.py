"""Per-edge topological feature sets on a monthly snapshot.

Three sets, fixed component orders:

tf   cn, sa, ja, so, hpi, hdi, lhni, pa, aa, ra, lpi
wtf  wcn, wsa, wja, wso, whpi, whdi, wlhni, wpa, waa, wra, wlpi
ncm  deg_src, deg_tgt, clo_src, clo_tgt, str_src, str_tgt

Unweighted indices work on neighbor sets and degrees; weighted ones replace
the common-neighbor count by a min-weight sum and degrees by node strengths.
The local-path indices use walk-count matrix entries (A^2 + eps*A^3 on the
binary matrix, W^2 + eps*W^3 on the weight matrix) with eps = 0.01.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError
from .months import MonthKey
from .snapshots import GraphSnapshot

EPSILON = 0.01

# Above this node count the walk-count matrices go sparse.
DENSE_NODE_LIMIT = 2000

TF = "tf"
WTF = "wtf"
NCM = "ncm"
FEATURE_SET_IDS: tuple[str, ...] = (TF, WTF, NCM)

COMPONENTS: dict[str, tuple[str, ...]] = {
    TF: ("cn", "sa", "ja", "so", "hpi", "hdi", "lhni", "pa", "aa", "ra", "lpi"),
    WTF: ("wcn", "wsa", "wja", "wso", "whpi", "whdi", "wlhni", "wpa", "waa", "wra", "wlpi"),
    NCM: ("deg_src", "deg_tgt", "clo_src", "clo_tgt", "str_src", "str_tgt"),
}


def component_names(sets: Sequence[str]) -> list[str]:
    """Canonical column order for the requested sets."""
    names: list[str] = []
    for set_id in sets:
        if set_id not in COMPONENTS:
            raise DataError(f"unknown feature set {set_id!r}; expected one of {FEATURE_SET_IDS}")
        names.extend(COMPONENTS[set_id])
    return names


@dataclass(frozen=True)
class FeatureVector:
    """One feature set evaluated on one labeled snapshot edge."""

    month: MonthKey
    source: str
    target: str
    set_id: str
    values: tuple[float, ...]
    label: Optional[bool] = None


def _ratio(num: float, den: float) -> float:
    """Similarity ratios carry no evidence on a zero denominator."""
    return num / den if den > 0 else 0.0


class SnapshotFeaturizer:
    """Caches per-snapshot structure so many edges share one preparation.

    Walk-count matrices are computed once per snapshot (dense below
    DENSE_NODE_LIMIT nodes, sparse above); closeness BFS runs lazily per node.
    """

    def __init__(self, g: GraphSnapshot):
        self.g = g
        self._index = {node: i for i, node in enumerate(g.nodes)}
        self._nbrs: dict[str, set[str]] = {u: set(g.neighbors(u)) for u in g.nodes}
        self._closeness: dict[str, float] = {}
        self.waa_terms_skipped = 0

    def _idx(self, u: str) -> int:
        try:
            return self._index[u]
        except KeyError:
            raise DataError(f"node {u!r} is not in the {self.g.month} snapshot") from None

    @cached_property
    def _walk_matrices(self):
        """(A2, A3, W2, W3) walk-count matrices, dense or CSR by size."""
        n = self.g.n_nodes
        if n <= DENSE_NODE_LIMIT:
            a = np.zeros((n, n))
            w = np.zeros((n, n))
            for u, v, weight in self.g.edges():
                i, j = self._index[u], self._index[v]
                a[i, j] = a[j, i] = 1.0
                w[i, j] = w[j, i] = float(weight)
            a2 = a @ a
            a3 = a2 @ a
            w2 = w @ w
            w3 = w2 @ w
            return a2, a3, w2, w3
        rows, cols, w_data = [], [], []
        for u, v, weight in self.g.edges():
            i, j = self._index[u], self._index[v]
            rows += [i, j]
            cols += [j, i]
            w_data += [float(weight), float(weight)]
        w = sp.csr_matrix((w_data, (rows, cols)), shape=(n, n))
        a = sp.csr_matrix((np.ones(len(w_data)), (rows, cols)), shape=(n, n))
        a2 = (a @ a).tocsr()
        a3 = (a2 @ a).tocsr()
        w2 = (w @ w).tocsr()
        w3 = (w2 @ w).tocsr()
        return a2, a3, w2, w3

    def _walks(self, u: str, v: str) -> tuple[float, float, float, float]:
        a2, a3, w2, w3 = self._walk_matrices
        i, j = self._idx(u), self._idx(v)
        return float(a2[i, j]), float(a3[i, j]), float(w2[i, j]), float(w3[i, j])

    def closeness(self, u: str) -> float:
        """1 / sum of hop distances to reachable nodes; 0 when none reachable."""
        cached = self._closeness.get(u)
        if cached is not None:
            return cached
        self._idx(u)
        total = 0
        seen = {u}
        frontier = [u]
        depth = 0
        while frontier:
            depth += 1
            nxt: list[str] = []
            for node in frontier:
                for nbr in self._nbrs[node]:
                    if nbr not in seen:
                        seen.add(nbr)
                        nxt.append(nbr)
            total += depth * len(nxt)
            frontier = nxt
        value = 1.0 / total if total > 0 else 0.0
        self._closeness[u] = value
        return value

    def _common(self, u: str, v: str) -> tuple[str, ...]:
        # sorted so float accumulations do not depend on set hash order
        common = self._nbrs[u] & self._nbrs[v]
        return tuple(sorted(n for n in common if n != u and n != v))

    def unweighted(self, u: str, v: str) -> np.ndarray:
        if u == v:
            raise DataError(f"degenerate edge {u!r}-{u!r}")
        self._idx(u), self._idx(v)
        g = self.g
        common = self._common(u, v)
        cn = float(len(common))
        ki, kj = g.degree(u), g.degree(v)
        s2, s3, _, _ = self._walks(u, v)
        # |union| via inclusion-exclusion equals the literal neighbor-set union
        # because neighbor sets never contain their own node.
        union = ki + kj - cn
        aa = sum(1.0 / math.log(g.degree(n)) for n in common)
        ra = sum(1.0 / g.degree(n) for n in common)
        values = np.array(
            [
                cn,
                _ratio(cn, math.sqrt(ki * kj)),
                _ratio(cn, union),
                _ratio(2.0 * cn, ki + kj),
                _ratio(cn, min(ki, kj)),
                _ratio(cn, max(ki, kj)),
                _ratio(cn, ki * kj),
                float(ki * kj),
                aa,
                ra,
                s2 + EPSILON * s3,
            ]
        )
        return values

    def weighted(self, u: str, v: str) -> np.ndarray:
        if u == v:
            raise DataError(f"degenerate edge {u!r}-{u!r}")
        self._idx(u), self._idx(v)
        g = self.g
        common = self._common(u, v)
        wcn = float(sum(min(g.weight(u, n), g.weight(v, n)) for n in common))
        si, sj = float(g.strength(u)), float(g.strength(v))
        _, _, t2, t3 = self._walks(u, v)
        waa = 0.0
        for n in common:
            sn = g.strength(n)
            if sn <= 1:
                self.waa_terms_skipped += 1
                continue
            waa += 1.0 / math.log(sn)
        wra = sum(1.0 / g.strength(n) for n in common)
        values = np.array(
            [
                wcn,
                _ratio(wcn, math.sqrt(si * sj)),
                _ratio(wcn, si + sj - wcn),
                _ratio(2.0 * wcn, si + sj),
                _ratio(wcn, min(si, sj)),
                _ratio(wcn, max(si, sj)),
                _ratio(wcn, si * sj),
                si * sj,
                waa,
                wra,
                t2 + EPSILON * t3,
            ]
        )
        return values

    def centrality(self, u: str, v: str) -> np.ndarray:
        if u == v:
            raise DataError(f"degenerate edge {u!r}-{u!r}")
        self._idx(u), self._idx(v)
        g = self.g
        return np.array(
            [
                float(g.degree(u)),
                float(g.degree(v)),
                self.closeness(u),
                self.closeness(v),
                float(g.strength(u)),
                float(g.strength(v)),
            ]
        )

    def compute(self, set_id: str, u: str, v: str) -> np.ndarray:
        if set_id == TF:
            out = self.unweighted(u, v)
        elif set_id == WTF:
            out = self.weighted(u, v)
        elif set_id == NCM:
            out = self.centrality(u, v)
        else:
            raise DataError(f"unknown feature set {set_id!r}")
        if not np.all(np.isfinite(out)):
            raise DataError(
                f"non-finite {set_id} feature on edge {u!r}-{v!r} in month {self.g.month}"
            )
        return out


def unweighted_features(g: GraphSnapshot, edge: tuple[str, str]) -> np.ndarray:
    """One-off TF vector; batch callers should reuse a SnapshotFeaturizer."""
    return SnapshotFeaturizer(g).unweighted(*edge)


def weighted_features(g: GraphSnapshot, edge: tuple[str, str]) -> np.ndarray:
    return SnapshotFeaturizer(g).weighted(*edge)


def centrality_features(g: GraphSnapshot, edge: tuple[str, str]) -> np.ndarray:
    return SnapshotFeaturizer(g).centrality(*edge)


def featurize_snapshot(
    g: GraphSnapshot,
    rows: Iterable,
    sets: Sequence[str] = FEATURE_SET_IDS,
) -> list[FeatureVector]:
    """One FeatureVector per requested set per labeled row.

    Rows need month/source/target/label attributes (edge aggregates and edge
    labels both qualify). A row whose endpoints are missing from the snapshot
    is an error naming that row.
    """
    component_names(sets)  # validates set ids up front
    featurizer = SnapshotFeaturizer(g)
    out: list[FeatureVector] = []
    for row in rows:
        if row.month != g.month:
            raise DataError(
                f"row {row.source}->{row.target} belongs to {row.month}, "
                f"not to the {g.month} snapshot"
            )
        for node in (row.source, row.target):
            if not g.has_node(node):
                raise DataError(
                    f"row {row.month} {row.source}->{row.target} references node "
                    f"{node!r} absent from the snapshot"
                )
        for set_id in sets:
            values = featurizer.compute(set_id, row.source, row.target)
            out.append(
                FeatureVector(
                    month=row.month,
                    source=row.source,
                    target=row.target,
                    set_id=set_id,
                    values=tuple(float(x) for x in values),
                    label=row.label,
                )
            )
    return out
