"""Network statistics and node centralities for hub and broker detection.

Degree counts parallel edges.  Closeness and betweenness run on the directed
collapse with unit hop lengths; self-loops never take part in a shortest path.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import _kernels
from .community import CommunityPartition, detect_communities, modularity
from .netbuild import CollabGraph, SimpleWeightedGraph, collapse

__all__ = [
    "NetworkStats", "CentralityReport", "CommunityPartition",
    "degree_centrality", "closeness_centrality", "betweenness_centrality",
    "shortest_paths", "centrality_report", "network_stats", "detect_communities",
    "modularity", "density", "average_degree",
]


def density(n: int, m: int) -> float:
    """Multi-edge density m / (n (n-1)); 0 when n < 2."""
    if n < 2:
        return 0.0
    return m / (n * (n - 1))


def average_degree(n: int, m: int) -> float:
    return m / n if n else 0.0


@dataclass(frozen=True)
class NetworkStats:
    node_count: int
    multi_edge_count: int
    average_degree: float
    density: float
    diameter: int | None = None
    diameter_undirected: int | None = None
    modularity: float | None = None
    community_count: int | None = None

    @classmethod
    def from_counts(cls, n: int, m: int) -> "NetworkStats":
        return cls(n, m, average_degree(n, m), density(n, m))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class PathSummary:
    node_ids: list[int]
    dist: np.ndarray
    betweenness: np.ndarray

    def closeness(self, mode: str = "normalized") -> np.ndarray:
        if mode not in ("raw", "normalized"):
            raise ValueError("closeness mode must be 'raw' or 'normalized'")
        d = np.where(self.dist > 0, self.dist, 0)
        total = d.sum(axis=1).astype(np.float64)
        reach = (self.dist > 0).sum(axis=1)
        out = np.zeros(len(self.node_ids))
        ok = total > 0
        if mode == "raw":
            out[ok] = 1.0 / total[ok]
        else:
            out[ok] = reach[ok] / total[ok]
        return out

    def diameter(self) -> int:
        return int(self.dist.max()) if self.dist.size else 0


def shortest_paths(g: SimpleWeightedGraph, backend: str | None = None) -> PathSummary:
    ids, indptr, indices = g.csr()
    dist, bc = _kernels.bfs_all(indptr, indices, len(ids), backend=backend)
    return PathSummary(ids, dist, bc)


def _as_directed(g) -> SimpleWeightedGraph:
    if isinstance(g, CollabGraph):
        return collapse(g, directed=True)
    return g


def degree_centrality(graph: CollabGraph) -> dict[int, tuple[int, int, int]]:
    """(in, out, total) per node, counting every parallel edge."""
    ids, src, dst = graph.index_arrays()
    n = len(ids)
    out_deg = np.bincount(src, minlength=n)
    in_deg = np.bincount(dst, minlength=n)
    return {u: (int(in_deg[i]), int(out_deg[i]), int(in_deg[i] + out_deg[i]))
            for i, u in enumerate(ids)}


def closeness_centrality(g, mode: str = "normalized", backend: str | None = None) -> dict[int, float]:
    """Outgoing hop-distance closeness.

    raw: 1 / sum of distances to reachable nodes.  normalized: (r - 1) / that
    sum, r counting the node itself.  Nodes reaching nothing score 0.
    """
    paths = shortest_paths(_as_directed(g), backend)
    values = paths.closeness(mode)
    return {u: float(values[i]) for i, u in enumerate(paths.node_ids)}


def betweenness_centrality(g, backend: str | None = None) -> dict[int, float]:
    """Unnormalized directed betweenness over ordered pairs."""
    paths = shortest_paths(_as_directed(g), backend)
    return {u: float(paths.betweenness[i]) for i, u in enumerate(paths.node_ids)}


@dataclass(frozen=True)
class CentralityRow:
    node_id: int
    role: str
    in_degree: int
    out_degree: int
    total_degree: int
    closeness_raw: float
    closeness_norm: float
    betweenness: float
    community: int | None = None


@dataclass
class CentralityReport:
    rows: list[CentralityRow]

    def by_node(self) -> dict[int, CentralityRow]:
        return {r.node_id: r for r in self.rows}

    def top(self, key: str, k: int = 16) -> list[CentralityRow]:
        return sorted(self.rows, key=lambda r: (-getattr(r, key), r.node_id))[:k]


def centrality_report(graph: CollabGraph, partition: CommunityPartition | None = None,
                      backend: str | None = None) -> CentralityReport:
    degrees = degree_centrality(graph)
    paths = shortest_paths(collapse(graph, directed=True), backend)
    raw = paths.closeness("raw")
    norm = paths.closeness("normalized")
    rows = []
    for i, u in enumerate(paths.node_ids):
        d_in, d_out, d_tot = degrees[u]
        rows.append(CentralityRow(
            u, graph.nodes[u].role, d_in, d_out, d_tot, float(raw[i]), float(norm[i]),
            float(paths.betweenness[i]),
            partition.assignment.get(u) if partition is not None else None,
        ))
    return CentralityReport(rows)


def network_stats(graph: CollabGraph, *, communities: bool = True, seed: int = 0,
                  resolution: float = 1.0, backend: str | None = None) -> NetworkStats:
    """Table-style network summary.

    Diameter is the largest finite hop distance; the undirected figure is
    reported alongside the directed one.
    """
    base = NetworkStats.from_counts(graph.n, graph.m)
    if graph.n == 0:
        return base
    directed = shortest_paths(collapse(graph, directed=True), backend)
    undirected = shortest_paths(collapse(graph, directed=False), backend)
    q = k = None
    if communities:
        part = detect_communities(collapse(graph, directed=False), resolution=resolution, seed=seed)
        q, k = part.modularity_score, part.community_count
    return NetworkStats(base.node_count, base.multi_edge_count, base.average_degree, base.density,
                        directed.diameter(), undirected.diameter(), q, k)
