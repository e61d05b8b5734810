"""Louvain modularity maximisation on the undirected weighted collapse."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .netbuild import SimpleWeightedGraph


@dataclass
class CommunityPartition:
    assignment: dict[int, int]
    community_count: int
    modularity_score: float
    resolution: float
    seed: int

    def members(self) -> dict[int, list[int]]:
        out = defaultdict(list)
        for node, c in sorted(self.assignment.items()):
            out[c].append(node)
        return dict(out)


def _undirected_weights(g: SimpleWeightedGraph) -> dict[tuple[int, int], float]:
    """Unordered pair -> weight, self-loops removed, both arc directions summed."""
    w: dict[tuple[int, int], float] = defaultdict(float)
    for (a, b), weight in g.arcs.items():
        if a == b:
            continue
        w[(a, b) if a < b else (b, a)] += weight
    return w


def modularity(g: SimpleWeightedGraph, assignment: dict[int, int]) -> float:
    """Q = sum_c [ l_c / m - (d_c / 2m)^2 ] with self-loops ignored."""
    weights = _undirected_weights(g)
    m = sum(weights.values())
    if m == 0:
        return 0.0
    internal = defaultdict(float)
    degree_sum = defaultdict(float)
    for (a, b), w in weights.items():
        ca, cb = assignment[a], assignment[b]
        degree_sum[ca] += w
        degree_sum[cb] += w
        if ca == cb:
            internal[ca] += w
    return sum(internal[c] / m - (degree_sum[c] / (2 * m)) ** 2 for c in set(assignment.values()))


def _one_level(adj: list[dict[int, float]], loops: list[float], m: float, resolution: float,
               order: np.ndarray) -> tuple[list[int], bool]:
    n = len(adj)
    comm = list(range(n))
    k = [sum(adj[i].values()) + 2 * loops[i] for i in range(n)]
    tot = list(k)
    improved = False
    moved = True
    while moved:
        moved = False
        for i in order:
            i = int(i)
            ci = comm[i]
            links = defaultdict(float)
            for j, w in adj[i].items():
                links[comm[j]] += w
            tot[ci] -= k[i]
            scale = resolution * k[i] / (2 * m)
            best_c = ci
            best_gain = links.get(ci, 0.0) - scale * tot[ci]
            for c in sorted(links):
                gain = links[c] - scale * tot[c]
                # ascending scan + strict test: ties stay put or go to the lowest id
                if gain > best_gain + 1e-12:
                    best_c, best_gain = c, gain
            tot[best_c] += k[i]
            if best_c != ci:
                comm[i] = best_c
                moved = improved = True
    return comm, improved


def detect_communities(g: SimpleWeightedGraph, resolution: float = 1.0, seed: int = 0) -> CommunityPartition:
    """Seeded Louvain: local moving then aggregation until nothing moves.

    Node visiting order per level is a permutation drawn from ``seed``.
    Gain ties go to the lowest community id.  The reported score is plain
    modularity (resolution 1) recomputed from the final assignment.
    """
    ids = g.node_ids()
    if not ids:
        return CommunityPartition({}, 0, 0.0, resolution, seed)
    rng = np.random.default_rng(seed)
    pos = {u: i for i, u in enumerate(ids)}
    weights = _undirected_weights(g)
    m = sum(weights.values())

    adj: list[dict[int, float]] = [dict() for _ in ids]
    for (a, b), w in weights.items():
        adj[pos[a]][pos[b]] = w
        adj[pos[b]][pos[a]] = w
    loops = [0.0] * len(ids)
    member_of = list(range(len(ids)))  # original node -> current super-node

    if m > 0:
        while True:
            comm, improved = _one_level(adj, loops, m, resolution, rng.permutation(len(adj)))
            if not improved:
                break
            relabel = {c: i for i, c in enumerate(sorted(set(comm)))}
            comm = [relabel[c] for c in comm]
            member_of = [comm[s] for s in member_of]
            size = len(relabel)
            new_adj: list[dict[int, float]] = [defaultdict(float) for _ in range(size)]
            new_loops = [0.0] * size
            for i, nbrs in enumerate(adj):
                ci = comm[i]
                new_loops[ci] += loops[i]
                for j, w in nbrs.items():
                    cj = comm[j]
                    if ci == cj:
                        if i < j:
                            new_loops[ci] += w
                    else:
                        new_adj[ci][cj] += w
            adj = [dict(d) for d in new_adj]
            loops = new_loops

    # community ids ordered by their smallest member id
    first: dict[int, int] = {}
    for i, u in enumerate(ids):
        first.setdefault(member_of[i], len(first))
    assignment = {u: first[member_of[i]] for i, u in enumerate(ids)}
    q = modularity(g, assignment)
    return CommunityPartition(assignment, len(first), q, resolution, seed)
