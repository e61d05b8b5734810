"""Frequently collaborating users: information sharing frequency per user pair."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field

from .netbuild import CollabGraph, SimpleWeightedGraph, _check_axis, collapse

DIRECTIONS = ("directed", "undirected")


def _check_direction(direction: str) -> None:
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


@dataclass(frozen=True)
class FrequentPair:
    x: int
    y: int
    frequency: int
    label: str | None
    direction: str


@dataclass
class FrequentPairReport:
    pairs: list[FrequentPair]
    threshold: int
    direction: str
    label_axis: str | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.pairs)

    def keys(self) -> list[tuple]:
        return [(p.x, p.y, p.label) for p in self.pairs]

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "label", "frequency", "direction"])
        for p in self.pairs:
            writer.writerow([p.x, p.y, p.label or "", p.frequency, p.direction])
        return buf.getvalue()


def isf(graph: CollabGraph, x, y, direction: str = "undirected") -> int:
    """Edges x->y (directed), or x->y plus y->x (undirected)."""
    _check_direction(direction)
    graph.check_node(x)
    graph.check_node(y)
    if x == y:
        raise ValueError("isf needs two distinct users")
    counts = graph.arc_counts
    if direction == "directed":
        return counts.get((x, y), 0)
    return counts.get((x, y), 0) + counts.get((y, x), 0)


def lisf(graph: CollabGraph, label_axis: str, label_value: str, x, y,
         direction: str = "undirected") -> int:
    """As :func:`isf`, counting only edges whose ``label_axis`` label is ``label_value``."""
    _check_direction(direction)
    graph.check_label(label_axis, label_value)
    graph.check_node(x)
    graph.check_node(y)
    if x == y:
        raise ValueError("lisf needs two distinct users")
    counts = graph.labeled_arc_counts[label_axis]
    n = counts.get((x, y, label_value), 0)
    if direction == "undirected":
        n += counts.get((y, x, label_value), 0)
    return n


def _sort_key(p: FrequentPair):
    return (-p.frequency, p.x, p.y, p.label or "")


def frequent_pairs(graph: CollabGraph, min_isf: int, direction: str = "undirected"
                   ) -> tuple[FrequentPairReport, SimpleWeightedGraph]:
    """Pairs with isf >= min_isf, plus the thresholded weighted subgraph.

    Self-loops are not pairs and never reported.
    """
    _check_direction(direction)
    if min_isf < 1:
        raise ValueError("min_isf must be >= 1")
    merged = collapse(graph, directed=direction == "directed")
    kept = {k: w for k, w in merged.arcs.items() if k[0] != k[1] and w >= min_isf}
    pairs = sorted((FrequentPair(a, b, w, None, direction) for (a, b), w in kept.items()), key=_sort_key)
    involved = {u for k in kept for u in k}
    sub = SimpleWeightedGraph({u: graph.nodes[u] for u in sorted(involved)}, kept, merged.directed,
                              meta={"min_isf": min_isf})
    return FrequentPairReport(pairs, min_isf, direction), sub


def frequent_pairs_labeled(graph: CollabGraph, label_axis: str, min_lisf: int,
                           direction: str = "undirected") -> FrequentPairReport:
    """One entry per (pair, label value) with lisf >= min_lisf."""
    _check_axis(label_axis)
    _check_direction(direction)
    if min_lisf < 1:
        raise ValueError("min_lisf must be >= 1")
    counts: Counter = Counter()
    for (a, b, label), n in graph.labeled_arc_counts[label_axis].items():
        if a == b:
            continue
        if direction == "undirected" and a > b:
            a, b = b, a
        counts[(a, b, label)] += n
    pairs = sorted((FrequentPair(a, b, n, label, direction)
                    for (a, b, label), n in counts.items() if n >= min_lisf), key=_sort_key)
    return FrequentPairReport(pairs, min_lisf, direction, label_axis)
