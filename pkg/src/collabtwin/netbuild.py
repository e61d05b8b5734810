"""Multi-directed collaboration graph, weighted collapses, and GML / edge-list export."""

from __future__ import annotations

import csv
import html
import io
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .ingest import EnrichedDataset

AXES = ("level", "type")


class UnknownLabelError(ValueError):
    pass


class UnknownNodeError(KeyError):
    pass


@dataclass(frozen=True)
class Node:
    user_id: int
    role: str = ""
    organization: str = ""


@dataclass(frozen=True)
class Edge:
    edge_id: str
    src: int
    dst: int
    issue_id: int
    level: str
    type: str
    timestamp: int

    def label(self, axis: str) -> str:
        if axis == "level":
            return self.level
        if axis == "type":
            return self.type
        raise ValueError(f"unknown label axis {axis!r}")


def _check_axis(axis: str) -> None:
    if axis not in AXES:
        raise ValueError(f"label axis must be one of {AXES}, got {axis!r}")


class CollabGraph:
    """Multigraph: users as nodes, one directed edge per forward.

    Treat as immutable after construction; pair-count indices are cached.
    """

    def __init__(self, nodes=(), edges=(), label_values: dict[str, tuple[str, ...]] | None = None):
        self.nodes: dict[int, Node] = {}
        for node in nodes:
            self.nodes[node.user_id] = node
        self.edges: tuple[Edge, ...] = tuple(edges)
        ids = set()
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise ValueError(f"edge {e.edge_id} has an endpoint outside the node set")
            if e.edge_id in ids:
                raise ValueError(f"duplicate edge id {e.edge_id}")
            ids.add(e.edge_id)
        if label_values is None:
            label_values = {axis: tuple(sorted({e.label(axis) for e in self.edges})) for axis in AXES}
        self.label_values = {axis: tuple(v) for axis, v in label_values.items()}

    def __repr__(self):
        return f"CollabGraph(n={self.n}, m={self.m})"

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def m(self) -> int:
        return len(self.edges)

    def node_ids(self) -> list[int]:
        return sorted(self.nodes)

    def check_label(self, axis: str, value: str) -> None:
        _check_axis(axis)
        if value not in self.label_values.get(axis, ()):
            raise UnknownLabelError(f"unknown {axis} label {value!r}")

    def check_node(self, node_id) -> None:
        if node_id not in self.nodes:
            raise UnknownNodeError(f"unknown node {node_id!r}")

    @cached_property
    def arc_counts(self) -> Counter:
        return Counter((e.src, e.dst) for e in self.edges)

    @cached_property
    def labeled_arc_counts(self) -> dict[str, Counter]:
        return {axis: Counter((e.src, e.dst, e.label(axis)) for e in self.edges) for axis in AXES}

    def index_arrays(self) -> tuple[list[int], np.ndarray, np.ndarray]:
        """Sorted node ids and edge endpoint indices into that order."""
        ids = self.node_ids()
        pos = {u: i for i, u in enumerate(ids)}
        src = np.fromiter((pos[e.src] for e in self.edges), dtype=np.int64, count=self.m)
        dst = np.fromiter((pos[e.dst] for e in self.edges), dtype=np.int64, count=self.m)
        return ids, src, dst


def build_network(data: EnrichedDataset) -> CollabGraph:
    """Walk issues in id order and their forwards in time order; one edge per forward.

    Nodes come only from forward endpoints, so a creator who never forwarded
    or received anything is not part of the graph.
    """
    nodes: dict[int, Node] = {}
    edges = []
    for issue, fwd in data.iter_forwards():
        for uid in (fwd.from_user, fwd.to_user):
            if uid not in nodes:
                user = data.users.get(uid)
                nodes[uid] = Node(uid, (user.role or "") if user else "",
                                  user.organization if user else "")
        edges.append(Edge(fwd.forward_id, fwd.from_user, fwd.to_user, issue.issue_id,
                          issue.level, issue.type, fwd.created_at or 0))
    labels = {"level": data.labels.axis_values("level"), "type": data.labels.axis_values("type")}
    return CollabGraph(sorted(nodes.values(), key=lambda n: n.user_id), edges, labels)


@dataclass
class SimpleWeightedGraph:
    nodes: dict[int, Node]
    arcs: dict[tuple[int, int], int]
    directed: bool = True
    restriction: tuple[str, str] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.nodes)

    def total_weight(self) -> int:
        return sum(self.arcs.values())

    def node_ids(self) -> list[int]:
        return sorted(self.nodes)

    def csr(self) -> tuple[list[int], np.ndarray, np.ndarray]:
        """Node order plus CSR of the unit-length digraph (self-loops dropped).

        Undirected graphs are symmetrised.
        """
        from ._kernels import to_csr

        ids = self.node_ids()
        pos = {u: i for i, u in enumerate(ids)}
        pairs = [(pos[a], pos[b]) for (a, b) in self.arcs]
        if not self.directed:
            pairs += [(b, a) for a, b in pairs]
        src = np.array([p[0] for p in pairs], dtype=np.int64)
        dst = np.array([p[1] for p in pairs], dtype=np.int64)
        indptr, indices = to_csr(len(ids), src, dst)
        return ids, indptr, indices

    def scaled(self, factor: int) -> "SimpleWeightedGraph":
        return SimpleWeightedGraph(dict(self.nodes), {k: w * factor for k, w in self.arcs.items()},
                                   self.directed, self.restriction)


def _pair_key(a, b, directed: bool):
    return (a, b) if directed or a <= b else (b, a)


def collapse(graph: CollabGraph, directed: bool = True,
             label_filter: tuple[str, str] | None = None) -> SimpleWeightedGraph:
    """Merge parallel edges into weighted arcs, optionally counting one label value only."""
    if label_filter is not None:
        axis, value = label_filter
        graph.check_label(axis, value)
    arcs: Counter = Counter()
    for e in graph.edges:
        if label_filter is not None and e.label(label_filter[0]) != label_filter[1]:
            continue
        arcs[_pair_key(e.src, e.dst, directed)] += 1
    ordered = {k: arcs[k] for k in sorted(arcs)}
    return SimpleWeightedGraph(dict(graph.nodes), ordered, directed,
                               tuple(label_filter) if label_filter else None)


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

def _gml_str(value) -> str:
    text = str(value)
    # GML strings cannot hold raw quotes; use the HTML entity like most writers
    text = text.replace("&", "&amp;").replace('"', "&quot;")
    return '"' + text.encode("ascii", "xmlcharrefreplace").decode("ascii") + '"'


def gml_lines(graph) -> list[str]:
    multi = isinstance(graph, CollabGraph)
    directed = True if multi else graph.directed
    lines = ["graph ["]
    lines.append(f"  directed {1 if directed else 0}")
    if multi and graph.edges:
        lines.append("  multigraph 1")
    for uid in graph.node_ids():
        node = graph.nodes[uid]
        lines += ["  node [", f"    id {uid}", f"    label {_gml_str(uid)}",
                  f"    role {_gml_str(node.role)}", f"    org {_gml_str(node.organization)}", "  ]"]
    if multi:
        for e in graph.edges:
            lines += ["  edge [", f"    source {e.src}", f"    target {e.dst}",
                      f"    id {_gml_str(e.edge_id)}", f"    issueid {e.issue_id}",
                      f"    level {_gml_str(e.level)}", f"    type {_gml_str(e.type)}",
                      f"    ts {e.timestamp}", "  ]"]
    else:
        for (a, b), w in graph.arcs.items():
            lines += ["  edge [", f"    source {a}", f"    target {b}", f"    value {w}", "  ]"]
    lines.append("]")
    return lines


def to_gml(graph) -> bytes:
    return ("\n".join(gml_lines(graph)) + "\n").encode("ascii")


def export_gml(graph, sink) -> bytes:
    """Write GML to a path or binary stream and return the bytes written."""
    data = to_gml(graph)
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        with open(sink, "wb") as fh:
            fh.write(data)
    return data


def _gml_tokens(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "[]":
            yield ch
            i += 1
        elif ch == '"':
            j = text.index('"', i + 1)
            yield ("str", text[i + 1:j])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '[]"':
                j += 1
            yield text[i:j]
            i = j


def _gml_tree(tokens) -> list:
    items = []
    for tok in tokens:
        if tok == "]":
            return items
        key = tok
        value = next(tokens)
        if value == "[":
            value = _gml_tree(tokens)
        elif isinstance(value, tuple):
            value = html.unescape(value[1])
        else:
            value = int(value) if re.fullmatch(r"[+-]?\d+", value) else float(value)
        items.append((key, value))
    return items


def read_gml(data: bytes | str):
    """Parse GML produced by :func:`to_gml` back into a graph object."""
    text = data.decode("ascii") if isinstance(data, bytes) else data
    top = _gml_tree(iter(_gml_tokens(text)))
    graphs = [v for k, v in top if k == "graph"]
    if len(graphs) != 1:
        raise ValueError("expected exactly one graph block")
    body = graphs[0]
    attrs = {k: v for k, v in body if not isinstance(v, list)}
    directed = bool(attrs.get("directed", 0))
    nodes = []
    edges = []
    for key, value in body:
        if key == "node":
            d = dict(value)
            nodes.append(Node(int(d["id"]), d.get("role", ""), d.get("org", "")))
        elif key == "edge":
            edges.append(dict(value))
    is_multi = bool(attrs.get("multigraph", 0)) or any("issueid" in e for e in edges)
    if is_multi:
        return CollabGraph(nodes, [
            Edge(e["id"], e["source"], e["target"], e["issueid"], e["level"], e["type"], e["ts"])
            for e in edges])
    if not edges and directed:
        return CollabGraph(nodes, [])
    arcs = {(e["source"], e["target"]): e["value"] for e in edges}
    return SimpleWeightedGraph({n.user_id: n for n in nodes}, arcs, directed)


def edge_list_csv(graph: CollabGraph) -> str:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["src", "dst", "issue_id", "level", "type", "ts"])
    for e in graph.edges:
        writer.writerow([e.src, e.dst, e.issue_id, e.level, e.type, e.timestamp])
    return buf.getvalue()
