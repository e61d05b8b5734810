import numpy as np
import pytest

from collabtwin import _kernels
from collabtwin.ingest import EnrichedDataset, ForwardEvent, IssueRecord, LabelMap, UserRecord, associate, clean, enrich
from collabtwin.netbuild import CollabGraph, Edge, Node, build_network

BACKENDS = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    def record(line: str):
        print(line)
        _ACCEPTANCE_LINES.append(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def make_graph(arcs, labels=None) -> CollabGraph:
    """Multigraph from (src, dst) or (src, dst, level) tuples; one issue per edge."""
    nodes = sorted({u for a in arcs for u in a[:2]})
    edges = []
    for i, a in enumerate(arcs):
        level = a[2] if len(a) > 2 else "M"
        issue = a[3] if len(a) > 3 else i
        edges.append(Edge(str(i), a[0], a[1], issue, level, "Safety", 1000 + i))
    label_values = labels or {"level": ("H", "L", "M"), "type": ("Quality", "Safety")}
    return CollabGraph([Node(u) for u in nodes], edges, label_values)


def random_digraph(rng, n: int, p: float) -> dict:
    adj = {i: [] for i in range(n)}
    if n > 1:
        mask = rng.random((n, n)) < p
        np.fill_diagonal(mask, False)
        for i, j in zip(*np.nonzero(mask)):
            adj[int(i)].append(int(j))
    return adj


def chain_dataset(duplicate: bool = False) -> EnrichedDataset:
    """One issue walked U1->U2->U3->U2->U4 (users 1..4)."""
    issue = IssueRecord(1, 442, "rebar spacing exceeds tolerance at pier", 2, 2, 5, 1553078874, 1)
    chain = [(1, 2), (2, 3), (3, 2), (2, 4)]
    if duplicate:
        chain.insert(2, (2, 3))
    forwards = [ForwardEvent(str(10 + k), 1, a, b, 1553078900 + k) for k, (a, b) in enumerate(chain)]
    users = [UserRecord(1, 2, "GC"), UserRecord(2, 4, "GC"), UserRecord(3, 2, "Sub"), UserRecord(4, 1, "Owner")]
    linked = associate(clean([issue], forwards), users)
    return enrich(linked, LabelMap.default())


@pytest.fixture
def chain():
    return build_network(chain_dataset())
