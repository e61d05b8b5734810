from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collabtwin.fcu import frequent_pairs, frequent_pairs_labeled, isf, lisf
from collabtwin.netbuild import UnknownLabelError, UnknownNodeError

from conftest import make_graph


def xy_graph():
    return make_graph([("x", "y", "H")] * 2 + [("x", "y", "M")] + [("y", "x", "L")] * 2 + [("u", "w", "L")]
                      + [("v", "v", "L")])


def test_isf_directed_and_undirected():
    g = xy_graph()
    assert isf(g, "x", "y", "directed") == 3
    assert isf(g, "y", "x", "directed") == 2
    assert isf(g, "x", "y") == 5
    assert isf(g, "u", "x") == 0


def test_isf_chain(chain):
    assert isf(chain, 2, 3) == 2
    assert isf(chain, 2, 3, "directed") == 1


def test_isf_errors():
    g = xy_graph()
    with pytest.raises(UnknownNodeError):
        isf(g, "x", "nobody")
    with pytest.raises(ValueError):
        isf(g, "x", "x")
    with pytest.raises(ValueError):
        isf(g, "x", "y", "sideways")


def test_lisf():
    g = xy_graph()
    assert lisf(g, "level", "H", "x", "y", "directed") == 2
    assert lisf(g, "level", "M", "x", "y", "directed") == 1
    assert lisf(g, "level", "L", "x", "y", "directed") == 0
    assert lisf(g, "level", "L", "x", "y") == 2
    with pytest.raises(UnknownLabelError):
        lisf(g, "level", "Z", "x", "y")


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.sampled_from("LMH")), min_size=1, max_size=60),
       st.sampled_from(["directed", "undirected"]))
@settings(max_examples=60, deadline=None)
def test_partition_identity(arcs, direction):
    g = make_graph(arcs)
    nodes = g.node_ids()
    for x in nodes:
        for y in nodes:
            if x != y:
                total = sum(lisf(g, "level", lv, x, y, direction) for lv in "LMH")
                assert total == isf(g, x, y, direction)


def test_threshold():
    arcs = [("a", "b")] * 120 + [("c", "d")] * 99 + [("e", "f")] * 50 + [("f", "e")] * 50
    report, sub = frequent_pairs(make_graph(arcs), 100)
    assert [(p.x, p.y, p.frequency) for p in report.pairs] == [("a", "b", 120), ("e", "f", 100)]
    assert sub.arcs == {("a", "b"): 120, ("e", "f"): 100}
    assert set(sub.nodes) == {"a", "b", "e", "f"}
    directed, _ = frequent_pairs(make_graph(arcs), 100, "directed")
    assert [(p.x, p.y) for p in directed.pairs] == [("a", "b")]


def test_threshold_one_keeps_every_connected_pair():
    g = xy_graph()
    report, _ = frequent_pairs(g, 1)
    assert {(p.x, p.y) for p in report.pairs} == {("x", "y"), ("u", "w")}
    with pytest.raises(ValueError):
        frequent_pairs(g, 0)


def test_planted_pair_only():
    rng = np.random.default_rng(1)
    arcs = []
    users = list(range(2, 30))
    pair_counts = Counter()
    while len(arcs) < 2000:
        a, b = (int(v) for v in rng.choice(users, 2, replace=False))
        key = tuple(sorted((a, b)))
        if pair_counts[key] < 20:
            pair_counts[key] += 1
            arcs.append((a, b))
    arcs += [(0, 1)] * 75 + [(1, 0)] * 75
    report, _ = frequent_pairs(make_graph(arcs), 100)
    assert report.keys() == [(0, 1, None)]


def test_labeled_pairs():
    arcs = [("p", "q", "H")] * 70 + [("q", "p", "M")] * 50 + [("r", "s", "H")] * 60
    report = frequent_pairs_labeled(make_graph(arcs), "level", 60)
    assert [(p.x, p.y, p.label, p.frequency) for p in report.pairs] == [("p", "q", "H", 70), ("r", "s", "H", 60)]
    assert frequent_pairs_labeled(make_graph([]), "level", 60).pairs == []


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.sampled_from("LMH")), max_size=80),
       st.integers(1, 10), st.integers(0, 10))
@settings(max_examples=60, deadline=None)
def test_monotone_and_recount(arcs, t, bump):
    g = make_graph(arcs)
    low, _ = frequent_pairs(g, t)
    high, _ = frequent_pairs(g, t + bump)
    assert set(high.keys()) <= set(low.keys())
    recount = Counter(tuple(sorted(a[:2])) for a in arcs if a[0] != a[1])
    for p in low.pairs:
        assert p.frequency == recount[(p.x, p.y)] >= t
    assert low.pairs == sorted(low.pairs, key=lambda p: (-p.frequency, p.x, p.y))


def test_report_csv():
    report, _ = frequent_pairs(make_graph([(1, 2)] * 3), 2)
    assert report.to_csv() == "x,y,label,frequency,direction\n1,2,,3,undirected\n"
