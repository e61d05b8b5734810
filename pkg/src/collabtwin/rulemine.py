"""Apriori over per-issue edge transactions, and association rules between flows."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import _kernels
from .netbuild import CollabGraph, _check_axis

Itemset = frozenset


@dataclass(frozen=True)
class Transaction:
    issue_id: int
    items: frozenset[str]


def edge_item(src, dst, label: str | None = None) -> str:
    return f"{src}->{dst}" if label is None else f"{src}->{dst}:{label}"


def build_transactions(graph: CollabGraph, labeled: bool = False,
                       label_axis: str = "level") -> list[Transaction]:
    """One transaction per issue with at least one forward; items are distinct edges."""
    if labeled:
        _check_axis(label_axis)
    items: dict[int, set[str]] = defaultdict(set)
    for e in graph.edges:
        items[e.issue_id].add(edge_item(e.src, e.dst, e.label(label_axis) if labeled else None))
    return [Transaction(i, frozenset(items[i])) for i in sorted(items)]


@dataclass(frozen=True)
class MiningParams:
    min_support: float
    min_confidence: float = 0.75
    min_lift: float = 3.0
    labeled: bool = False
    label_axis: str = "level"

    def __post_init__(self):
        if not 0 < self.min_support <= 1:
            raise ValueError("min_support must lie in (0, 1]")
        if not 0 <= self.min_confidence <= 1:
            raise ValueError("min_confidence must lie in [0, 1]")
        if self.min_lift < 0:
            raise ValueError("min_lift must be >= 0")
        _check_axis(self.label_axis)

    @classmethod
    def from_count(cls, min_count: int, n_transactions: int, **kwargs) -> "MiningParams":
        """Support threshold expressed as a transaction count, e.g. 60 / |ET|."""
        return cls(min_support=min_count / n_transactions, **kwargs)


@dataclass
class FrequentItemsets:
    """Itemset -> support, with the raw counts and the denominator kept alongside."""
    supports: dict[frozenset, float]
    counts: dict[frozenset, int]
    n_transactions: int

    def __getitem__(self, itemset) -> float:
        return self.supports[frozenset(itemset)]

    def __contains__(self, itemset) -> bool:
        return frozenset(itemset) in self.supports

    def __len__(self):
        return len(self.supports)

    def __iter__(self):
        return iter(self.supports)

    def items(self):
        return self.supports.items()


def _support_ok(count: int, n: int, min_support: float) -> bool:
    return count / n >= min_support


def apriori_frequent(transactions, min_support: float, denominator: int | None = None,
                     backend: str | None = None) -> FrequentItemsets:
    """Level-wise Apriori.

    Support is (transactions containing the itemset) / denominator, where the
    denominator defaults to the number of transactions given.
    """
    if not 0 < min_support <= 1:
        raise ValueError("min_support must lie in (0, 1]")
    sets = [t.items if isinstance(t, Transaction) else frozenset(t) for t in transactions]
    n = len(sets) if denominator is None else denominator
    if not sets:
        return FrequentItemsets({}, {}, n)
    if n < len(sets):
        raise ValueError("denominator smaller than the number of transactions")

    universe = sorted(set().union(*sets))
    col = {item: j for j, item in enumerate(universe)}
    tx = np.zeros((len(sets), len(universe)), dtype=np.uint8)
    for r, s in enumerate(sets):
        tx[r, [col[i] for i in s]] = 1

    counts: dict[tuple[int, ...], int] = {}
    singles = tx.sum(axis=0)
    level = [(j,) for j in range(len(universe)) if _support_ok(int(singles[j]), n, min_support)]
    for c in level:
        counts[c] = int(singles[c[0]])

    k = 2
    while level:
        prev = set(level)
        cands = []
        # join (k-1)-sets sharing their first k-2 items, then prune by downward closure
        for i in range(len(level)):
            a = level[i]
            for j in range(i + 1, len(level)):
                b = level[j]
                if a[:-1] != b[:-1]:
                    break
                cand = a + (b[-1],)
                if all(cand[:p] + cand[p + 1:] in prev for p in range(k)):
                    cands.append(cand)
        if not cands:
            break
        got = _kernels.count_supports(tx, np.array(cands, dtype=np.int64), backend=backend)
        level = []
        for cand, cnt in zip(cands, got):
            if _support_ok(int(cnt), n, min_support):
                counts[cand] = int(cnt)
                level.append(cand)
        k += 1

    named_counts = {frozenset(universe[j] for j in c): cnt for c, cnt in counts.items()}
    supports = {s: cnt / n for s, cnt in named_counts.items()}
    return FrequentItemsets(supports, named_counts, n)


def _fmt_set(items) -> str:
    return "{" + ", ".join(f"'{i}'" for i in sorted(items)) + "}"


@dataclass(frozen=True)
class AssociationRule:
    antecedent: frozenset
    consequent: frozenset
    support: float
    confidence: float
    lift: float

    @property
    def pattern(self) -> frozenset:
        return self.antecedent | self.consequent

    def text(self) -> str:
        return f"{_fmt_set(self.antecedent)} => {_fmt_set(self.consequent)}"

    def mirror_key(self) -> tuple:
        return (self.consequent, self.antecedent)

    def as_row(self) -> list:
        return [_fmt_set(self.pattern), _fmt_set(self.antecedent), _fmt_set(self.consequent),
                f"{self.support:.5f}", f"{self.confidence:.4f}", f"{self.lift:.2f}"]


RULE_COLUMNS = ["pattern", "antecedent", "consequent", "support", "confidence", "lift"]


def generate_rules(frequent: FrequentItemsets, params: MiningParams) -> list[AssociationRule]:
    """Score every split of every frequent itemset of size >= 2.

    Sorted by lift, then support (both descending), then rule text.
    """
    rules = []
    for itemset, sup in frequent.items():
        if len(itemset) < 2 or sup < params.min_support:
            continue
        members = sorted(itemset)
        for r in range(1, len(members)):
            for ante in combinations(members, r):
                a = frozenset(ante)
                b = itemset - a
                conf = sup / frequent.supports[a]
                lift = conf / frequent.supports[b]
                if conf >= params.min_confidence and lift >= params.min_lift:
                    rules.append(AssociationRule(a, b, sup, conf, lift))
    rules.sort(key=lambda r: (-r.lift, -r.support, r.text()))
    return rules


def mine_rules(transactions, params: MiningParams, denominator: int | None = None,
               backend: str | None = None) -> tuple[FrequentItemsets, list[AssociationRule]]:
    frequent = apriori_frequent(transactions, params.min_support, denominator, backend)
    return frequent, generate_rules(frequent, params)


@dataclass
class ConsistencyReport:
    checked: int = 0
    violations: list[tuple[AssociationRule, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_rule_consistency(rules, frequent: FrequentItemsets, tol: float = 1e-9) -> ConsistencyReport:
    """Recompute confidence and lift from stored supports; compare mirror rules."""
    report = ConsistencyReport()
    index = {(r.antecedent, r.consequent): r for r in rules}
    for rule in rules:
        report.checked += 1
        bad = report.violations.append
        if rule.antecedent & rule.consequent:
            bad((rule, "antecedent and consequent overlap"))
        sup = frequent.supports.get(rule.pattern)
        sa = frequent.supports.get(rule.antecedent)
        sb = frequent.supports.get(rule.consequent)
        if sup is None or sa is None or sb is None:
            bad((rule, "itemset missing from the frequent map"))
            continue
        if not math.isclose(rule.support, sup, rel_tol=0, abs_tol=tol):
            bad((rule, f"support {rule.support} != stored {sup}"))
        if not math.isclose(rule.confidence, sup / sa, rel_tol=tol, abs_tol=tol):
            bad((rule, f"confidence {rule.confidence} != {sup / sa}"))
        if not math.isclose(rule.lift, rule.confidence / sb, rel_tol=tol, abs_tol=tol):
            bad((rule, f"lift {rule.lift} != {rule.confidence / sb}"))
        if not (0 < rule.support <= rule.confidence + tol and rule.confidence <= 1 + tol):
            bad((rule, "support <= confidence <= 1 violated"))
        if rule.lift <= 0:
            bad((rule, "non-positive lift"))
        mirror = index.get(rule.mirror_key())
        if mirror is not None:
            if mirror.support != rule.support:
                bad((rule, "mirror rule support differs"))
            if not math.isclose(mirror.lift, rule.lift, rel_tol=tol, abs_tol=tol):
                bad((rule, "mirror rule lift differs"))
    return report


def rules_csv(rules) -> str:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["no"] + RULE_COLUMNS)
    for i, rule in enumerate(rules, start=1):
        writer.writerow([i] + rule.as_row())
    return buf.getvalue()


def rules_json(rules) -> str:
    rows = [{
        "pattern": sorted(r.pattern),
        "antecedent": sorted(r.antecedent),
        "consequent": sorted(r.consequent),
        "support": round(r.support, 5),
        "confidence": round(r.confidence, 4),
        "lift": round(r.lift, 2),
    } for r in rules]
    return json.dumps(rows, indent=2) + "\n"
