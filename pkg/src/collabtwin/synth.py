"""Seeded synthetic issue/forward/user logs with planted structure and a truth sidecar.

Planted structures:

* hubs: users whose total degree is at least ``hub_factor`` times the mean
  degree of background users;
* pairs: ``(x, y, f)`` realised as f/2 issues each holding x->y and y->x,
  with levels cycled so no single level gathers many of them;
* patterns: ``(x, y, level, k)`` realised as k issues of that level holding
  x->y and y->x.

Background issues are random walks among the remaining users with every
unordered pair capped at ``background_pair_cap`` forwards.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ingest import LabelMap


class InfeasibleSpecError(ValueError):
    pass


WORDS = ("rebar", "spacing", "formwork", "guardrail", "missing", "crack", "slab", "column",
         "scaffold", "helmet", "welding", "inspection", "concrete", "curing", "drainage",
         "excavation", "support", "leak", "anchor", "edge", "protection", "pile", "cap", "beam")


@dataclass
class SyntheticSpec:
    seed: int = 0
    n_users: int = 50
    n_issues: int = 1000
    hub_ids: tuple[int, ...] = (1,)
    hub_factor: float = 3.0
    pairs: tuple[tuple[int, int, int], ...] = ((7, 9, 150),)
    patterns: tuple[tuple[int, int, str, int], ...] = ((12, 15, "H", 120),)
    level_weights: dict[str, float] = field(default_factory=lambda: {"L": 0.3, "M": 0.4, "H": 0.3})
    type_weights: dict[str, float] = field(default_factory=lambda: {"Quality": 0.4, "Safety": 0.6})
    role_weights: dict[str, float] = field(default_factory=lambda: {
        "Owner": 0.1, "Safety Engineer": 0.5, "BIM Coordinator": 0.05,
        "Project Manager": 0.15, "Project Supervisor": 0.2})
    forwards_per_issue: tuple[int, int] = (3, 5)
    background_pair_cap: int = 20
    n_idle_users: int = 0
    start_ts: int = 1553078874

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        data = dict(data)
        for key in ("hub_ids", "forwards_per_issue"):
            if key in data:
                data[key] = tuple(data[key])
        for key in ("pairs", "patterns"):
            if key in data:
                data[key] = tuple(tuple(p) for p in data[key])
        return cls(**data)

    def label_map(self) -> LabelMap:
        return LabelMap(
            level_names={i + 1: v for i, v in enumerate(self.level_weights)},
            type_names={i + 1: v for i, v in enumerate(self.type_weights)},
            role_names={i + 1: v for i, v in enumerate(self.role_weights)},
        )

    def validate(self) -> None:
        users = set(range(1, self.n_users + 1))
        special = list(self.hub_ids)
        for x, y, f in self.pairs:
            if f <= 0 or f % 2:
                raise InfeasibleSpecError(f"pair ({x},{y}) frequency {f} must be positive and even")
            special += [x, y]
        for x, y, level, k in self.patterns:
            if level not in self.level_weights:
                raise InfeasibleSpecError(f"pattern level {level!r} not among levels")
            if k <= 0:
                raise InfeasibleSpecError("pattern issue count must be positive")
            special += [x, y]
        if len(special) != len(set(special)):
            raise InfeasibleSpecError("hub, pair and pattern users must all differ")
        if not set(special) <= users:
            raise InfeasibleSpecError("planted user ids must lie in 1..n_users")
        planted_issues = sum(f // 2 for *_, f in self.pairs) + sum(p[3] for p in self.patterns)
        background = self.n_issues - planted_issues
        if background < 1:
            raise InfeasibleSpecError(
                f"{planted_issues} planted issues leave no room in {self.n_issues} issues")
        lo, hi = self.forwards_per_issue
        if not 1 <= lo <= hi:
            raise InfeasibleSpecError("forwards_per_issue must satisfy 1 <= lo <= hi")
        n_bg = self.n_users - len(special)
        if n_bg < 3:
            raise InfeasibleSpecError("need at least 3 background users")
        capacity = self.background_pair_cap * n_bg * (n_bg - 1) // 2
        if background * hi > capacity:
            raise InfeasibleSpecError("background pair cap too small for the requested volume")
        if self.hub_ids and self.hub_factor >= n_bg:
            raise InfeasibleSpecError("hub_factor must be below the background user count")


@dataclass
class SyntheticLog:
    issues: list[dict]
    forwards: list[dict]
    users: list[dict]
    labels: LabelMap
    truth: dict


def _choice(rng, weights: dict[str, float]) -> str:
    keys = list(weights)
    p = np.array([weights[k] for k in keys], dtype=float)
    return keys[int(rng.choice(len(keys), p=p / p.sum()))]


def generate(spec: SyntheticSpec) -> SyntheticLog:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    labels = spec.label_map()
    level_id = {v: k for k, v in labels.level_names.items()}
    type_id = {v: k for k, v in labels.type_names.items()}
    levels = list(spec.level_weights)

    special = set(spec.hub_ids)
    for x, y, _ in spec.pairs:
        special |= {x, y}
    for x, y, _, _ in spec.patterns:
        special |= {x, y}
    bg_users = [u for u in range(1, spec.n_users + 1) if u not in special]

    # issue plan: (kind, payload) in a shuffled order
    plan = []
    for p_idx, (x, y, f) in enumerate(spec.pairs):
        for j in range(f // 2):
            plan.append(("pair", (x, y, levels[j % len(levels)])))
    for x, y, level, k in spec.patterns:
        plan += [("pattern", (x, y, level))] * k
    n_bg = spec.n_issues - len(plan)
    plan += [("background", None)] * n_bg
    order = rng.permutation(len(plan))
    plan = [plan[i] for i in order]

    pair_load: dict[tuple[int, int], int] = {}

    def bump(a, b):
        key = (a, b) if a < b else (b, a)
        pair_load[key] = pair_load.get(key, 0) + 1

    def walk(length):
        cur = int(rng.choice(bg_users))
        chain = [cur]
        for _ in range(length):
            for _attempt in range(200):
                nxt = int(rng.choice(bg_users))
                key = (cur, nxt) if cur < nxt else (nxt, cur)
                if nxt != cur and pair_load.get(key, 0) < spec.background_pair_cap:
                    break
            else:
                raise InfeasibleSpecError("could not place background forward under the pair cap")
            bump(cur, nxt)
            chain.append(nxt)
            cur = nxt
        return chain

    chains: list[list[int]] = []
    issue_levels: list[str] = []
    bg_index = []
    lo, hi = spec.forwards_per_issue
    for kind, payload in plan:
        if kind == "background":
            chain = walk(int(rng.integers(lo, hi + 1)))
            bg_index.append(len(chains))
            issue_levels.append(_choice(rng, spec.level_weights))
        else:
            x, y, level = payload
            chain = [x, y, x]
            issue_levels.append(level)
        chains.append(chain)

    # background degree before hub hops
    bg_degree = {u: 0 for u in bg_users}
    for i in bg_index:
        chain = chains[i]
        for a, b in zip(chain, chain[1:]):
            bg_degree[a] += 1
            bg_degree[b] += 1
    mean_bg = sum(bg_degree.values()) / len(bg_users)

    # hub hops: last -> hub, hub -> partner, appended to background issues.
    # every hop edge also lands on a background user, so solve
    #   H >= factor * (mean_bg + H / n_bg)  for the hub degree H.
    extra: dict[int, list[tuple[int, int]]] = {}
    hub_degree = {}
    nb = len(bg_users)
    partners = list(rng.permutation(bg_users))
    p_next = 0
    slot = 0
    for hub in spec.hub_ids:
        target = math.ceil(spec.hub_factor * mean_bg * nb / (nb - spec.hub_factor))
        target += target % 2
        hops = target // 2
        for _ in range(hops):
            issue = bg_index[slot % len(bg_index)]
            slot += 1
            tail = (extra[issue][-1][1] if extra.get(issue) else chains[issue][-1])
            partner = int(partners[p_next % nb])
            p_next += 1
            if partner == tail:
                partner = int(partners[p_next % nb])
                p_next += 1
            extra.setdefault(issue, []).extend([(tail, hub), (hub, partner)])
        hub_degree[hub] = 2 * hops

    issues, forwards = [], []
    ts = spec.start_ts
    fid = 1
    for i, chain in enumerate(chains):
        issue_id = i + 1
        ts += int(rng.integers(30, 600))
        words = rng.choice(WORDS, size=int(rng.integers(5, 12)))
        issues.append({
            "ID": issue_id, "ProjectID": 442, "Description": " ".join(words),
            "TypeID": type_id[_choice(rng, spec.type_weights)],
            "LevelID": level_id[issue_levels[i]], "StatusID": 5,
            "CreatedAt": ts, "CreatedBy": chain[0],
        })
        hops = list(zip(chain, chain[1:])) + extra.get(i, [])
        for a, b in hops:
            ts += int(rng.integers(1, 120))
            forwards.append({
                "ID": fid, "IssueID": issue_id, "ProjectID": 442, "StatusID": 2,
                "ApproveStatus": 1, "FromUserID": a, "CreatedAt": ts, "ToUserIDs": json.dumps([str(b)]),
            })
            fid += 1

    role_names = list(spec.role_weights)
    users = []
    for u in range(1, spec.n_users + spec.n_idle_users + 1):
        role = _choice(rng, spec.role_weights)
        users.append({"ID": u, "RoleID": role_names.index(role) + 1,
                      "Organization": f"Org{int(rng.integers(1, 6))}"})

    degree = {u: 0 for u in range(1, spec.n_users + 1)}
    for fwd in forwards:
        degree[fwd["FromUserID"]] += 1
        degree[int(json.loads(fwd["ToUserIDs"])[0])] += 1
    final_bg_mean = sum(degree[u] for u in bg_users) / nb
    others = [d for u, d in degree.items() if u not in spec.hub_ids]
    for hub in spec.hub_ids:
        if degree[hub] < spec.hub_factor * final_bg_mean or degree[hub] <= max(others):
            raise InfeasibleSpecError(f"hub {hub} cannot dominate: degree {degree[hub]}")

    bg_pair_max = max(pair_load.values(), default=0)
    hub_pairs = {}
    for issue, hop_list in extra.items():
        for a, b in hop_list:
            key = (a, b) if a < b else (b, a)
            hub_pairs[key] = hub_pairs.get(key, 0) + 1
    truth = {
        "spec": asdict(spec),
        "n_issues": spec.n_issues,
        "hubs": [{"user": h, "degree": degree[h], "background_mean_degree": final_bg_mean,
                  "ratio": degree[h] / final_bg_mean} for h in spec.hub_ids],
        "pairs": [{"x": x, "y": y, "isf": f, "per_direction": f // 2} for x, y, f in spec.pairs],
        "patterns": [{"x": x, "y": y, "level": level, "issues": k,
                      "isf": 2 * k, "rules": [[f"{x}->{y}:{level}", f"{y}->{x}:{level}"],
                                              [f"{y}->{x}:{level}", f"{x}->{y}:{level}"]]}
                     for x, y, level, k in spec.patterns],
        "background_pair_max": max(bg_pair_max, max(hub_pairs.values(), default=0)),
        "expected_frequent_pairs": sorted(
            [sorted((x, y)) for x, y, _ in spec.pairs] + [sorted((x, y)) for x, y, *_ in spec.patterns]),
    }
    return SyntheticLog(issues, forwards, users, labels, truth)


def _write_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def generate_synthetic(spec: SyntheticSpec, out_dir) -> dict[str, Path]:
    """Write issues.csv, forwards.csv, users.csv, labels.ini and truth.json."""
    log = generate(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "issues": out / "issues.csv",
        "forwards": out / "forwards.csv",
        "users": out / "users.csv",
        "labels": out / "labels.ini",
        "truth": out / "truth.json",
    }
    _write_csv(paths["issues"], log.issues)
    _write_csv(paths["forwards"], log.forwards)
    _write_csv(paths["users"], log.users)
    paths["labels"].write_text(log.labels.to_text(), encoding="utf-8")
    paths["truth"].write_text(json.dumps(log.truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
