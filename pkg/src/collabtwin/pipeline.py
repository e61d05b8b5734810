"""End-to-end pipeline: ingest -> build -> metrics -> fcu -> rules, with a digest manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .community import detect_communities
from .fcu import frequent_pairs, frequent_pairs_labeled
from .ingest import CleaningConfig, LabelMap, load_dataset
from .metrics import centrality_report, network_stats
from .netbuild import CollabGraph, build_network, collapse, edge_list_csv, to_gml
from .rulemine import MiningParams, build_transactions, mine_rules, rules_csv, rules_json


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException | str):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage}: {cause}")


@dataclass
class PipelineConfig:
    issues: str | None = None
    forwards: str | None = None
    users: str | None = None
    labels: str | None = None
    out: str = "out"
    min_desc_tokens: int = 5
    drop_self_loops: bool = False
    missing_users: str = "placeholder"
    closeness_mode: str = "normalized"
    community_seed: int = 0
    resolution: float = 1.0
    min_isf: int = 100
    min_lisf: int = 60
    directed: bool = False
    label_axis: str = "level"
    min_support: float | None = None
    min_support_count: int | None = None
    labeled_min_support: float | None = None
    labeled_min_support_count: int | None = None
    min_confidence: float = 0.75
    min_lift: float = 3.0
    labeled: bool = False
    denominator: str = "transactions"
    format: str | None = None  # None: the command's own default (gml for export, csv elsewhere)
    top_k: int = 16

    def validate(self) -> None:
        if self.min_desc_tokens < 0:
            raise ValueError("min-desc-tokens must be >= 0")
        if self.closeness_mode not in ("raw", "normalized"):
            raise ValueError("closeness-mode must be raw or normalized")
        if self.min_isf < 1 or self.min_lisf < 1:
            raise ValueError("ISF/LISF thresholds must be >= 1")
        if self.label_axis not in ("level", "type"):
            raise ValueError("label-axis must be level or type")
        if self.denominator not in ("issues", "transactions"):
            raise ValueError("denominator must be issues or transactions")
        if self.missing_users not in ("placeholder", "error"):
            raise ValueError("missing-users must be placeholder or error")
        if self.format not in (None, "csv", "json", "gml"):
            raise ValueError("format must be csv, json or gml")
        if not 0 <= self.min_confidence <= 1 or self.min_lift < 0:
            raise ValueError("min-confidence must be in [0,1] and min-lift >= 0")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    def input_paths(self) -> dict[str, str]:
        return {k: getattr(self, k) for k in ("issues", "forwards", "users", "labels") if getattr(self, k)}

    def check_inputs(self) -> None:
        for key in ("issues", "forwards"):
            if not getattr(self, key):
                raise FileNotFoundError(f"--{key} is required")
        for key, path in self.input_paths().items():
            if not Path(path).is_file():
                raise FileNotFoundError(f"{key} file not found: {path}")

    def digest(self) -> str:
        """Hash of analysis settings plus input file contents (not their paths or --out)."""
        payload = {k: v for k, v in asdict(self).items()
                   if k not in ("issues", "forwards", "users", "labels", "out")}
        for key, path in sorted(self.input_paths().items()):
            payload["input:" + key] = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def field_types(cls) -> dict[str, str]:
        return {f.name: f.type for f in fields(cls)}


def data_digest(data: bytes) -> str:
    """sha256 over the data lines only; '#' header comments are excluded."""
    h = hashlib.sha256()
    for line in data.splitlines(keepends=True):
        if not line.startswith(b"#"):
            h.update(line)
    return h.hexdigest()


@dataclass
class Artifacts:
    out: Path
    header: str
    written: dict[str, bytes] = field(default_factory=dict)

    def write(self, name: str, text: str | bytes, comment: bool = True) -> Path:
        data = text if isinstance(text, bytes) else text.encode("utf-8")
        if comment:
            data = self.header.encode("utf-8") + data
        path = self.out / name
        path.write_bytes(data)
        self.written[name] = data
        return path

    def manifest(self, config_digest: str) -> Path:
        entries = {name: {"sha256": data_digest(data), "bytes": len(data)}
                   for name, data in sorted(self.written.items())}
        doc = {"tool": "collabtwin", "version": __version__, "config_digest": config_digest,
               "artifacts": entries}
        path = self.out / "manifest.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return repr(float(x))


def stats_text(stats) -> str:
    return "".join(f"{k}={'' if v is None else v}\n" for k, v in stats.as_dict().items())


def centrality_csv(report) -> str:
    header = ["node_id", "role", "in_degree", "out_degree", "total_degree",
              "closeness_raw", "closeness_norm", "betweenness", "community"]
    rows = [[r.node_id, r.role, r.in_degree, r.out_degree, r.total_degree, _fmt(r.closeness_raw),
             _fmt(r.closeness_norm), _fmt(r.betweenness), "" if r.community is None else r.community]
            for r in report.rows]
    return _csv(header, rows)


def key_players_csv(report, k: int, closeness_mode: str) -> str:
    ckey = "closeness_norm" if closeness_mode == "normalized" else "closeness_raw"
    cols = [report.top("total_degree", k), report.top(ckey, k), report.top("betweenness", k)]
    rows = []
    for i in range(max((len(c) for c in cols), default=0)):
        row = [i + 1]
        for col, key in zip(cols, ("total_degree", ckey, "betweenness")):
            if i < len(col):
                r = col[i]
                value = getattr(r, key)
                row += [r.node_id, r.role, value if isinstance(value, int) else f"{value:.4f}"]
            else:
                row += ["", "", ""]
        rows.append(row)
    return _csv(["rank", "degree_node", "degree_role", "degree",
                 "closeness_node", "closeness_role", "closeness",
                 "betweenness_node", "betweenness_role", "betweenness"], rows)


class Pipeline:
    """Stage-by-stage runner; each stage wraps failures in :class:`StageError`."""

    def __init__(self, config: PipelineConfig):
        config.validate()
        self.config = config
        self.ingest_report: dict | None = None
        self.dataset = None
        self.graph: CollabGraph | None = None

    def ingest(self):
        cfg = self.config
        cfg.check_inputs()
        try:
            labels = LabelMap.load(cfg.labels) if cfg.labels else LabelMap.default()
            cleaning = CleaningConfig(cfg.min_desc_tokens, cfg.drop_self_loops)
            self.dataset, self.ingest_report = load_dataset(
                cfg.issues, cfg.forwards, cfg.users, labels, cleaning, cfg.missing_users)
        except Exception as exc:
            raise StageError("ingest", exc) from exc
        return self.dataset

    def build(self) -> CollabGraph:
        if self.dataset is None:
            self.ingest()
        try:
            self.graph = build_network(self.dataset)
        except Exception as exc:
            raise StageError("build", exc) from exc
        return self.graph

    def _graph(self) -> CollabGraph:
        return self.graph if self.graph is not None else self.build()

    def communities(self):
        cfg = self.config
        try:
            return detect_communities(collapse(self._graph(), directed=False),
                                      cfg.resolution, cfg.community_seed)
        except StageError:
            raise
        except Exception as exc:
            raise StageError("communities", exc) from exc

    def stats(self):
        cfg = self.config
        g = self._graph()
        try:
            return network_stats(g, seed=cfg.community_seed, resolution=cfg.resolution)
        except Exception as exc:
            raise StageError("stats", exc) from exc

    def centrality(self, partition=None):
        g = self._graph()
        try:
            return centrality_report(g, partition)
        except Exception as exc:
            raise StageError("centrality", exc) from exc

    def fcu(self):
        cfg = self.config
        g = self._graph()
        direction = "directed" if cfg.directed else "undirected"
        try:
            report, sub = frequent_pairs(g, cfg.min_isf, direction)
            labeled = frequent_pairs_labeled(g, cfg.label_axis, cfg.min_lisf, direction)
        except Exception as exc:
            raise StageError("fcu", exc) from exc
        return report, sub, labeled

    def mining_params(self, labeled: bool, n_denominator: int) -> MiningParams:
        cfg = self.config
        if labeled:
            support, count, default_count = cfg.labeled_min_support, cfg.labeled_min_support_count, 60
        else:
            support, count, default_count = cfg.min_support, cfg.min_support_count, 100
        if support is None:
            support = (count if count is not None else default_count) / max(n_denominator, 1)
        return MiningParams(min(support, 1.0), cfg.min_confidence, cfg.min_lift, labeled, cfg.label_axis)

    def rules(self, labeled: bool):
        cfg = self.config
        g = self._graph()
        try:
            tx = build_transactions(g, labeled, cfg.label_axis)
            denom = len(self.dataset.issues) if cfg.denominator == "issues" else len(tx)
            params = self.mining_params(labeled, denom)
            frequent, rules = mine_rules(tx, params, denominator=denom)
        except Exception as exc:
            raise StageError("rules", exc) from exc
        return params, frequent, rules

    def run(self, out_dir: str | Path | None = None) -> Path:
        cfg = self.config
        out = Path(out_dir or cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        digest = cfg.digest()
        art = Artifacts(out, f"# collabtwin {__version__} config={digest[:16]}\n")

        self.build()
        art.write("ingest_report.json", json.dumps(self.ingest_report, indent=2, sort_keys=True) + "\n",
                  comment=False)
        g = self.graph
        art.write("graph.gml", to_gml(g), comment=False)
        art.write("edges.csv", edge_list_csv(g))

        stats = self.stats()
        art.write("stats.txt", stats_text(stats))
        art.write("stats.json", json.dumps(stats.as_dict(), indent=2, sort_keys=True) + "\n", comment=False)

        partition = self.communities()
        art.write("communities.csv", _csv(["node_id", "community"], sorted(partition.assignment.items())))
        report = self.centrality(partition)
        art.write("centrality.csv", centrality_csv(report))
        art.write("key_players.csv", key_players_csv(report, cfg.top_k, cfg.closeness_mode))

        isf_report, sub, lisf_report = self.fcu()
        art.write("fcu_isf.csv", isf_report.to_csv())
        art.write("fcu_isf.gml", to_gml(sub), comment=False)
        art.write("fcu_lisf.csv", lisf_report.to_csv())

        for labeled, stem in ((False, "rules"), (True, "rules_labeled")):
            params, frequent, rules = self.rules(labeled)
            art.write(f"{stem}.csv", rules_csv(rules))
            art.write(f"{stem}.json", rules_json(rules), comment=False)

        art.manifest(digest)
        return out


def run_pipeline(config: PipelineConfig, out_dir=None) -> Path:
    return Pipeline(config).run(out_dir)
