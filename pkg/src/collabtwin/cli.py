"""Command-line front end.

Settings are resolved flags > config file (--config or $COLLABTWIN_CONFIG) >
built-in defaults.  The config file is key=value lines under any section
headers; keys are the long flag names with dashes or underscores.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .pipeline import (Artifacts, Pipeline, PipelineConfig, StageError, _csv, centrality_csv,
                       key_players_csv, stats_text)
from .netbuild import edge_list_csv, to_gml
from .rulemine import rules_csv, rules_json
from .synth import InfeasibleSpecError, SyntheticSpec, generate_synthetic

log = logging.getLogger("collabtwin")

SUBCOMMANDS = ("ingest", "build", "stats", "centrality", "communities", "fcu", "rules",
               "export", "synth", "run")


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="key=value config file")
    p.add_argument("--issues", default=S, metavar="PATH")
    p.add_argument("--forwards", default=S, metavar="PATH")
    p.add_argument("--users", default=S, metavar="PATH")
    p.add_argument("--labels", default=S, metavar="PATH")
    p.add_argument("--out", default=S, metavar="DIR")
    p.add_argument("--min-desc-tokens", type=int, default=S, metavar="N")
    p.add_argument("--drop-self-loops", action="store_true", default=S)
    p.add_argument("--missing-users", choices=("placeholder", "error"), default=S)
    p.add_argument("--closeness-mode", choices=("raw", "normalized"), default=S)
    p.add_argument("--community-seed", type=int, default=S, metavar="N")
    p.add_argument("--resolution", type=float, default=S, metavar="R")
    p.add_argument("--min-isf", type=int, default=S, metavar="N")
    p.add_argument("--min-lisf", type=int, default=S, metavar="N")
    p.add_argument("--directed", action="store_true", default=S,
                   help="count ISF per direction instead of per unordered pair")
    p.add_argument("--label-axis", choices=("level", "type"), default=S)
    p.add_argument("--min-support", type=float, default=S, metavar="F")
    p.add_argument("--min-support-count", type=int, default=S, metavar="N",
                   help="support threshold as a transaction count (N / denominator)")
    p.add_argument("--labeled-min-support", type=float, default=S, metavar="F")
    p.add_argument("--labeled-min-support-count", type=int, default=S, metavar="N")
    p.add_argument("--min-confidence", type=float, default=S, metavar="F")
    p.add_argument("--min-lift", type=float, default=S, metavar="F")
    p.add_argument("--labeled", action="store_true", default=S)
    p.add_argument("--denominator", choices=("issues", "transactions"), default=S)
    p.add_argument("--format", choices=("csv", "json", "gml"), default=S)
    p.add_argument("--top-k", type=int, default=S, metavar="N")
    p.add_argument("--seed", type=int, default=S, metavar="N", help="synthetic generator seed")
    p.add_argument("--synth-spec", default=S, metavar="PATH", help="JSON overrides for synth")
    p.add_argument("-v", "--verbose", action="store_true", default=S)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collabtwin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"collabtwin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    helps = {
        "ingest": "parse, clean, associate and enrich the exports",
        "build": "build the multigraph and write GML + edge list",
        "stats": "network-level statistics",
        "centrality": "degree / closeness / betweenness per node",
        "communities": "Louvain community assignment",
        "fcu": "frequently collaborating users (ISF and LISF)",
        "rules": "Apriori association rules between information flows",
        "export": "export the graph as gml, csv edge list or json",
        "synth": "generate a seeded synthetic log with planted patterns",
        "run": "full pipeline",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _read_config_file(path: str) -> dict[str, str]:
    if not Path(path).is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    text = Path(path).read_text(encoding="utf-8")
    if not text.lstrip().startswith("["):
        text = "[collabtwin]\n" + text
    parser.read_string(text)
    values = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            values[key.replace("-", "_")] = value
    return values


def _coerce(value: str, kind: str):
    kind = str(kind)
    if "bool" in kind:
        return value.strip().lower() in ("1", "true", "yes", "on")
    if "int" in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    return value


def resolve_config(args: argparse.Namespace) -> tuple[PipelineConfig, dict]:
    """Merge defaults, config file and flags (flags win)."""
    explicit = {k: v for k, v in vars(args).items() if k != "command"}
    cfg_path = explicit.pop("config", None) or os.environ.get("COLLABTWIN_CONFIG")
    file_values = _read_config_file(cfg_path) if cfg_path else {}
    types = PipelineConfig.field_types()
    kwargs = {}
    extras = {}
    for key, raw in file_values.items():
        if key in types:
            kwargs[key] = _coerce(raw, types[key])
        else:
            extras[key] = raw
    for key, value in explicit.items():
        if key in types:
            kwargs[key] = value
        else:
            extras[key] = value
    unknown = set(extras) - {"seed", "synth_spec", "verbose"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    config = PipelineConfig(**kwargs)
    config.validate()
    return config, extras


def _synth(config: PipelineConfig, extras: dict) -> int:
    overrides = {}
    if extras.get("synth_spec"):
        path = Path(extras["synth_spec"])
        if not path.is_file():
            raise FileNotFoundError(f"synth spec not found: {path}")
        overrides = json.loads(path.read_text(encoding="utf-8"))
    if extras.get("seed") is not None:
        overrides["seed"] = int(extras["seed"])
    spec = SyntheticSpec.from_dict(overrides)
    paths = generate_synthetic(spec, config.out)
    for name, path in paths.items():
        print(f"{name}\t{path}")
    return 0


def _dispatch(command: str, config: PipelineConfig, extras: dict) -> int:
    if command == "synth":
        return _synth(config, extras)
    pipe = Pipeline(config)
    if command == "run":
        out = pipe.run()
        print(f"artifacts written to {out}")
        return 0

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = config.digest()
    art = Artifacts(out, f"# collabtwin {__version__} config={digest[:16]}\n")
    fmt = config.format

    if command == "ingest":
        pipe.ingest()
        text = json.dumps(pipe.ingest_report, indent=2, sort_keys=True) + "\n"
        art.write("ingest_report.json", text, comment=False)
        print(text, end="")
    elif command == "build":
        g = pipe.build()
        art.write("graph.gml", to_gml(g), comment=False)
        art.write("edges.csv", edge_list_csv(g))
        print(f"nodes={g.n} edges={g.m}")
    elif command == "export":
        g = pipe.build()
        if fmt in (None, "gml"):
            art.write("graph.gml", to_gml(g), comment=False)
        elif fmt == "csv":
            art.write("edges.csv", edge_list_csv(g))
        else:
            doc = {"nodes": [{"id": u, "role": g.nodes[u].role, "org": g.nodes[u].organization}
                             for u in g.node_ids()],
                   "edges": [{"id": e.edge_id, "source": e.src, "target": e.dst, "issueid": e.issue_id,
                              "level": e.level, "type": e.type, "ts": e.timestamp} for e in g.edges]}
            art.write("graph.json", json.dumps(doc, indent=2) + "\n", comment=False)
    elif command == "stats":
        stats = pipe.stats()
        if fmt == "json":
            art.write("stats.json", json.dumps(stats.as_dict(), indent=2, sort_keys=True) + "\n",
                      comment=False)
        else:
            art.write("stats.txt", stats_text(stats))
        print(stats_text(stats), end="")
    elif command == "centrality":
        report = pipe.centrality(pipe.communities())
        if fmt == "json":
            rows = [asdict(r) for r in report.rows]
            art.write("centrality.json", json.dumps(rows, indent=2) + "\n", comment=False)
        else:
            art.write("centrality.csv", centrality_csv(report))
        art.write("key_players.csv", key_players_csv(report, config.top_k, config.closeness_mode))
    elif command == "communities":
        part = pipe.communities()
        art.write("communities.csv", _csv(["node_id", "community"], sorted(part.assignment.items())))
        print(f"communities={part.community_count} modularity={part.modularity_score:.6f}")
    elif command == "fcu":
        isf_report, sub, lisf_report = pipe.fcu()
        art.write("fcu_isf.csv", isf_report.to_csv())
        art.write("fcu_isf.gml", to_gml(sub), comment=False)
        art.write("fcu_lisf.csv", lisf_report.to_csv())
        print(isf_report.to_csv(), end="")
    elif command == "rules":
        labeled = config.labeled
        params, frequent, rules = pipe.rules(labeled)
        stem = "rules_labeled" if labeled else "rules"
        if fmt == "json":
            art.write(f"{stem}.json", rules_json(rules), comment=False)
        else:
            art.write(f"{stem}.csv", rules_csv(rules))
        print(rules_csv(rules), end="")
    art.manifest(digest)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config, extras = resolve_config(args)
        return _dispatch(command, config, extras)
    except FileNotFoundError as exc:
        print(f"collabtwin: error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"collabtwin: error: stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return 1
    except (ValueError, InfeasibleSpecError, configparser.Error) as exc:
        print(f"collabtwin: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
