"""Parsing, cleaning, association and enrichment of issue/forward/user exports.

Three record kinds arrive as CSV (header row required) or newline-delimited
JSON.  Column names are matched case-insensitively with underscores ignored,
so ``CreatedAt``, ``created_at`` and ``createdat`` are the same column.

Issue columns: ID, ProjectID, Description, TypeID, LevelID, StatusID,
CreatedAt, CreatedBy.  Forward columns: ID, IssueID, FromUserID, ToUserIDs,
CreatedAt, StatusID, ApproveStatus.  User columns: ID, RoleID, Organization.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Iterator

UNKNOWN_ROLE = "Unknown"


class SchemaError(ValueError):
    """Input header or file layout is unusable; nothing can be parsed."""


class LabelError(KeyError):
    """An id found in the data has no entry in the label map."""

    def __init__(self, missing: dict[str, list[int]]):
        self.missing = missing
        parts = [f"{axis}: {ids}" for axis, ids in missing.items() if ids]
        super().__init__("unmapped ids -> " + "; ".join(parts))


class UnresolvedUserError(KeyError):
    pass


@dataclass(frozen=True)
class IssueRecord:
    issue_id: int
    project_id: int | None
    description: str
    type_id: int
    level_id: int
    status_id: int | None
    created_at: int | None
    created_by: int | None


@dataclass(frozen=True)
class ForwardEvent:
    forward_id: str
    issue_id: int
    from_user: int | None
    to_user: int | None
    created_at: int | None
    status_id: int | None = None
    approve_status: int | None = None


@dataclass(frozen=True)
class UserRecord:
    user_id: int
    role_id: int | None
    organization: str = ""
    role: str | None = None  # filled by enrich()


@dataclass(frozen=True)
class RowError:
    row: int
    message: str


@dataclass(frozen=True)
class DropRecord:
    kind: str
    record_id: str
    reason: str


@dataclass
class ParseReport:
    records: list
    errors: list[RowError] = field(default_factory=list)
    drops: list[DropRecord] = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


# --------------------------------------------------------------------------
# label map
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelMap:
    level_names: dict[int, str]
    type_names: dict[int, str]
    role_names: dict[int, str]

    @classmethod
    def default(cls) -> "LabelMap":
        # Numeric meanings are not published; these are placeholders.
        return cls(
            level_names={1: "L", 2: "M", 3: "H"},
            type_names={1: "Quality", 2: "Safety"},
            role_names={
                1: "Owner",
                2: "Safety Engineer",
                3: "BIM Coordinator",
                4: "Project Manager",
                5: "Project Supervisor",
            },
        )

    @classmethod
    def from_text(cls, text: str) -> "LabelMap":
        parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise SchemaError(f"bad label map: {exc}") from exc
        sections = {}
        for name in ("levels", "types", "roles"):
            mapping = {}
            if parser.has_section(name):
                for key, value in parser.items(name):
                    try:
                        mapping[int(key)] = value.strip()
                    except ValueError as exc:
                        raise SchemaError(f"[{name}] key {key!r} is not an integer") from exc
            sections[name] = mapping
        unknown = set(parser.sections()) - {"levels", "types", "roles"}
        if unknown:
            raise SchemaError(f"unknown label map sections: {sorted(unknown)}")
        return cls(sections["levels"], sections["types"], sections["roles"])

    @classmethod
    def load(cls, path: str | Path) -> "LabelMap":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def to_text(self) -> str:
        out = []
        for name, mapping in (("levels", self.level_names), ("types", self.type_names),
                              ("roles", self.role_names)):
            out.append(f"[{name}]")
            out.extend(f"{k}={v}" for k, v in sorted(mapping.items()))
            out.append("")
        return "\n".join(out)

    def axis_values(self, axis: str) -> tuple[str, ...]:
        mapping = {"level": self.level_names, "type": self.type_names}[axis]
        return tuple(mapping[k] for k in sorted(mapping))


def role_abbrev(role: str) -> str:
    """One-letter code for a role label, e.g. 'Safety Engineer' -> 'S'."""
    return role[:1].upper() if role else "?"


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

def _norm(key: str) -> str:
    return key.strip().lower().replace("_", "").replace(" ", "")


ISSUE_COLUMNS = {
    "issue_id": ("id", "issueid"),
    "project_id": ("projectid",),
    "description": ("description",),
    "type_id": ("typeid",),
    "level_id": ("levelid",),
    "status_id": ("statusid",),
    "created_at": ("createdat",),
    "created_by": ("createdby",),
}
ISSUE_REQUIRED = ("issue_id", "description", "type_id", "level_id", "created_at", "created_by")

FORWARD_COLUMNS = {
    "forward_id": ("id", "forwardid"),
    "issue_id": ("issueid",),
    "from_user": ("fromuserid", "fromuser"),
    "to_users": ("touserids", "touser", "touserid"),
    "created_at": ("createdat",),
    "status_id": ("statusid",),
    "approve_status": ("approvestatus",),
}
FORWARD_REQUIRED = ("forward_id", "issue_id", "from_user", "to_users", "created_at")

USER_COLUMNS = {
    "user_id": ("id", "userid"),
    "role_id": ("roleid",),
    "organization": ("organization", "org"),
}
USER_REQUIRED = ("user_id", "role_id")


def _resolve_columns(keys: Iterable[str], columns: dict, required: tuple) -> dict[str, str]:
    lookup = {}
    for key in keys:
        lookup.setdefault(_norm(key), key)
    resolved = {}
    for name, aliases in columns.items():
        for alias in aliases:
            if alias in lookup:
                resolved[name] = lookup[alias]
                break
    missing = [name for name in required if name not in resolved]
    if missing:
        raise SchemaError(f"missing required columns: {', '.join(missing)}")
    return resolved


def _read_text(source) -> str:
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8")
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _detect_format(text: str, source) -> str:
    if isinstance(source, (str, Path)):
        suffix = Path(source).suffix.lower()
        if suffix in (".jsonl", ".ndjson", ".json"):
            return "ndjson"
        if suffix == ".csv":
            return "csv"
    return "ndjson" if text.lstrip().startswith("{") else "csv"


def _iter_rows(source, columns: dict, required: tuple, fmt: str | None):
    """Yield (row_index, mapping-or-error) pairs with canonical field names."""
    text = _read_text(source)
    fmt = fmt or _detect_format(text, source)
    if not text.strip():
        return
    if fmt == "csv":
        reader = csv.DictReader(io.StringIO(text, newline=""))
        if reader.fieldnames is None:
            return
        resolved = _resolve_columns(reader.fieldnames, columns, required)
        for i, raw in enumerate(reader, start=1):
            if None in raw:
                yield i, RowError(i, "too many fields")
                continue
            yield i, {name: raw.get(col) for name, col in resolved.items()}
    elif fmt == "ndjson":
        for i, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield i, RowError(i, f"invalid JSON: {exc.msg}")
                continue
            if not isinstance(obj, dict):
                yield i, RowError(i, "line is not a JSON object")
                continue
            try:
                resolved = _resolve_columns(obj.keys(), columns, required)
            except SchemaError as exc:
                yield i, RowError(i, str(exc))
                continue
            yield i, {name: obj.get(col) for name, col in resolved.items()}
    else:
        raise SchemaError(f"unknown input format {fmt!r}")


def _int(value, name: str, required: bool) -> int | None:
    if value is None or (isinstance(value, str) and not value.strip()):
        if required:
            raise ValueError(f"missing value for {name}")
        return None
    if isinstance(value, bool):
        raise ValueError(f"{name} is not an integer: {value!r}")
    if isinstance(value, int):
        return value
    text = str(value).strip()
    try:
        return int(text)
    except ValueError:
        try:
            as_float = float(text)
        except ValueError:
            raise ValueError(f"{name} is not an integer: {value!r}") from None
        if not as_float.is_integer():
            raise ValueError(f"{name} is not an integer: {value!r}") from None
        return int(as_float)


def parse_issue_records(source, fmt: str | None = None) -> ParseReport:
    report = ParseReport(records=[])
    for i, row in _iter_rows(source, ISSUE_COLUMNS, ISSUE_REQUIRED, fmt):
        if isinstance(row, RowError):
            report.errors.append(row)
            continue
        try:
            rec = IssueRecord(
                issue_id=_int(row["issue_id"], "ID", True),
                project_id=_int(row.get("project_id"), "ProjectID", False),
                description=("" if row["description"] is None else str(row["description"])),
                type_id=_int(row["type_id"], "TypeID", True),
                level_id=_int(row["level_id"], "LevelID", True),
                status_id=_int(row.get("status_id"), "StatusID", False),
                created_at=_int(row["created_at"], "CreatedAt", True),
                created_by=_int(row["created_by"], "CreatedBy", False),
            )
        except ValueError as exc:
            report.errors.append(RowError(i, str(exc)))
            continue
        report.records.append(rec)
    return report


def _receivers(value) -> list:
    if value is None:
        return []
    if isinstance(value, list):
        return value
    text = str(value).strip()
    if not text:
        return []
    if text.startswith("["):
        parsed = json.loads(text)
        if not isinstance(parsed, list):
            raise ValueError("ToUserIDs is not a list")
        return parsed
    return [text]


def parse_forward_events(source, fmt: str | None = None) -> ParseReport:
    """Parse forwards, expanding every ToUserIDs list into one event per receiver."""
    report = ParseReport(records=[])
    for i, row in _iter_rows(source, FORWARD_COLUMNS, FORWARD_REQUIRED, fmt):
        if isinstance(row, RowError):
            report.errors.append(row)
            continue
        try:
            fid = _int(row["forward_id"], "ID", True)
            issue_id = _int(row["issue_id"], "IssueID", True)
            sender = _int(row["from_user"], "FromUserID", False)
            created = _int(row["created_at"], "CreatedAt", True)
            status = _int(row.get("status_id"), "StatusID", False)
            approve = _int(row.get("approve_status"), "ApproveStatus", False)
            try:
                targets = [_int(t, "ToUserIDs", False) for t in _receivers(row["to_users"])]
            except json.JSONDecodeError as exc:
                raise ValueError(f"ToUserIDs is not valid JSON: {exc.msg}") from None
        except ValueError as exc:
            report.errors.append(RowError(i, str(exc)))
            continue
        if not targets:
            report.drops.append(DropRecord("forward", str(fid), "no_receivers"))
            continue
        multi = len(targets) > 1
        for j, target in enumerate(targets):
            report.records.append(ForwardEvent(
                forward_id=f"{fid}.{j}" if multi else str(fid),
                issue_id=issue_id,
                from_user=sender,
                to_user=target,
                created_at=created,
                status_id=status,
                approve_status=approve,
            ))
    return report


def parse_user_records(source, fmt: str | None = None) -> ParseReport:
    report = ParseReport(records=[])
    for i, row in _iter_rows(source, USER_COLUMNS, USER_REQUIRED, fmt):
        if isinstance(row, RowError):
            report.errors.append(row)
            continue
        try:
            rec = UserRecord(
                user_id=_int(row["user_id"], "ID", True),
                role_id=_int(row["role_id"], "RoleID", False),
                organization=str(row.get("organization") or ""),
            )
        except ValueError as exc:
            report.errors.append(RowError(i, str(exc)))
            continue
        report.records.append(rec)
    return report


# --------------------------------------------------------------------------
# cleaning
# --------------------------------------------------------------------------

_CJK = r"぀-ヿ㐀-䶿一-鿿豈-﫿가-힯＀-￯"
_TOKEN_RE = re.compile(rf"[{_CJK}]|[^\s{_CJK}]+")


def count_tokens(text: str | None) -> int:
    """Word count; CJK characters count one each, unspaced text counts per character."""
    if not text:
        return 0
    text = text.strip()
    if not text:
        return 0
    if not any(ch.isspace() for ch in text):
        return len(text)
    return len(_TOKEN_RE.findall(text))


@dataclass(frozen=True)
class CleaningConfig:
    min_description_tokens: int = 5
    drop_self_loops: bool = False

    def __post_init__(self):
        if self.min_description_tokens < 0:
            raise ValueError("min_description_tokens must be >= 0")


@dataclass(frozen=True)
class KindStats:
    input: int
    dropped: int

    @property
    def retained(self) -> int:
        return self.input - self.dropped

    def as_dict(self) -> dict:
        return {"input": self.input, "dropped": self.dropped, "retained": self.retained}


@dataclass
class CleanDataset:
    issues: list[IssueRecord]
    forwards: list[ForwardEvent]
    users: list[UserRecord]
    stats: dict[str, KindStats]
    drops: list[DropRecord] = field(default_factory=list)

    def stats_dict(self) -> dict:
        return {kind: s.as_dict() for kind, s in self.stats.items()}


def _issue_drop_reason(issue: IssueRecord, min_tokens: int) -> str | None:
    if not issue.description or not issue.description.strip():
        return "empty_description"
    if count_tokens(issue.description) < min_tokens:
        return "short_description"
    if issue.created_at is None or issue.created_at <= 0:
        return "missing_created_at"
    return None


def clean(issues: Iterable[IssueRecord], forwards: Iterable[ForwardEvent],
          config: CleaningConfig | None = None, *, users: Iterable[UserRecord] = (),
          parse_drops: Iterable[DropRecord] = ()) -> CleanDataset:
    """Apply the cleaning rules.  Never raises on bad records; drops and counts them.

    ``parse_drops`` carries rows already rejected while parsing (forwards with
    an empty receiver list) so the forward stats account for them.
    """
    config = config or CleaningConfig()
    issues = list(issues)
    forwards = list(forwards)
    parse_drops = [d for d in parse_drops if d.kind == "forward"]
    drops: list[DropRecord] = []

    kept_issues = []
    seen = set()
    for issue in issues:
        reason = _issue_drop_reason(issue, config.min_description_tokens)
        if reason is None and issue.issue_id in seen:
            reason = "duplicate_id"
        if reason:
            drops.append(DropRecord("issue", str(issue.issue_id), reason))
            continue
        seen.add(issue.issue_id)
        kept_issues.append(issue)

    kept_forwards = []
    for fwd in forwards:
        if fwd.from_user is None:
            reason = "missing_sender"
        elif fwd.to_user is None:
            reason = "missing_receiver"
        elif fwd.issue_id not in seen:
            reason = "orphaned"
        elif config.drop_self_loops and fwd.from_user == fwd.to_user:
            reason = "self_loop"
        else:
            kept_forwards.append(fwd)
            continue
        drops.append(DropRecord("forward", fwd.forward_id, reason))

    users = list(users)
    stats = {
        "issues": KindStats(len(issues), len(issues) - len(kept_issues)),
        "forwards": KindStats(len(forwards) + len(parse_drops),
                              len(forwards) - len(kept_forwards) + len(parse_drops)),
        "users": KindStats(len(users), 0),
    }
    return CleanDataset(kept_issues, kept_forwards, users, stats, list(parse_drops) + drops)


# --------------------------------------------------------------------------
# association and enrichment
# --------------------------------------------------------------------------

@dataclass
class LinkedDataset:
    issues: list[IssueRecord]
    forwards: list[ForwardEvent]
    users: list[UserRecord]
    forwards_by_issue: dict[int, list[ForwardEvent]]
    placeholders: list[int]
    stats: dict[str, KindStats]

    def issue(self, issue_id: int) -> IssueRecord:
        return self._issue_index[issue_id]

    def __post_init__(self):
        self._issue_index = {i.issue_id: i for i in self.issues}


def associate(clean_data: CleanDataset, users: Iterable[UserRecord] | None = None,
              missing_users: str = "placeholder") -> LinkedDataset:
    """Join forwards to issues and user ids to user records.

    Registered users who appear in no retained record are left out.  Ids with
    no user record become ``Unknown``-role placeholders, or raise
    :class:`UnresolvedUserError` when ``missing_users="error"``.
    """
    if missing_users not in ("placeholder", "error"):
        raise ValueError("missing_users must be 'placeholder' or 'error'")
    registry_list = list(users) if users is not None else list(clean_data.users)
    registry = {}
    for u in registry_list:
        registry.setdefault(u.user_id, u)

    issues = sorted(clean_data.issues, key=lambda r: r.issue_id)
    known_issues = {i.issue_id for i in issues}
    by_issue: dict[int, list[ForwardEvent]] = {i: [] for i in known_issues}
    for fwd in clean_data.forwards:
        if fwd.issue_id not in known_issues:
            raise ValueError(f"forward {fwd.forward_id} references unknown issue {fwd.issue_id}")
        by_issue[fwd.issue_id].append(fwd)
    for lst in by_issue.values():
        # stable: equal timestamps keep input order
        lst.sort(key=lambda f: f.created_at if f.created_at is not None else 0)

    involved = set()
    for issue in issues:
        if issue.created_by is not None:
            involved.add(issue.created_by)
    for fwd in clean_data.forwards:
        involved.add(fwd.from_user)
        involved.add(fwd.to_user)

    linked_users = []
    placeholders = []
    for uid in sorted(involved):
        if uid in registry:
            linked_users.append(registry[uid])
        elif missing_users == "error":
            raise UnresolvedUserError(f"user {uid} has no user record")
        else:
            placeholders.append(uid)
            linked_users.append(UserRecord(uid, None, "", UNKNOWN_ROLE))

    forwards = [f for i in sorted(by_issue) for f in by_issue[i]]
    stats = dict(clean_data.stats)
    stats["users"] = KindStats(len(registry_list),
                               len(registry_list) - (len(linked_users) - len(placeholders)))
    return LinkedDataset(issues, forwards, linked_users, by_issue, placeholders, stats)


@dataclass(frozen=True)
class EnrichedIssue:
    record: IssueRecord
    level: str
    type: str

    @property
    def issue_id(self) -> int:
        return self.record.issue_id


@dataclass
class EnrichedDataset:
    issues: list[EnrichedIssue]
    forwards_by_issue: dict[int, list[ForwardEvent]]
    users: dict[int, UserRecord]
    labels: LabelMap
    stats: dict[str, KindStats]

    def iter_forwards(self) -> Iterator[tuple[EnrichedIssue, ForwardEvent]]:
        for issue in self.issues:
            for fwd in self.forwards_by_issue.get(issue.issue_id, ()):
                yield issue, fwd


def enrich(linked: LinkedDataset, labels: LabelMap) -> EnrichedDataset:
    missing = {"level": set(), "type": set(), "role": set()}
    for issue in linked.issues:
        if issue.level_id not in labels.level_names:
            missing["level"].add(issue.level_id)
        if issue.type_id not in labels.type_names:
            missing["type"].add(issue.type_id)
    for user in linked.users:
        if user.role_id is not None and user.role_id not in labels.role_names:
            missing["role"].add(user.role_id)
    if any(missing.values()):
        raise LabelError({k: sorted(v) for k, v in missing.items()})

    issues = [EnrichedIssue(i, labels.level_names[i.level_id], labels.type_names[i.type_id])
              for i in linked.issues]
    users = {}
    for u in linked.users:
        role = UNKNOWN_ROLE if u.role_id is None else labels.role_names[u.role_id]
        users[u.user_id] = replace(u, role=role)
    return EnrichedDataset(issues, linked.forwards_by_issue, users, labels, linked.stats)


def load_dataset(issues_path, forwards_path, users_path=None, labels: LabelMap | None = None,
                 config: CleaningConfig | None = None,
                 missing_users: str = "placeholder") -> tuple[EnrichedDataset, dict]:
    """Parse, clean, associate and enrich the three exports in one go."""
    issues = parse_issue_records(issues_path)
    forwards = parse_forward_events(forwards_path)
    users = parse_user_records(users_path) if users_path else ParseReport(records=[])
    cleaned = clean(issues.records, forwards.records, config, users=users.records,
                    parse_drops=forwards.drops)
    linked = associate(cleaned, users.records, missing_users=missing_users)
    enriched = enrich(linked, labels or LabelMap.default())
    reasons = Counter((d.kind, d.reason) for d in cleaned.drops)
    report = {
        "stats": {k: s.as_dict() for k, s in linked.stats.items()},
        "drop_reasons": {f"{k}:{r}": n for (k, r), n in sorted(reasons.items())},
        "parse_errors": {
            "issues": [[e.row, e.message] for e in issues.errors],
            "forwards": [[e.row, e.message] for e in forwards.errors],
            "users": [[e.row, e.message] for e in users.errors],
        },
        "placeholder_users": linked.placeholders,
    }
    return enriched, report
