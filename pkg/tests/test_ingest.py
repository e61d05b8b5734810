import io
import json

import pytest
from hypothesis import given, settings, strategies as st

from collabtwin.ingest import (
    CleaningConfig, ForwardEvent, IssueRecord, LabelError, LabelMap, SchemaError, UnresolvedUserError,
    UserRecord, associate, clean, count_tokens, enrich, load_dataset, parse_forward_events,
    parse_issue_records, parse_user_records, role_abbrev,
)

ISSUE_HEADER = "ID,ProjectID,Description,TypeID,LevelID,StatusID,CreatedAt,CreatedBy\n"
FORWARD_HEADER = "ID,IssueID,ProjectID,StatusID,ApproveStatus,FromUserID,CreatedAt,ToUserIDs\n"


def issue(i, desc="crack found in the east slab", created=1553078874, by=1, level=2, type_id=2):
    return IssueRecord(i, 442, desc, type_id, level, 5, created, by)


def fwd(fid, issue_id, a, b, ts=1553079000):
    return ForwardEvent(str(fid), issue_id, a, b, ts)


class TestParseIssues:
    def test_export_row(self):
        text = ISSUE_HEADER + '4,442,"承台基坑无",2,2,5,1553078874,191\n'
        report = parse_issue_records(io.StringIO(text))
        assert report.errors == []
        (rec,) = report.records
        assert (rec.issue_id, rec.type_id, rec.level_id, rec.created_at, rec.created_by) == (4, 2, 2, 1553078874, 191)
        assert rec.description == "承台基坑无"

    def test_empty_stream(self):
        report = parse_issue_records(io.StringIO(""))
        assert report.records == [] and report.errors == []

    def test_missing_created_at_goes_to_error_report(self):
        text = ISSUE_HEADER + "4,442,a b c d e,2,2,5,,191\n5,442,a b c d e,2,2,5,1553078900,191\n"
        report = parse_issue_records(io.StringIO(text))
        assert [r.issue_id for r in report.records] == [5]
        assert len(report.errors) == 1 and report.errors[0].row == 1
        assert "CreatedAt" in report.errors[0].message

    def test_bad_integer_reported_with_row(self):
        text = ISSUE_HEADER + "x,442,a b c d e,2,2,5,1,1\n"
        report = parse_issue_records(io.StringIO(text))
        assert report.records == [] and report.errors[0].row == 1

    def test_missing_header_column_is_fatal(self):
        with pytest.raises(SchemaError, match="level_id"):
            parse_issue_records(io.StringIO("ID,Description,TypeID,CreatedAt,CreatedBy\n1,x,1,1,1\n"))

    def test_snake_case_headers_and_quoting(self):
        text = 'issue_id,description,type_id,level_id,created_at,created_by\n7,"a, quoted ""text"" here ok",1,3,10,2\n'
        (rec,) = parse_issue_records(io.StringIO(text)).records
        assert rec.description == 'a, quoted "text" here ok'
        assert rec.project_id is None

    def test_ndjson(self):
        lines = [json.dumps({"ID": 4, "Description": "a b c d e", "TypeID": 2, "LevelID": 2,
                             "CreatedAt": 1553078874, "CreatedBy": 191}), "not json",
                 json.dumps({"ID": 5})]
        report = parse_issue_records(io.StringIO("\n".join(lines)), fmt="ndjson")
        assert [r.issue_id for r in report.records] == [4]
        assert [e.row for e in report.errors] == [2, 3]


class TestParseForwards:
    def test_self_loop_row_kept(self):
        text = FORWARD_HEADER + '13,4,442,2,1,191,1553078874,"[""191""]"\n'
        (ev,) = parse_forward_events(io.StringIO(text)).records
        assert (ev.forward_id, ev.issue_id, ev.from_user, ev.to_user) == ("13", 4, 191, 191)

    def test_fan_out_expansion_in_list_order(self):
        text = FORWARD_HEADER + '20,4,442,2,1,3,1553078874,"[""5"",""7""]"\n'
        events = parse_forward_events(io.StringIO(text)).records
        assert [(e.issue_id, e.to_user) for e in events] == [(4, 5), (4, 7)]
        assert len({e.forward_id for e in events}) == 2
        assert all(e.forward_id.startswith("20") for e in events)

    def test_empty_receivers_give_drop_record(self):
        text = FORWARD_HEADER + '21,4,442,2,1,3,1553078874,[]\n'
        report = parse_forward_events(io.StringIO(text))
        assert report.records == []
        assert [(d.record_id, d.reason) for d in report.drops] == [("21", "no_receivers")]

    @given(st.lists(st.lists(st.integers(1, 99), min_size=0, max_size=4), max_size=20))
    @settings(max_examples=50, deadline=None)
    def test_multiplicity_preserved(self, receiver_lists):
        rows = [f'{i},1,442,2,1,3,100,"{json.dumps([str(r) for r in recv]).replace(chr(34), chr(34) * 2)}"'
                for i, recv in enumerate(receiver_lists)]
        report = parse_forward_events(io.StringIO(FORWARD_HEADER + "\n".join(rows) + "\n"))
        assert len(report.records) == sum(len(r) for r in receiver_lists)
        assert len(report.drops) == sum(1 for r in receiver_lists if not r)


def test_parse_users():
    report = parse_user_records(io.StringIO("ID,RoleID,Organization\n1,2,GC\n2,,Owner Co\n"))
    assert report.records == [UserRecord(1, 2, "GC"), UserRecord(2, None, "Owner Co")]


class TestTokens:
    @pytest.mark.parametrize("text,n", [
        ("", 0), ("   ", 0), ("one two three", 3), ("承台基坑无", 5), ("承台", 2),
        ("rebar 承台基坑", 5), ("a  b\tc\nd e", 5),
    ])
    def test_count(self, text, n):
        assert count_tokens(text) == n


class TestClean:
    def test_three_token_description_dropped(self):
        out = clean([issue(1, "too short here")], [])
        assert out.issues == []
        assert out.stats["issues"].dropped == 1
        assert out.drops[0].reason == "short_description"

    def test_counting_eight_of_ten(self):
        issues = [issue(i) for i in range(8)] + [issue(8, ""), issue(9, created=0)]
        out = clean(issues, [])
        assert out.stats["issues"].retained == 8
        assert out.stats["issues"].input == 10

    def test_orphaned_forward(self):
        out = clean([issue(1, "x")], [fwd(1, 1, 2, 3)])
        assert out.forwards == []
        assert ("forward", "orphaned") in {(d.kind, d.reason) for d in out.drops}

    def test_missing_endpoints(self):
        out = clean([issue(1)], [fwd(1, 1, None, 3), fwd(2, 1, 2, None), fwd(3, 1, 2, 3)])
        assert [f.forward_id for f in out.forwards] == ["3"]
        assert sorted(d.reason for d in out.drops) == ["missing_receiver", "missing_sender"]

    def test_self_loops_kept_by_default(self):
        forwards = [fwd(1, 1, 2, 2), fwd(2, 1, 2, 3)]
        assert len(clean([issue(1)], forwards).forwards) == 2
        dropped = clean([issue(1)], forwards, CleaningConfig(drop_self_loops=True))
        assert [f.forward_id for f in dropped.forwards] == ["2"]

    def test_min_tokens_zero_keeps_short(self):
        out = clean([issue(1, "x")], [], CleaningConfig(min_description_tokens=0))
        assert len(out.issues) == 1

    def test_negative_min_tokens_rejected(self):
        with pytest.raises(ValueError):
            CleaningConfig(min_description_tokens=-1)

    @given(st.lists(st.tuples(st.sampled_from(["", "a b", "a b c d e", "one two three four five six"]),
                              st.integers(-1, 3)), max_size=15),
           st.lists(st.tuples(st.integers(0, 16), st.one_of(st.none(), st.integers(1, 4)),
                              st.one_of(st.none(), st.integers(1, 4))), max_size=25),
           st.booleans())
    @settings(max_examples=80, deadline=None)
    def test_idempotent_and_balanced(self, issue_specs, fwd_specs, drop_loops):
        issues = [issue(i, d, created=c) for i, (d, c) in enumerate(issue_specs)]
        forwards = [fwd(k, i, a, b) for k, (i, a, b) in enumerate(fwd_specs)]
        cfg = CleaningConfig(drop_self_loops=drop_loops)
        once = clean(issues, forwards, cfg)
        for s in once.stats.values():
            assert s.retained + s.dropped == s.input
        assert once.stats["issues"].retained == len(once.issues)
        twice = clean(once.issues, once.forwards, cfg)
        assert twice.stats["issues"].dropped == 0
        assert twice.stats["forwards"].dropped == 0


class TestAssociate:
    def test_links_and_shrinks_users(self):
        out = clean([issue(4, by=1)], [fwd(1, 4, 1, 2)])
        users = [UserRecord(u, 1) for u in (1, 2, 3, 4)]
        linked = associate(out, users)
        assert [u.user_id for u in linked.users] == [1, 2]
        assert linked.forwards_by_issue[4][0].forward_id == "1"
        assert linked.stats["users"].input == 4
        assert linked.stats["users"].retained == 2

    def test_placeholder_for_unregistered(self):
        linked = associate(clean([issue(4, by=1)], [fwd(1, 4, 999, 1)]), [UserRecord(1, 1)])
        placeholder = {u.user_id: u for u in linked.users}[999]
        assert placeholder.role == "Unknown"
        assert linked.placeholders == [999]

    def test_error_policy(self):
        with pytest.raises(UnresolvedUserError):
            associate(clean([issue(4, by=1)], [fwd(1, 4, 999, 1)]), [UserRecord(1, 1)],
                      missing_users="error")

    def test_no_dangling_references(self):
        issues = [issue(i, by=i % 3 + 1) for i in range(6)]
        forwards = [fwd(k, k % 7, k % 4 + 1, (k + 1) % 5 + 1) for k in range(20)]
        linked = associate(clean(issues, forwards), [UserRecord(u, 1) for u in range(1, 4)])
        issue_ids = {i.issue_id for i in linked.issues}
        user_ids = {u.user_id for u in linked.users}
        for f in linked.forwards:
            assert f.issue_id in issue_ids
            assert f.from_user in user_ids and f.to_user in user_ids
        for i in linked.issues:
            assert i.created_by in user_ids


class TestEnrich:
    def test_labels_attached(self):
        linked = associate(clean([issue(4, by=1, level=2)], [fwd(1, 4, 1, 2)]),
                           [UserRecord(1, 2), UserRecord(2, 1)])
        data = enrich(linked, LabelMap.default())
        assert data.issues[0].level == "M"
        assert data.issues[0].type == "Safety"
        assert data.users[1].role == "Safety Engineer"
        assert role_abbrev(data.users[1].role) == "S"
        assert role_abbrev(data.users[2].role) == "O"

    def test_unmapped_type_names_id(self):
        linked = associate(clean([issue(4, type_id=9)], [fwd(1, 4, 1, 2)]), [])
        with pytest.raises(LabelError) as info:
            enrich(linked, LabelMap.default())
        assert info.value.missing["type"] == [9]
        assert "9" in str(info.value)


def test_label_map_text_round_trip():
    text = "[levels]\n1=L\n2=M\n3=H\n\n[types]\n1=Quality\n\n[roles]\n2=Safety Engineer\n"
    labels = LabelMap.from_text(text)
    assert labels.level_names == {1: "L", 2: "M", 3: "H"}
    assert labels.role_names == {2: "Safety Engineer"}
    assert LabelMap.from_text(labels.to_text()) == labels
    with pytest.raises(SchemaError):
        LabelMap.from_text("[levels]\nx=L\n")


def test_load_dataset_from_files(tmp_path):
    (tmp_path / "i.csv").write_text(ISSUE_HEADER + "4,442,a b c d e,2,2,5,1553078874,191\n"
                                    "5,442,too short,1,1,5,1553078900,177\n")
    (tmp_path / "f.csv").write_text(FORWARD_HEADER + '13,4,442,2,1,191,1553078874,"[""191""]"\n'
                                    '15,4,442,2,2,191,1553078976,"[""61""]"\n'
                                    '16,5,442,1,1,177,1553079091,"[""184""]"\n')
    (tmp_path / "u.csv").write_text("ID,RoleID,Organization\n191,2,GC\n61,1,Owner\n177,5,Sup\n500,1,X\n")
    data, report = load_dataset(tmp_path / "i.csv", tmp_path / "f.csv", tmp_path / "u.csv")
    assert [i.issue_id for i in data.issues] == [4]
    assert report["stats"]["forwards"] == {"input": 3, "dropped": 1, "retained": 2}
    assert report["stats"]["users"] == {"input": 4, "dropped": 2, "retained": 2}
    assert report["drop_reasons"] == {"forward:orphaned": 1, "issue:short_description": 1}
