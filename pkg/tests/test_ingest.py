import json
import random

import pytest

from causeway.graph import EdgeKind, NodeKind
from causeway.ingest import (
    ChangeRecord,
    DeploymentRecord,
    IncidentRecord,
    build_graph,
    incident_from_node,
    load_input_dir,
    parse_records,
)


def test_parse_incident_line():
    line = json.dumps(
        {
            "id": "INC10",
            "opened_ts": 1700000000,
            "service": "db-cluster",
            "description": "long-running SQL query exhausted connection pool",
            "original_attribution": "vendor-external",
        }
    )
    records, rejects = parse_records(line + "\n", "incident")
    assert rejects == []
    assert records == [
        IncidentRecord("INC10", 1700000000, "db-cluster", "long-running SQL query exhausted connection pool", "vendor-external")
    ]


def test_parse_empty():
    assert parse_records("", "change") == ([], [])


def test_parse_rejects_carry_line_numbers():
    content = "\n".join(
        [
            '{"opened_ts": 5, "service": "s", "description": "d"}',
            "",
            "not json",
            "[1, 2]",
            '{"id": "A", "opened_ts": -1, "service": "s", "description": "d"}',
            '{"id": "B", "opened_ts": 3, "service": "s", "description": "d", "original_attribution": "aliens"}',
            '{"id": "C", "opened_ts": 3, "service": "s", "description": "d"}',
        ]
    )
    records, rejects = parse_records(content, "incident")
    assert [r.id for r in records] == ["C"]
    assert records[0].original_attribution == "unknown"
    assert [n for n, _ in rejects] == [1, 3, 4, 5, 6]
    assert rejects[0] == (1, "missing id")


def test_parse_change_file_format():
    ok = '{"id": "CR-1", "created_ts": 9, "description": "d", "touched_files": ["p/a.sql"]}'
    bad = '{"id": "CR-2", "created_ts": 9, "description": "d", "touched_files": ["noslash"]}'
    records, rejects = parse_records(ok + "\n" + bad, "change")
    assert records[0].touched_files == ("p/a.sql",)
    assert rejects[0][0] == 2


def test_dangling_change_becomes_stub():
    inc = IncidentRecord("I9", 10, "svc1", "broken", resolved_by_change="CR-1")
    graph, report = build_graph([inc])
    assert report.stubs_created == 1
    assert graph.node("chg:CR-1").stub
    assert graph.successors("inc:I9", EdgeKind.RESOLVED_BY) == ["chg:CR-1"]


def test_stub_count_is_distinct_ids():
    incs = [IncidentRecord(f"I{i}", 10, "s", "x", resolved_by_change="CR-X") for i in range(3)]
    deps = [DeploymentRecord("D1", 11, "CR-X", "prod"), DeploymentRecord("D2", 12, "CR-Y", "prod")]
    chg = ChangeRecord("CR-Z", 5, "z", linked_incidents=("I0", "I77"))
    _, report = build_graph(incs, [chg], deps)
    # CR-X, CR-Y and incident I77
    assert report.stubs_created == 3


def test_payments_case_counts(payments_graph):
    # incident, service, change, file, project; AFFECTS, RESOLVED_BY, TOUCHES, BELONGS_TO
    assert len([n for n in payments_graph.nodes() if not n.stub]) == 5
    assert len(payments_graph.edges()) == 4


def test_eleven_incident_counts(fixture_dirs):
    graph, report = load_input_dir(fixture_dirs["table1"][0])
    assert len(graph) == 15
    assert len(graph.edges(EdgeKind.AFFECTS)) == 11
    assert len(graph.nodes(NodeKind.SERVICE)) == 4
    assert report.accepted["incident"] == 11


def test_report_accounts_for_every_line(tmp_path):
    (tmp_path / "incidents.jsonl").write_text(
        '{"id": "A", "opened_ts": 3, "service": "s", "description": "d"}\n\nbroken\n'
    )
    for f in ("changes.jsonl", "deployments.jsonl", "manifest.jsonl"):
        (tmp_path / f).write_text("")
    _, report = load_input_dir(tmp_path)
    assert report.accepted["incident"] + sum(r.file == "incidents.jsonl" for r in report.rejected) == report.total_lines["incidents.jsonl"] == 2


def test_missing_file_named(tmp_path):
    for f in ("changes.jsonl", "deployments.jsonl", "manifest.jsonl"):
        (tmp_path / f).write_text("")
    with pytest.raises(FileNotFoundError, match="incidents.jsonl"):
        load_input_dir(tmp_path)


def test_conflicting_duplicates_resolved_order_independently():
    a = IncidentRecord("I1", 10, "s", "first")
    b = IncidentRecord("I1", 10, "s", "second")
    g1, r1 = build_graph([a, b])
    g2, r2 = build_graph([b, a])
    assert g1.to_jsonl() == g2.to_jsonl()
    assert len(r1.rejected) == len(r2.rejected) == 1


def test_round_trip_and_order_insensitivity(fixture_dirs):
    d = fixture_dirs["reattribution"][0]
    graph, _ = load_input_dir(d)
    text = graph.to_jsonl()
    from causeway.graph import KnowledgeGraph

    assert KnowledgeGraph.from_jsonl(text).to_jsonl() == text

    parsed = {}
    for kind, fname in (("incident", "incidents.jsonl"), ("change", "changes.jsonl"), ("deployment", "deployments.jsonl"), ("manifest", "manifest.jsonl")):
        lines = (d / fname).read_text().splitlines()
        random.Random(3).shuffle(lines)
        parsed[kind], _ = parse_records("\n".join(lines), kind)
    shuffled, _ = build_graph(parsed["incident"], parsed["change"], parsed["deployment"], parsed["manifest"])
    assert shuffled.to_jsonl() == text


def test_incident_from_node_round_trip(payments_graph, payments_incident):
    assert incident_from_node(payments_graph.node("inc:I1")) == payments_incident
