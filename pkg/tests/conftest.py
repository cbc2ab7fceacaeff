from __future__ import annotations

import pytest

from causeway.fixtures import generate_fixture
from causeway.graph import Edge, EdgeKind, KnowledgeGraph, Node, NodeKind
from causeway.ingest import ChangeRecord, CodeManifestRecord, IncidentRecord, build_graph, load_input_dir

PAYMENTS_INCIDENT = IncidentRecord(
    id="I1",
    opened_ts=1_700_000_000,
    service="payments",
    description="Payments service unreachable; client requests delayed and timing out",
    original_attribution="vendor-external",
    resolution_note="service restarted by hand",
    resolved_by_change="CR-1",
)
PAYMENTS_CHANGE = ChangeRecord(
    id="CR-1",
    created_ts=1_700_007_200,
    description="add automation for restart of payments service",
    touched_files=("proj-a/deploy.sh",),
    linked_incidents=("I1",),
)


@pytest.fixture
def payments_graph():
    graph, _ = build_graph([PAYMENTS_INCIDENT], [PAYMENTS_CHANGE], [], [CodeManifestRecord("proj-a", "deploy.sh", "abc")])
    return graph


@pytest.fixture
def payments_incident():
    return PAYMENTS_INCIDENT


@pytest.fixture
def six_node_graph():
    """inc:I1 -> svc:gw <- inc:I0 -> chg:CR-7 -> file:proj-a/restart.sh -> proj:proj-a"""
    g = KnowledgeGraph()
    g.add_node(Node("inc:I1", NodeKind.INCIDENT, "gateway unreachable", 100))
    g.add_node(Node("inc:I0", NodeKind.INCIDENT, "gateway slow after restart", 50))
    g.add_node(Node("svc:gw", NodeKind.SERVICE, "gw"))
    g.add_node(Node("chg:CR-7", NodeKind.CHANGE_REQUEST, "add automation for gateway restart", 60))
    g.add_node(Node("file:proj-a/restart.sh", NodeKind.CODE_FILE, "proj-a/restart.sh"))
    g.add_node(Node("proj:proj-a", NodeKind.PROJECT, "proj-a"))
    g.add_edge(Edge("inc:I1", "svc:gw", EdgeKind.AFFECTS))
    g.add_edge(Edge("inc:I0", "svc:gw", EdgeKind.AFFECTS))
    g.add_edge(Edge("inc:I0", "chg:CR-7", EdgeKind.RESOLVED_BY))
    g.add_edge(Edge("chg:CR-7", "file:proj-a/restart.sh", EdgeKind.TOUCHES))
    g.add_edge(Edge("file:proj-a/restart.sh", "proj:proj-a", EdgeKind.BELONGS_TO))
    return g.seal()


@pytest.fixture(scope="session")
def fixture_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixtures")
    out = {}
    for profile in ("table1", "fig4", "reattribution", "corpus"):
        d = root / profile
        manifest = generate_fixture(profile, d, seed=7)
        out[profile] = (d, manifest)
    return out


@pytest.fixture(scope="session")
def recurrence_graph(fixture_dirs):
    graph, _ = load_input_dir(fixture_dirs["table1"][0])
    return graph


@pytest.fixture(scope="session")
def reattribution_graph(fixture_dirs):
    graph, _ = load_input_dir(fixture_dirs["reattribution"][0])
    return graph


# -- acceptance result lines ------------------------------------------------------

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Call with (criterion, passed, detail); the line is printed immediately
    and repeated in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(criterion: int, passed: bool, detail: str) -> bool:
        line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines[criterion] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
