"""Parsing of line-delimited SDLC exports and graph construction.

Four export files feed the graph: ``incidents.jsonl``, ``changes.jsonl``,
``deployments.jsonl`` and ``manifest.jsonl``. Each non-blank line is one JSON
object; a bad line becomes a reject entry instead of aborting the load.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .graph import Edge, EdgeKind, GraphError, KnowledgeGraph, Node, NodeKind, make_id

logger = logging.getLogger(__name__)

INPUT_FILES = {
    "incident": "incidents.jsonl",
    "change": "changes.jsonl",
    "deployment": "deployments.jsonl",
    "manifest": "manifest.jsonl",
}

# kebab-case labels of classify.RootCauseClass, plus "unknown"
ATTRIBUTION_LABELS = frozenset(
    {
        "internal-code-defect",
        "automation-gap",
        "process-management",
        "vendor-external",
        "infrastructure-capacity",
        "unknown",
    }
)


class RecordError(ValueError):
    """A single export line failed schema validation."""


@dataclass(frozen=True)
class IncidentRecord:
    id: str
    opened_ts: int | float
    service: str
    description: str
    original_attribution: str = "unknown"
    resolution_note: str | None = None
    resolved_by_change: str | None = None

    @property
    def node_id(self) -> str:
        return make_id(NodeKind.INCIDENT, self.id)


@dataclass(frozen=True)
class ChangeRecord:
    id: str
    created_ts: int | float
    description: str
    touched_files: tuple[str, ...] = ()
    linked_incidents: tuple[str, ...] = ()


@dataclass(frozen=True)
class DeploymentRecord:
    id: str
    ts: int | float
    change_id: str
    environment: str


@dataclass(frozen=True)
class CodeManifestRecord:
    project: str
    path: str
    content_hash: str


@dataclass(frozen=True)
class Reject:
    file: str
    line: int
    reason: str


@dataclass
class IngestReport:
    accepted: dict[str, int] = field(default_factory=lambda: {k: 0 for k in INPUT_FILES})
    rejected: list[Reject] = field(default_factory=list)
    stubs_created: int = 0
    total_lines: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accepted": dict(self.accepted),
            "rejected": [asdict(r) for r in self.rejected],
            "stubs_created": self.stubs_created,
            "total_lines": dict(self.total_lines),
        }


# -- field validation ---------------------------------------------------------


def _req_str(obj: dict, name: str) -> str:
    if name not in obj or obj[name] is None:
        raise RecordError(f"missing {name}")
    val = obj[name]
    if not isinstance(val, str) or not val.strip():
        raise RecordError(f"bad {name}: expected non-empty string")
    return val


def _opt_str(obj: dict, name: str) -> str | None:
    val = obj.get(name)
    if val is None or val == "":
        return None
    if not isinstance(val, str):
        raise RecordError(f"bad {name}: expected string")
    return val


def _ts(obj: dict, name: str) -> int | float:
    if name not in obj or obj[name] is None:
        raise RecordError(f"missing {name}")
    val = obj[name]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or val <= 0:
        raise RecordError(f"bad {name}: expected positive epoch seconds")
    if isinstance(val, float) and val.is_integer():
        val = int(val)
    return val


def _str_list(obj: dict, name: str) -> tuple[str, ...]:
    val = obj.get(name, [])
    if val is None:
        return ()
    if not isinstance(val, list) or not all(isinstance(v, str) and v for v in val):
        raise RecordError(f"bad {name}: expected list of non-empty strings")
    return tuple(val)


def _local_id(value: str, name: str) -> str:
    if ":" in value:
        raise RecordError(f"bad {name}: ':' not allowed in ids")
    return value


def _incident(obj: dict) -> IncidentRecord:
    label = obj.get("original_attribution") or "unknown"
    if label not in ATTRIBUTION_LABELS:
        raise RecordError(f"bad original_attribution: {label!r}")
    change = _opt_str(obj, "resolved_by_change")
    return IncidentRecord(
        id=_local_id(_req_str(obj, "id"), "id"),
        opened_ts=_ts(obj, "opened_ts"),
        service=_local_id(_req_str(obj, "service"), "service"),
        description=_req_str(obj, "description"),
        original_attribution=label,
        resolution_note=_opt_str(obj, "resolution_note"),
        resolved_by_change=_local_id(change, "resolved_by_change") if change else None,
    )


def _change(obj: dict) -> ChangeRecord:
    files = _str_list(obj, "touched_files")
    for f in files:
        project, _, path = f.partition("/")
        if not project or not path or ":" in f:
            raise RecordError(f"bad touched_files entry {f!r}: expected 'project/path'")
    return ChangeRecord(
        id=_local_id(_req_str(obj, "id"), "id"),
        created_ts=_ts(obj, "created_ts"),
        description=_req_str(obj, "description"),
        touched_files=files,
        linked_incidents=tuple(_local_id(i, "linked_incidents") for i in _str_list(obj, "linked_incidents")),
    )


def _deployment(obj: dict) -> DeploymentRecord:
    return DeploymentRecord(
        id=_local_id(_req_str(obj, "id"), "id"),
        ts=_ts(obj, "ts"),
        change_id=_local_id(_req_str(obj, "change_id"), "change_id"),
        environment=obj.get("environment") if isinstance(obj.get("environment"), str) else "",
    )


def _manifest(obj: dict) -> CodeManifestRecord:
    project = _req_str(obj, "project")
    path = _req_str(obj, "path")
    if "/" in project or ":" in project or ":" in path:
        raise RecordError("bad project/path")
    return CodeManifestRecord(project=project, path=path.lstrip("/"), content_hash=obj.get("content_hash") or "")


_PARSERS = {
    "incident": _incident,
    "change": _change,
    "deployment": _deployment,
    "manifest": _manifest,
}


def parse_records(content: str, record_type: str) -> tuple[list[Any], list[tuple[int, str]]]:
    """Parse one export file. Returns ``(records, rejects)`` where each reject
    is ``(line_number, reason)``; blank lines are skipped.
    """
    try:
        parser = _PARSERS[record_type]
    except KeyError:
        raise ValueError(f"unknown record type {record_type!r}; expected one of {sorted(_PARSERS)}") from None
    records: list[Any] = []
    rejects: list[tuple[int, str]] = []
    for lineno, line in enumerate(content.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            rejects.append((lineno, f"invalid json: {exc.msg}"))
            continue
        if not isinstance(obj, dict):
            rejects.append((lineno, "not an object"))
            continue
        try:
            records.append(parser(obj))
        except RecordError as exc:
            rejects.append((lineno, str(exc)))
    return records, rejects


def _canonical(record: Any) -> str:
    return json.dumps(asdict(record), sort_keys=True)


def _dedupe(records: Iterable[Any], key, kind: str, report: IngestReport) -> list[Any]:
    """Sort by (key, content) and keep the first record per key.

    Sorting before deduplication makes the outcome independent of input order.
    """
    kept: dict[str, Any] = {}
    for rec in sorted(records, key=lambda r: (key(r), _canonical(r))):
        k = key(rec)
        prev = kept.get(k)
        if prev is None:
            kept[k] = rec
        elif prev != rec:
            report.rejected.append(Reject(INPUT_FILES[kind], 0, f"duplicate id {k!r} with different content"))
            report.accepted[kind] -= 1
    return [kept[k] for k in sorted(kept)]


def build_graph(
    incidents: Iterable[IncidentRecord] = (),
    changes: Iterable[ChangeRecord] = (),
    deployments: Iterable[DeploymentRecord] = (),
    manifests: Iterable[CodeManifestRecord] = (),
    report: IngestReport | None = None,
) -> tuple[KnowledgeGraph, IngestReport]:
    """Build and seal a graph from parsed records.

    References to changes or incidents with no record become stub nodes.
    Service, project and code-file nodes are created on demand and are not
    stubs.
    """
    report = report if report is not None else IngestReport()
    incidents, changes, deployments, manifests = map(list, (incidents, changes, deployments, manifests))
    for kind, recs in (("incident", incidents), ("change", changes), ("deployment", deployments), ("manifest", manifests)):
        report.accepted[kind] = report.accepted.get(kind, 0) + len(recs)
    incidents = _dedupe(incidents, lambda r: r.id, "incident", report)
    changes = _dedupe(changes, lambda r: r.id, "change", report)
    deployments = _dedupe(deployments, lambda r: r.id, "deployment", report)
    manifests = _dedupe(manifests, lambda r: f"{r.project}/{r.path}", "manifest", report)

    g = KnowledgeGraph()
    file_hashes = {f"{m.project}/{m.path}": m.content_hash for m in manifests}
    known_changes = {c.id for c in changes}
    known_incidents = {i.id for i in incidents}

    for inc in incidents:
        attrs = {"service": inc.service, "original_attribution": inc.original_attribution}
        if inc.resolution_note:
            attrs["resolution_note"] = inc.resolution_note
        if inc.resolved_by_change:
            attrs["resolved_by_change"] = inc.resolved_by_change
        g.add_node(Node(inc.node_id, NodeKind.INCIDENT, inc.description, inc.opened_ts, attrs))
    for svc in sorted({i.service for i in incidents}):
        g.add_node(Node(make_id(NodeKind.SERVICE, svc), NodeKind.SERVICE, svc))
    for chg in changes:
        g.add_node(Node(make_id(NodeKind.CHANGE_REQUEST, chg.id), NodeKind.CHANGE_REQUEST, chg.description, chg.created_ts))
    for dep in deployments:
        text = f"deployment of {dep.change_id} to {dep.environment}".strip()
        g.add_node(
            Node(make_id(NodeKind.DEPLOYMENT_EVENT, dep.id), NodeKind.DEPLOYMENT_EVENT, text, dep.ts, {"environment": dep.environment})
        )

    # dangling references -> stubs
    stub_changes = sorted(
        ({i.resolved_by_change for i in incidents if i.resolved_by_change} | {d.change_id for d in deployments})
        - known_changes
    )
    stub_incidents = sorted({i for c in changes for i in c.linked_incidents} - known_incidents)
    for cid in stub_changes:
        g.add_node(Node(make_id(NodeKind.CHANGE_REQUEST, cid), NodeKind.CHANGE_REQUEST, stub=True))
    for iid in stub_incidents:
        g.add_node(Node(make_id(NodeKind.INCIDENT, iid), NodeKind.INCIDENT, stub=True))
    report.stubs_created += len(stub_changes) + len(stub_incidents)

    all_files = sorted(set(file_hashes) | {f for c in changes for f in c.touched_files})
    for f in all_files:
        project, _, path = f.partition("/")
        attrs = {"project": project, "path": path}
        if file_hashes.get(f):
            attrs["content_hash"] = file_hashes[f]
        g.add_node(Node(make_id(NodeKind.CODE_FILE, f), NodeKind.CODE_FILE, f, attrs=attrs))
        pid = make_id(NodeKind.PROJECT, project)
        if pid not in g:
            g.add_node(Node(pid, NodeKind.PROJECT, project))
        g.add_edge(Edge(make_id(NodeKind.CODE_FILE, f), pid, EdgeKind.BELONGS_TO))

    for inc in incidents:
        g.add_edge(Edge(inc.node_id, make_id(NodeKind.SERVICE, inc.service), EdgeKind.AFFECTS))
        if inc.resolved_by_change:
            g.add_edge(Edge(inc.node_id, make_id(NodeKind.CHANGE_REQUEST, inc.resolved_by_change), EdgeKind.RESOLVED_BY))
    for chg in changes:
        cid = make_id(NodeKind.CHANGE_REQUEST, chg.id)
        for f in chg.touched_files:
            g.add_edge(Edge(cid, make_id(NodeKind.CODE_FILE, f), EdgeKind.TOUCHES))
        for iid in chg.linked_incidents:
            g.add_edge(Edge(make_id(NodeKind.INCIDENT, iid), cid, EdgeKind.RESOLVED_BY))
    for dep in deployments:
        g.add_edge(Edge(make_id(NodeKind.DEPLOYMENT_EVENT, dep.id), make_id(NodeKind.CHANGE_REQUEST, dep.change_id), EdgeKind.DEPLOYS))

    return g.seal(), report


def load_input_dir(input_dir: str | Path) -> tuple[KnowledgeGraph, IngestReport]:
    """Parse the four export files under ``input_dir`` and build the graph.

    Raises FileNotFoundError naming the first missing file.
    """
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise FileNotFoundError(f"input directory not found: {input_dir}")
    report = IngestReport()
    parsed: dict[str, list] = {}
    for kind, fname in INPUT_FILES.items():
        path = input_dir / fname
        if not path.is_file():
            raise FileNotFoundError(f"missing input file: {path}")
        content = path.read_text(encoding="utf-8")
        records, rejects = parse_records(content, kind)
        parsed[kind] = records
        report.total_lines[fname] = sum(1 for line in content.splitlines() if line.strip())
        report.rejected.extend(Reject(fname, n, why) for n, why in rejects)
        for n, why in rejects:
            logger.warning("%s:%d rejected: %s", fname, n, why)
    try:
        return build_graph(parsed["incident"], parsed["change"], parsed["deployment"], parsed["manifest"], report)
    except GraphError as exc:
        # e.g. a project name colliding across kinds; surfaced as a data error
        raise RecordError(str(exc)) from exc


def incident_from_node(node: Node) -> IncidentRecord:
    """Rebuild the incident record stored in a graph node."""
    if node.kind is not NodeKind.INCIDENT:
        raise ValueError(f"{node.id} is not an incident")
    a = node.attrs
    return IncidentRecord(
        id=node.id.split(":", 1)[1],
        opened_ts=node.timestamp or 0,
        service=a.get("service", ""),
        description=node.text,
        original_attribution=a.get("original_attribution", "unknown"),
        resolution_note=a.get("resolution_note"),
        resolved_by_change=a.get("resolved_by_change"),
    )
