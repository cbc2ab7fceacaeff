"""Pipeline orchestration and the structured / text report formats.

The structured report is line-delimited JSON: one ``meta`` record, one
``incident`` record per analysed incident, then the aggregates
(``recurrence``, ``attribution_shift``, ``pareto``) and an optional ``scan``
summary. Aggregates can always be recomputed from the incident records.
"""

from __future__ import annotations

import io
import json
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .classify import (
    VALIDATION_PROXY_LABEL,
    AttributionShift,
    ClassifiedCause,
    ParetoCut,
    RecurrencePattern,
    RootCauseClass,
    attribution_shift,
    classify,
    detect_recurrence,
    pareto_rank,
    validate_against_history,
)
from .config import FunnelConfig
from .funnel import ReasoningBackend, SymptomSignature, WhyChain, extract_symptoms, run_funnel
from .graph import KnowledgeGraph, NodeKind
from .ingest import IncidentRecord, incident_from_node
from .scanner import ScanSummary

NOT_REPRODUCED = (
    "95% of findings validated by post-incident reviews (human judgement; replaced by the recurrence-agreement proxy)",
    "organisational outcomes: 45% fewer major incidents, 45.5% lower change failure rate, 46.3% shorter lead time",
    "full-scale corpus counts (5,535 projects / 226 projects / 415 files; desk-scale planted corpus used instead)",
)


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class IncidentEntry:
    incident: str
    original_attribution: str
    signature: SymptomSignature
    chain: WhyChain
    cls: RootCauseClass
    rationale: str
    validated: bool

    def to_dict(self) -> dict:
        return {
            "incident": self.incident,
            "original_attribution": self.original_attribution,
            "signature": self.signature.to_dict(),
            "chain": self.chain.to_dict(),
            "class": self.cls.value,
            "rationale": self.rationale,
            "validated": self.validated,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IncidentEntry":
        return cls(
            d["incident"],
            d["original_attribution"],
            SymptomSignature.from_dict(d["signature"]),
            WhyChain.from_dict(d["chain"]),
            RootCauseClass(d["class"]),
            d["rationale"],
            bool(d["validated"]),
        )

    def as_record(self) -> IncidentRecord:
        return IncidentRecord(
            id=self.incident.split(":", 1)[1],
            opened_ts=1,
            service=self.signature.service,
            description="",
            original_attribution=self.original_attribution,
        )

    def as_classified(self) -> ClassifiedCause:
        return ClassifiedCause(self.incident, self.cls, self.rationale, self.chain, self.validated)


@dataclass
class PipelineReport:
    entries: list[IncidentEntry] = field(default_factory=list)
    patterns: list[RecurrencePattern] = field(default_factory=list)
    shift: AttributionShift | None = None
    pareto: ParetoCut | None = None
    scan: ScanSummary | None = None
    config: dict = field(default_factory=dict)
    timestamps: dict = field(default_factory=dict)

    @property
    def aborted(self) -> bool:
        return any(e.chain.aborted for e in self.entries)

    def entry(self, incident: str) -> IncidentEntry:
        for e in self.entries:
            if e.incident == incident:
                return e
        raise KeyError(incident)

    # -- structured format ----------------------------------------------------

    def to_structured(self) -> str:
        lines = [
            {
                "record": "meta",
                "config": self.config,
                "timestamps": self.timestamps,
                "validation": VALIDATION_PROXY_LABEL,
                "not_reproduced": list(NOT_REPRODUCED),
            }
        ]
        lines += [{"record": "incident", **e.to_dict()} for e in self.entries]
        lines += [{"record": "recurrence", **p.to_dict()} for p in self.patterns]
        if self.shift is not None:
            lines.append({"record": "attribution_shift", **self.shift.to_dict()})
        if self.pareto is not None:
            lines.append({"record": "pareto", **self.pareto.to_dict()})
        if self.scan is not None:
            lines.append({"record": "scan", **self.scan.to_dict()})
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in lines)

    @classmethod
    def from_structured(cls, text: str) -> "PipelineReport":
        report = cls()
        seen_meta = False
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                kind = d.pop("record")
                if kind == "meta":
                    report.config = d.get("config", {})
                    report.timestamps = d.get("timestamps", {})
                    seen_meta = True
                elif kind == "incident":
                    report.entries.append(IncidentEntry.from_dict(d))
                elif kind == "recurrence":
                    report.patterns.append(RecurrencePattern.from_dict(d))
                elif kind == "attribution_shift":
                    report.shift = AttributionShift.from_dict(d)
                elif kind == "pareto":
                    report.pareto = ParetoCut.from_dict(d)
                elif kind == "scan":
                    report.scan = ScanSummary.from_dict(d)
                else:
                    raise ReportError(f"unknown record type {kind!r}")
            except (KeyError, TypeError, ValueError, AttributeError) as exc:
                raise ReportError(f"line {lineno}: malformed report record ({exc})") from None
        if not seen_meta:
            raise ReportError("report has no meta record")
        return report

    # -- text format ---------------------------------------------------------------

    def to_text(self) -> str:
        out = io.StringIO()
        w = out.write
        w("ROOT CAUSE ANALYSIS REPORT\n")
        w(f"{VALIDATION_PROXY_LABEL}\n")
        w(f"incidents analysed: {len(self.entries)}\n\n")

        w("== Why chains ==\n")
        if not self.entries:
            w("(none)\n")
        for e in self.entries:
            c = e.chain
            w(f"\n{e.incident}  [{e.signature.category}]  {c.termination.value}"
              f"{'  (backend aborted)' if c.aborted else ''}\n")
            w(f"  {'depth':<5} {'supported':<9} cause / citations\n")
            for s in c.steps:
                w(f"  {s.depth:<5} {'yes' if s.supported else 'no':<9} {s.cause}\n")
                if s.cited:
                    w(f"  {'':<5} {'':<9}   cites: {', '.join(s.cited)}\n")
            w(f"  class: {e.cls.value}  ({e.rationale}); validated: {'yes' if e.validated else 'no'}\n")

        w("\n== Recurrence patterns ==\n")
        if not self.patterns:
            w("(none)\n")
        for p in self.patterns:
            w(f"  {p.category:<24} {p.count:>3}  {', '.join(p.incidents)}\n")

        w("\n== Attribution shift (original label -> new class) ==\n")
        if self.shift is None or not self.shift.matrix:
            w("(none)\n")
        else:
            cols = [c.value for c in RootCauseClass]
            w(f"  {'original':<24}" + "".join(f"{_SHORT[c]:>12}" for c in cols) + "\n")
            for label in sorted(self.shift.matrix):
                row = self.shift.matrix[label]
                w(f"  {label:<24}" + "".join(f"{row.get(c, 0):>12}" for c in cols) + "\n")
            s = self.shift
            w(f"  internal share before: {_pct(s.internal_share_before, s.before_defined)}\n")
            w(f"  internal share after:  {_pct(s.internal_share_after, s.after_defined)}\n")
            w(
                f"  originally external now internal: {s.external_reattributed}/{s.external_total}"
                f" ({_pct(s.external_to_internal_share, s.external_total > 0)})\n"
            )

        w("\n== Pareto (80/20) ==\n")
        if self.pareto is None:
            w("(none)\n")
        else:
            for cat, count, cum in self.pareto.ranked:
                mark = "*" if cat in self.pareto.cut else " "
                w(f" {mark} {cat:<24} {count:>4} {cum:>8.1%}\n")
            w(f"  cut: {', '.join(self.pareto.cut)}\n")

        if self.scan is not None:
            s = self.scan
            w("\n== Corpus scan ==\n")
            w(f"  total projects: {s.total_projects}\n  matched projects: {s.matched_projects}\n  matched files: {s.matched_files}\n")
            for rule_id, (projects, files) in sorted(s.per_rule.items()):
                w(f"  rule {rule_id}: {projects} projects, {files} files\n")
            if s.skipped_binary:
                w(f"  binary files skipped: {s.skipped_binary}\n")

        w("\n== Not reproduced ==\n")
        for item in NOT_REPRODUCED:
            w(f"  - {item}\n")
        return out.getvalue()


_SHORT = {
    "internal-code-defect": "code-defect",
    "automation-gap": "automation",
    "process-management": "process",
    "vendor-external": "vendor",
    "infrastructure-capacity": "capacity",
    "unknown": "unknown",
}


def _pct(value: float, defined: bool) -> str:
    return f"{value:.1%}" if defined else "undefined (reported as 0)"


def compute_aggregates(entries: Sequence[IncidentEntry]) -> tuple[list[RecurrencePattern], AttributionShift, ParetoCut | None]:
    patterns = detect_recurrence((e.incident, e.signature) for e in entries)
    shift = attribution_shift([e.as_record() for e in entries], [e.as_classified() for e in entries])
    pareto = pareto_rank(patterns) if patterns else None
    return patterns, shift, pareto


def _validate(entries: list[IncidentEntry], patterns: list[RecurrencePattern]) -> list[IncidentEntry]:
    classified = [e.as_classified() for e in entries]
    out = []
    for e, c in zip(entries, classified):
        prior = [p for p in classified if p.incident != e.incident]
        ok = validate_against_history(c, patterns, prior)
        out.append(IncidentEntry(e.incident, e.original_attribution, e.signature, e.chain, e.cls, e.rationale, ok))
    return out


def _assemble(entries: list[IncidentEntry], config: FunnelConfig, timestamps: dict) -> PipelineReport:
    entries = sorted(entries, key=lambda e: e.incident)
    patterns = detect_recurrence((e.incident, e.signature) for e in entries)
    entries = _validate(entries, patterns)
    patterns, shift, pareto = compute_aggregates(entries)
    return PipelineReport(entries, patterns, shift, pareto, None, config.to_dict(), timestamps)


def analyze_incident(
    graph: KnowledgeGraph,
    incident: IncidentRecord,
    backend: ReasoningBackend,
    config: FunnelConfig,
) -> IncidentEntry:
    signature = extract_symptoms(incident, config.symptom_taxonomy)
    chain = run_funnel(graph, incident, backend, config)
    cls, why = classify(chain, None, config.class_keywords, config.automation_keywords)
    return IncidentEntry(incident.node_id, incident.original_attribution, signature, chain, cls, why, False)


def analyze(
    graph: KnowledgeGraph,
    incident_ids: Iterable[str] | None,
    backend: ReasoningBackend,
    config: FunnelConfig | None = None,
    jobs: int = 1,
) -> PipelineReport:
    """Run symptoms -> Five Whys -> classification for the given incidents
    (all non-stub incidents when ``incident_ids`` is None) and aggregate.
    """
    config = config or FunnelConfig()
    if incident_ids is None:
        nodes = [n for n in graph.nodes(NodeKind.INCIDENT) if not n.stub]
    else:
        nodes = [graph.node(i) for i in incident_ids]
        bad = [n.id for n in nodes if n.kind is not NodeKind.INCIDENT]
        if bad:
            raise ReportError(f"not incident nodes: {bad}")
    records = [incident_from_node(n) for n in nodes]
    if jobs > 1 and len(records) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(lambda r: analyze_incident(graph, r, backend, config), records))
    else:
        entries = [analyze_incident(graph, r, backend, config) for r in records]
    stamps = [n.timestamp for n in nodes if n.timestamp is not None]
    timestamps = {"first_incident_ts": min(stamps), "last_incident_ts": max(stamps)} if stamps else {}
    return _assemble(entries, config, timestamps)


def reclassify(report: PipelineReport, config: FunnelConfig | None = None) -> PipelineReport:
    """Re-run classification and aggregation over the chains in ``report``."""
    config = config or FunnelConfig()
    entries = []
    for e in report.entries:
        cls, why = classify(e.chain, None, config.class_keywords, config.automation_keywords)
        entries.append(IncidentEntry(e.incident, e.original_attribution, e.signature, e.chain, cls, why, False))
    new = _assemble(entries, config, report.timestamps)
    new.scan = report.scan
    return new


def check_consistency(report: PipelineReport) -> list[str]:
    """Differences between stored aggregates and ones recomputed from entries."""
    problems = []
    patterns = detect_recurrence((e.incident, e.signature) for e in report.entries)
    expected_valid = _validate(list(report.entries), patterns)
    for stored, fresh in zip(report.entries, expected_valid):
        if stored.validated != fresh.validated:
            problems.append(f"{stored.incident}: validated flag mismatch")
    patterns, shift, pareto = compute_aggregates(report.entries)
    if patterns != report.patterns:
        problems.append("recurrence patterns differ")
    if report.shift is None or shift.to_dict() != report.shift.to_dict():
        problems.append("attribution shift differs")
    if (pareto is None) != (report.pareto is None) or (pareto is not None and pareto.to_dict() != report.pareto.to_dict()):
        problems.append("pareto cut differs")
    return problems
