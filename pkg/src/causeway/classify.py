"""Root-cause classification, recurrence detection and aggregate views.

Validation here is a mechanical proxy: a classification counts as validated
when another incident in the same recurrence pattern carries the same class.
It is not a human post-incident review.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from ._text import matching_keywords
from .config import DEFAULT_AUTOMATION_KEYWORDS, DEFAULT_CLASS_KEYWORDS
from .funnel import UNCATEGORIZED, SymptomSignature, WhyChain
from .graph import NodeKind, kind_of
from .ingest import IncidentRecord

VALIDATION_PROXY_LABEL = (
    "validation proxy: class agreement within a recurrence pattern "
    "(not a human post-incident review)"
)


class EmptyInput(ValueError):
    pass


class RootCauseClass(Enum):
    INTERNAL_CODE_DEFECT = "internal-code-defect"
    AUTOMATION_GAP = "automation-gap"
    PROCESS_MANAGEMENT = "process-management"
    VENDOR_EXTERNAL = "vendor-external"
    INFRASTRUCTURE_CAPACITY = "infrastructure-capacity"
    UNKNOWN = "unknown"

    @property
    def internal(self) -> bool:
        return self in _INTERNAL

    @property
    def external(self) -> bool:
        return self in _EXTERNAL


_INTERNAL = frozenset(
    {RootCauseClass.INTERNAL_CODE_DEFECT, RootCauseClass.AUTOMATION_GAP, RootCauseClass.INFRASTRUCTURE_CAPACITY}
)
_EXTERNAL = frozenset({RootCauseClass.PROCESS_MANAGEMENT, RootCauseClass.VENDOR_EXTERNAL})

# a backend's class hint is only trusted if the final step cites one of these
HINT_EVIDENCE = {
    RootCauseClass.INTERNAL_CODE_DEFECT: frozenset({NodeKind.CODE_FILE}),
    RootCauseClass.AUTOMATION_GAP: frozenset({NodeKind.CHANGE_REQUEST}),
    RootCauseClass.PROCESS_MANAGEMENT: frozenset({NodeKind.CHANGE_REQUEST, NodeKind.TEAM, NodeKind.REQUIREMENT}),
    RootCauseClass.VENDOR_EXTERNAL: frozenset({NodeKind.CHANGE_REQUEST, NodeKind.SERVICE}),
    RootCauseClass.INFRASTRUCTURE_CAPACITY: frozenset({NodeKind.SERVICE, NodeKind.DEPLOYMENT_EVENT, NodeKind.CHANGE_REQUEST}),
}

_KEYWORD_CLASSES = (
    RootCauseClass.PROCESS_MANAGEMENT,
    RootCauseClass.VENDOR_EXTERNAL,
    RootCauseClass.INFRASTRUCTURE_CAPACITY,
)


@dataclass(frozen=True)
class RecurrencePattern:
    category: str
    incidents: tuple[str, ...]

    @property
    def count(self) -> int:
        return len(self.incidents)

    def to_dict(self) -> dict:
        return {"category": self.category, "incidents": list(self.incidents), "count": self.count}

    @classmethod
    def from_dict(cls, d: Mapping) -> "RecurrencePattern":
        return cls(d["category"], tuple(d["incidents"]))


@dataclass(frozen=True)
class ClassifiedCause:
    incident: str
    cls: RootCauseClass
    rationale: str
    chain: WhyChain
    validated: bool = False


def detect_recurrence(signatures: Iterable[tuple[str, SymptomSignature]]) -> list[RecurrencePattern]:
    """Group incidents sharing a symptom category; groups of two or more recur."""
    groups: dict[str, set[str]] = defaultdict(set)
    for incident, sig in signatures:
        if sig.category != UNCATEGORIZED:
            groups[sig.category].add(incident)
    patterns = [RecurrencePattern(cat, tuple(sorted(ids))) for cat, ids in groups.items() if len(ids) >= 2]
    patterns.sort(key=lambda p: (-p.count, p.category))
    return patterns


def classify(
    chain: WhyChain,
    class_hint: str | RootCauseClass | None = None,
    class_keywords: Mapping[str, Sequence[str]] = DEFAULT_CLASS_KEYWORDS,
    automation_keywords: Sequence[str] = DEFAULT_AUTOMATION_KEYWORDS,
) -> tuple[RootCauseClass, str]:
    """Map a finished chain to a root-cause class.

    Rungs, first match wins:
      1. a backend hint whose required evidence kind is cited in the final step
      2. the final step cites a code file -> internal code defect
      3. automation keyword in the terminal cause and a change request cited
      4. keyword tables for process / vendor / capacity
      5. unknown

    Rungs 1-4 need a supported final step; with no evidence there is no class.
    """
    final = chain.final_step
    if final is None or not final.supported:
        return RootCauseClass.UNKNOWN, "rung 5: final step unsupported"
    cited_kinds = {kind_of(n) for n in final.cited}

    hint = class_hint if class_hint is not None else final.class_hint
    if hint is not None:
        try:
            hint_cls = RootCauseClass(hint) if not isinstance(hint, RootCauseClass) else hint
        except ValueError:
            hint_cls = None
        if hint_cls is not None and HINT_EVIDENCE.get(hint_cls, frozenset()) & cited_kinds:
            return hint_cls, f"rung 1: backend hint {hint_cls.value} backed by cited evidence"

    if NodeKind.CODE_FILE in cited_kinds:
        return RootCauseClass.INTERNAL_CODE_DEFECT, "rung 2: final step cites a code file"

    terminal = chain.terminal_cause
    auto = matching_keywords(terminal, automation_keywords)
    if auto and NodeKind.CHANGE_REQUEST in cited_kinds:
        return RootCauseClass.AUTOMATION_GAP, f"rung 3: automation keyword {auto[0]!r} with change request cited"

    best, best_hits = None, []
    for cls in _KEYWORD_CLASSES:
        hits = matching_keywords(terminal, class_keywords.get(cls.value, ()))
        if len(hits) > len(best_hits):
            best, best_hits = cls, hits
    if best is not None:
        return best, f"rung 4: keyword {best_hits[0]!r} maps to {best.value}"
    return RootCauseClass.UNKNOWN, "rung 5: no rule matched"


def validate_against_history(
    classified: ClassifiedCause,
    patterns: Iterable[RecurrencePattern],
    prior: Iterable[ClassifiedCause],
) -> bool:
    """True iff a recurrence pattern holds this incident and another incident
    previously classified with the same (known) class."""
    if classified.cls is RootCauseClass.UNKNOWN:
        return False
    prior_cls = {c.incident: c.cls for c in prior}
    for pattern in patterns:
        if classified.incident not in pattern.incidents:
            continue
        for peer in pattern.incidents:
            if peer != classified.incident and prior_cls.get(peer) is classified.cls:
                return True
    return False


def label_flag(label: str) -> str:
    """'internal', 'external' or 'neither' for an attribution label."""
    try:
        cls = RootCauseClass(label)
    except ValueError:
        return "neither"
    return "internal" if cls.internal else "external" if cls.external else "neither"


@dataclass
class AttributionShift:
    matrix: dict[str, dict[str, int]]
    internal_share_before: float
    internal_share_after: float
    before_defined: bool = True
    after_defined: bool = True
    # originally-external incidents (with a known new class) now classed internal
    external_reattributed: int = 0
    external_total: int = 0

    @property
    def external_to_internal_share(self) -> float:
        return self.external_reattributed / self.external_total if self.external_total else 0.0

    @property
    def total(self) -> int:
        return sum(sum(row.values()) for row in self.matrix.values())

    def to_dict(self) -> dict:
        return {
            "matrix": {k: dict(sorted(v.items())) for k, v in sorted(self.matrix.items())},
            "internal_share_before": self.internal_share_before,
            "internal_share_after": self.internal_share_after,
            "before_defined": self.before_defined,
            "after_defined": self.after_defined,
            "external_reattributed": self.external_reattributed,
            "external_total": self.external_total,
            "external_to_internal_share": self.external_to_internal_share,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttributionShift":
        return cls(
            {k: dict(v) for k, v in d["matrix"].items()},
            d["internal_share_before"],
            d["internal_share_after"],
            d["before_defined"],
            d["after_defined"],
            d["external_reattributed"],
            d["external_total"],
        )


def _share(labels: Iterable[str]) -> tuple[float, bool]:
    flags = [label_flag(lbl) for lbl in labels]
    known = [f for f in flags if f != "neither"]
    if not known:
        return 0.0, False
    return sum(f == "internal" for f in known) / len(known), True


def attribution_shift(incidents: Iterable[IncidentRecord], classified: Iterable[ClassifiedCause]) -> AttributionShift:
    """Compare original team labels with pipeline classes.

    Unknown labels on either side stay in the matrix but are left out of the
    share numerators and denominators; an undefined share is reported as 0
    with its ``*_defined`` flag cleared.
    """
    original = {i.node_id: i.original_attribution for i in incidents}
    matrix: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    before, after = [], []
    ext_total = ext_internal = 0
    for c in classified:
        if c.incident not in original:
            raise KeyError(f"no incident record for {c.incident}")
        label = original[c.incident]
        matrix[label][c.cls.value] += 1
        before.append(label)
        after.append(c.cls.value)
        if label_flag(label) == "external" and c.cls is not RootCauseClass.UNKNOWN:
            ext_total += 1
            ext_internal += c.cls.internal
    share_before, before_ok = _share(before)
    share_after, after_ok = _share(after)
    return AttributionShift(
        {k: dict(v) for k, v in matrix.items()},
        share_before,
        share_after,
        before_ok,
        after_ok,
        ext_internal,
        ext_total,
    )


@dataclass
class ParetoCut:
    ranked: list[tuple[str, int, float]]
    cut: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ranked": [list(r) for r in self.ranked], "cut": list(self.cut)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParetoCut":
        return cls([(r[0], int(r[1]), float(r[2])) for r in d["ranked"]], list(d["cut"]))


PARETO_THRESHOLD = Fraction(4, 5)


def pareto_rank(patterns: Sequence[RecurrencePattern] | Mapping[str, int]) -> ParetoCut:
    """Rank categories by incident count and take the shortest prefix that
    covers at least 80% of incidents. Accepts patterns or a category->count map.
    """
    if isinstance(patterns, Mapping):
        counts = dict(patterns)
    else:
        counts = {}
        for p in patterns:
            counts[p.category] = counts.get(p.category, 0) + p.count
    if not counts:
        raise EmptyInput("pareto_rank needs at least one pattern")
    if any(c <= 0 for c in counts.values()):
        raise ValueError("pattern counts must be positive")
    order = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    total = sum(counts.values())
    ranked, cut = [], []
    running = 0
    for category, count in order:
        if not cut or Fraction(running, total) < PARETO_THRESHOLD:
            cut.append(category)
        running += count
        ranked.append((category, count, float(Fraction(running, total))))
    return ParetoCut(ranked, cut)
