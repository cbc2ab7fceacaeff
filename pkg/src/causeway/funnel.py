"""The funnel: symptoms, evidence retrieval and the iterative Five Whys loop.

Each iteration acts (retrieves graph evidence for the current hypothesis)
and then reasons (asks the backend for the next cause). Citations the
backend makes to nodes it was not shown are stripped before the step is
recorded.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

from ._text import matching_keywords, tokenize
from .config import FunnelConfig
from .graph import KnowledgeGraph, NodeKind, kind_of
from .ingest import IncidentRecord

logger = logging.getLogger(__name__)

SNIPPET_CHARS = 200
UNCATEGORIZED = "uncategorized"
NO_SUPPORTED_CAUSE = "no supported cause"
ACTIONABLE_KINDS = frozenset({NodeKind.CODE_FILE, NodeKind.CHANGE_REQUEST})


class BackendUnavailable(RuntimeError):
    """The reasoning backend could not be reached."""


class Termination(Enum):
    ACTIONABLE_CAUSE_FOUND = "ActionableCauseFound"
    MAX_DEPTH_REACHED = "MaxDepthReached"
    NO_SUPPORTED_CAUSE = "NoSupportedCause"


@dataclass(frozen=True)
class SymptomSignature:
    tags: tuple[str, ...]
    service: str
    category: str

    def to_dict(self) -> dict:
        return {"tags": list(self.tags), "service": self.service, "category": self.category}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SymptomSignature":
        return cls(tuple(d["tags"]), d["service"], d["category"])


@dataclass(frozen=True)
class EvidenceRef:
    node: str
    snippet: str
    score: float
    hop_distance: int

    def to_wire(self) -> dict:
        return {"node": self.node, "snippet": self.snippet, "score": self.score, "hop": self.hop_distance}


@dataclass(frozen=True)
class ReasoningRequest:
    incident_summary: str
    prior_steps: tuple[tuple[str, str], ...]
    evidence: tuple[EvidenceRef, ...]
    depth: int

    def __post_init__(self) -> None:
        if self.depth != len(self.prior_steps) + 1:
            raise ValueError("depth must equal len(prior_steps) + 1")

    def to_wire(self) -> dict:
        return {
            "incident_summary": self.incident_summary,
            "prior_steps": [{"question": q, "cause": c} for q, c in self.prior_steps],
            "evidence": [e.to_wire() for e in self.evidence],
            "depth": self.depth,
        }


@dataclass(frozen=True)
class ReasoningResponse:
    cause: str
    cited: tuple[str, ...] = ()
    actionable_hint: bool = False
    class_hint: str | None = None


class ReasoningBackend(Protocol):
    def propose(self, request: ReasoningRequest) -> ReasoningResponse: ...


@dataclass(frozen=True)
class WhyStep:
    depth: int
    question: str
    cause: str
    cited: tuple[str, ...]
    supported: bool
    actionable_hint: bool = False
    class_hint: str | None = None

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "question": self.question,
            "cause": self.cause,
            "cited": list(self.cited),
            "supported": self.supported,
            "actionable_hint": self.actionable_hint,
            "class_hint": self.class_hint,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "WhyStep":
        return cls(
            int(d["depth"]),
            d["question"],
            d["cause"],
            tuple(d["cited"]),
            bool(d["supported"]),
            bool(d.get("actionable_hint", False)),
            d.get("class_hint"),
        )


@dataclass(frozen=True)
class WhyChain:
    incident: str
    steps: tuple[WhyStep, ...]
    terminal_cause: str
    termination: Termination
    aborted: bool = False

    def to_dict(self) -> dict:
        return {
            "incident": self.incident,
            "steps": [s.to_dict() for s in self.steps],
            "terminal_cause": self.terminal_cause,
            "termination": self.termination.value,
            "aborted": self.aborted,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: Mapping) -> "WhyChain":
        return cls(
            d["incident"],
            tuple(WhyStep.from_dict(s) for s in d["steps"]),
            d["terminal_cause"],
            Termination(d["termination"]),
            bool(d.get("aborted", False)),
        )

    @property
    def final_step(self) -> WhyStep | None:
        return self.steps[-1] if self.steps else None


def extract_symptoms(incident: IncidentRecord, taxonomy: Mapping[str, Sequence[str]]) -> SymptomSignature:
    """Tag an incident with every taxonomy keyword in its description.

    The category is the one with the most keyword hits (ties go to the
    alphabetically first name), or ``"uncategorized"`` with no hits.
    """
    if not taxonomy:
        raise ValueError("taxonomy needs at least one category")
    tags: set[str] = set()
    best, best_hits = UNCATEGORIZED, 0
    for category in sorted(taxonomy):
        found = matching_keywords(incident.description, taxonomy[category])
        tags.update(found)
        if len(found) > best_hits:
            best, best_hits = category, len(found)
    return SymptomSignature(tuple(sorted(tags)), incident.service, best)


def categorize(text: str, taxonomy: Mapping[str, Sequence[str]]) -> str:
    probe = IncidentRecord(id="_", opened_ts=1, service="", description=text)
    return extract_symptoms(probe, taxonomy).category


def retrieve_evidence(
    graph: KnowledgeGraph,
    incident: str,
    hypothesis: str,
    config: FunnelConfig | None = None,
) -> list[EvidenceRef]:
    """Score the incident's k-hop neighbourhood against ``hypothesis``.

    Ordering is score desc, hop asc, timestamp desc (absent last), id asc.
    """
    config = config or FunnelConfig()
    hops = dict(graph.k_hop(incident, config.evidence_hops))
    terms = set(tokenize(hypothesis))
    if not hops or not terms:
        return []
    scored = graph.text_search(terms, candidates=hops)

    def order(hit: tuple[str, int]) -> tuple:
        node = graph.node(hit[0])
        ts = node.timestamp
        return (-hit[1], hops[hit[0]], ts is None, -(ts or 0), hit[0])

    scored.sort(key=order)
    return [
        EvidenceRef(nid, graph.node(nid).text[:SNIPPET_CHARS], float(score), hops[nid])
        for nid, score in scored[: config.evidence_top_n]
    ]


def _question(request: ReasoningRequest) -> str:
    subject = request.prior_steps[-1][1] if request.prior_steps else request.incident_summary
    return f"Why: {subject}?"


def next_why(backend: ReasoningBackend, request: ReasoningRequest) -> WhyStep:
    """Ask the backend for the next cause and apply the hallucination guard.

    Citations outside ``request.evidence`` are dropped (and logged). The step
    is returned even when nothing supports it.
    """
    response = backend.propose(request)
    offered = {e.node for e in request.evidence}
    cited: list[str] = []
    for nid in response.cited:
        if nid not in offered:
            logger.warning("depth %d: dropped citation %r not present in offered evidence", request.depth, nid)
        elif nid not in cited:
            cited.append(nid)
    return WhyStep(
        depth=request.depth,
        question=_question(request),
        cause=response.cause,
        cited=tuple(cited),
        supported=bool(cited),
        actionable_hint=response.actionable_hint,
        class_hint=response.class_hint,
    )


def is_actionable(step: WhyStep) -> bool:
    return step.supported and any(kind_of(n) in ACTIONABLE_KINDS for n in step.cited)


def run_funnel(
    graph: KnowledgeGraph,
    incident: IncidentRecord,
    backend: ReasoningBackend,
    config: FunnelConfig | None = None,
) -> WhyChain:
    """Run the Five Whys loop for one incident.

    Stops on the first supported step citing a code file or change request
    (ActionableCauseFound), on the first unsupported step (NoSupportedCause),
    or after ``config.max_depth`` steps (MaxDepthReached). A backend outage
    ends the chain with an unsupported placeholder step and ``aborted=True``.
    """
    config = config or FunnelConfig()
    node_id = incident.node_id
    graph.node(node_id)
    steps: list[WhyStep] = []
    hypothesis = incident.description
    termination = Termination.MAX_DEPTH_REACHED
    aborted = False
    for depth in range(1, config.max_depth + 1):
        evidence = retrieve_evidence(graph, node_id, hypothesis, config)
        request = ReasoningRequest(
            incident_summary=incident.description,
            prior_steps=tuple((s.question, s.cause) for s in steps),
            evidence=tuple(evidence),
            depth=depth,
        )
        try:
            step = next_why(backend, request)
        except BackendUnavailable as exc:
            logger.error("backend unavailable at depth %d for %s: %s", depth, node_id, exc)
            steps.append(WhyStep(depth, _question(request), f"backend unavailable: {exc}", (), False))
            termination = Termination.NO_SUPPORTED_CAUSE
            aborted = True
            break
        steps.append(step)
        if not step.supported:
            termination = Termination.NO_SUPPORTED_CAUSE
            break
        if is_actionable(step):
            termination = Termination.ACTIONABLE_CAUSE_FOUND
            break
        hypothesis = step.cause
    return WhyChain(node_id, tuple(steps), steps[-1].cause, termination, aborted)


def replay_hypotheses(incident: IncidentRecord, chain: WhyChain) -> list[str]:
    """The hypothesis each step's evidence was retrieved for."""
    return [incident.description] + [s.cause for s in chain.steps[:-1]]
