"""Reasoning backends: a deterministic rule table and a remote HTTP endpoint."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import urllib.error
import urllib.request
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any

from ._text import contains_phrase, tokenize
from .config import DEFAULT_RULES, DEFAULT_SYMPTOM_TAXONOMY
from .funnel import (
    NO_SUPPORTED_CAUSE,
    BackendUnavailable,
    EvidenceRef,
    ReasoningRequest,
    ReasoningResponse,
    categorize,
)
from .graph import InvalidNodeId, NodeKind, kind_of

logger = logging.getLogger(__name__)

TOKEN_ENV = "CAUSEWAY_BACKEND_TOKEN"


@dataclass(frozen=True)
class Rule:
    category: str
    kinds: frozenset[NodeKind]
    min_depth: int
    max_depth: int
    cause: str
    cite: tuple[NodeKind, ...]
    actionable: bool = False
    keyword: str | None = None
    class_hint: str | None = None

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Rule":
        lo, hi = d.get("depth", [1, 5])
        return cls(
            category=d.get("category", "*"),
            kinds=frozenset(NodeKind(k) for k in d.get("kinds", [])),
            min_depth=int(lo),
            max_depth=int(hi),
            cause=d["cause"],
            cite=tuple(NodeKind(k) for k in d.get("cite", [])),
            actionable=bool(d.get("actionable", False)),
            keyword=d.get("keyword"),
            class_hint=d.get("class_hint"),
        )


def _evidence_kind(ref: EvidenceRef) -> NodeKind | None:
    try:
        return kind_of(ref.node)
    except InvalidNodeId:
        return None


class RuleBackend:
    """Deterministic stand-in for a language model.

    Rows are tried in order; the first whose category, depth range, required
    evidence kinds and keyword all match produces the response. Requests no
    row matches get the unsupported fallback, so the backend is total.
    """

    def __init__(
        self,
        rules: Iterable[Mapping[str, Any] | Rule] = DEFAULT_RULES,
        taxonomy: Mapping[str, Sequence[str]] = DEFAULT_SYMPTOM_TAXONOMY,
    ) -> None:
        self.rules = tuple(r if isinstance(r, Rule) else Rule.from_dict(r) for r in rules)
        self.taxonomy = dict(taxonomy)

    def propose(self, request: ReasoningRequest) -> ReasoningResponse:
        category = categorize(request.incident_summary, self.taxonomy)
        for rule in self.rules:
            response = self._apply(rule, category, request)
            if response is not None:
                return response
        return ReasoningResponse(NO_SUPPORTED_CAUSE)

    def _apply(self, rule: Rule, category: str, request: ReasoningRequest) -> ReasoningResponse | None:
        if rule.category not in ("*", category):
            return None
        if not rule.min_depth <= request.depth <= rule.max_depth:
            return None
        pool = list(request.evidence)
        if rule.keyword:
            pool = [e for e in pool if contains_phrase(tokenize(e.snippet), rule.keyword)]
        present = {_evidence_kind(e) for e in pool}
        if not rule.kinds <= present:
            return None
        cited: list[EvidenceRef] = []
        for kind in rule.cite:
            ref = next((e for e in pool if _evidence_kind(e) is kind), None)
            if ref is not None:
                cited.append(ref)
        if not cited:
            return None
        cause = rule.cause.format(cited=cited[0].snippet, category=category, depth=request.depth)
        return ReasoningResponse(cause, tuple(e.node for e in cited), rule.actionable, rule.class_hint)


def deterministic_backend(rule_table: Iterable[Mapping[str, Any]] = DEFAULT_RULES, taxonomy=DEFAULT_SYMPTOM_TAXONOMY) -> RuleBackend:
    return RuleBackend(rule_table, taxonomy)


def parse_response(payload: Any) -> ReasoningResponse:
    """Validate a wire response; raises ValueError when malformed."""
    if not isinstance(payload, dict):
        raise ValueError("response is not an object")
    cause = payload.get("cause")
    cited = payload.get("cited", [])
    if not isinstance(cause, str):
        raise ValueError("response.cause must be a string")
    if not isinstance(cited, list) or not all(isinstance(c, str) for c in cited):
        raise ValueError("response.cited must be a list of node ids")
    hint = payload.get("class_hint")
    if hint is not None and not isinstance(hint, str):
        raise ValueError("response.class_hint must be a string or null")
    return ReasoningResponse(cause, tuple(cited), bool(payload.get("actionable_hint", False)), hint)


Transport = Callable[[str, bytes, Mapping[str, str], float], bytes]


def _urllib_transport(url: str, body: bytes, headers: Mapping[str, str], timeout: float) -> bytes:
    req = urllib.request.Request(url, data=body, headers=dict(headers), method="POST")
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return resp.read()


class RemoteBackend:
    """Sends one POST per why-step to a model endpoint.

    Transport failures are retried ``attempts`` times with exponential
    backoff before BackendUnavailable is raised. A malformed reply becomes an
    unsupported step rather than an error.
    """

    def __init__(
        self,
        endpoint: str,
        token: str | None = None,
        *,
        attempts: int = 3,
        backoff: float = 1.0,
        timeout: float = 30.0,
        max_in_flight: int = 4,
        transport: Transport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if attempts < 1:
            raise ValueError("attempts must be >= 1")
        self.endpoint = endpoint
        self.token = token if token is not None else os.environ.get(TOKEN_ENV)
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self._transport = transport or _urllib_transport
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def propose(self, request: ReasoningRequest) -> ReasoningResponse:
        body = json.dumps(request.to_wire()).encode("utf-8")
        last: Exception | None = None
        raw = None
        for attempt in range(self.attempts):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    raw = self._transport(self.endpoint, body, self._headers(), self.timeout)
                break
            except (urllib.error.URLError, OSError, TimeoutError) as exc:
                last = exc
                logger.warning("backend attempt %d/%d failed: %s", attempt + 1, self.attempts, exc)
        else:
            raise BackendUnavailable(f"{self.attempts} attempts failed: {last}")
        try:
            return parse_response(json.loads(raw))
        except (ValueError, UnicodeDecodeError) as exc:
            logger.warning("malformed backend response: %s", exc)
            return ReasoningResponse(f"malformed backend response: {exc}")


def remote_backend(endpoint: str, auth_token: str | None = None, **kwargs) -> RemoteBackend:
    return RemoteBackend(endpoint, auth_token, **kwargs)
