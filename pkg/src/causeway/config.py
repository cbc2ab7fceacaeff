"""Analysis configuration: funnel parameters, keyword tables and rule table.

A config file is a single JSON object; every key is optional and falls back
to the defaults below::

    {"max_depth": 5, "evidence_hops": 2, "evidence_top_n": 10,
     "symptom_taxonomy": {"deadlock": ["deadlock", "locks"]},
     "class_keywords": {"vendor-external": ["vendor"]},
     "automation_keywords": ["automation", "manual", "script"],
     "rules": [...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

DEFAULT_SYMPTOM_TAXONOMY: dict[str, tuple[str, ...]] = {
    "long-running-sql": ("long-running", "sql", "query", "queries", "slow query", "query optimization"),
    "deadlock": ("deadlock", "deadlocks", "locks", "lock wait", "lock contention"),
    "storage-exhaustion": ("storage", "disk", "space", "tablespace", "capacity monitoring", "disk full"),
    "backup-failure": ("backup", "backups", "restore", "disaster recovery"),
}

DEFAULT_AUTOMATION_KEYWORDS: tuple[str, ...] = ("automation", "manual", "script")

# rung 4 of the classification ladder; checked in this order on ties
DEFAULT_CLASS_KEYWORDS: dict[str, tuple[str, ...]] = {
    "process-management": ("process", "approval", "procedure", "governance", "management", "handover"),
    "vendor-external": ("vendor", "supplier", "third-party", "upstream provider", "external"),
    "infrastructure-capacity": ("capacity", "quota", "memory", "cpu", "storage", "disk"),
}

# First matching row wins. "kinds": evidence kinds that must be present;
# "cite": kinds to cite (top-ranked evidence node of each); "keyword":
# optional phrase the cited evidence must contain.
DEFAULT_RULES: tuple[dict[str, Any], ...] = (
    {
        "category": "deadlock",
        "kinds": ["ChangeRequest"],
        "depth": [1, 5],
        "cause": "missing lock-ordering fix",
        "cite": ["ChangeRequest", "CodeFile"],
        "actionable": True,
        "class_hint": "internal-code-defect",
    },
    {
        "category": "*",
        "kinds": ["ChangeRequest"],
        "keyword": "automation",
        "depth": [2, 5],
        "cause": "lack of automation",
        "cite": ["ChangeRequest"],
        "actionable": True,
        "class_hint": "automation-gap",
    },
    {
        "category": "*",
        "kinds": ["CodeFile"],
        "depth": [2, 5],
        "cause": "code defect in {cited}",
        "cite": ["CodeFile", "ChangeRequest"],
        "actionable": True,
        "class_hint": "internal-code-defect",
    },
    {
        "category": "*",
        "kinds": ["ChangeRequest"],
        "depth": [2, 5],
        "cause": "{cited}",
        "cite": ["ChangeRequest"],
        "actionable": True,
    },
    {
        "category": "*",
        "kinds": ["Service"],
        "depth": [1, 1],
        "cause": "service delays on {cited}",
        "cite": ["Service"],
        "actionable": False,
    },
)


@dataclass
class FunnelConfig:
    max_depth: int = 5
    evidence_hops: int = 2
    evidence_top_n: int = 10
    symptom_taxonomy: dict[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_SYMPTOM_TAXONOMY))
    class_keywords: dict[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_CLASS_KEYWORDS))
    automation_keywords: tuple[str, ...] = DEFAULT_AUTOMATION_KEYWORDS
    rules: tuple[dict[str, Any], ...] = DEFAULT_RULES

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.evidence_top_n < 1:
            raise ValueError("evidence_top_n must be >= 1")
        if self.evidence_hops < 0:
            raise ValueError("evidence_hops must be >= 0")
        if not self.symptom_taxonomy:
            raise ValueError("symptom_taxonomy needs at least one category")
        self.symptom_taxonomy = {k: tuple(v) for k, v in self.symptom_taxonomy.items()}
        self.class_keywords = {k: tuple(v) for k, v in self.class_keywords.items()}
        self.automation_keywords = tuple(self.automation_keywords)
        self.rules = tuple(self.rules)

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_depth": self.max_depth,
            "evidence_hops": self.evidence_hops,
            "evidence_top_n": self.evidence_top_n,
            "symptom_taxonomy": {k: list(v) for k, v in sorted(self.symptom_taxonomy.items())},
            "class_keywords": {k: list(v) for k, v in self.class_keywords.items()},
            "automation_keywords": list(self.automation_keywords),
            "rules": [dict(r) for r in self.rules],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FunnelConfig":
        known = {"max_depth", "evidence_hops", "evidence_top_n", "symptom_taxonomy", "class_keywords", "automation_keywords", "rules"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def load_config(path: str | Path | None) -> FunnelConfig:
    if path is None:
        return FunnelConfig()
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must contain a JSON object")
    return FunnelConfig.from_dict(data)
