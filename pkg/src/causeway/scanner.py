"""Cross-project defect pattern scanner.

A corpus is a directory whose first-level subdirectories are projects. Rules
are line-oriented text matchers (literal or regex) restricted by a path glob
relative to the project root. Scanning is read-only and its output does not
depend on the worker count.
"""

from __future__ import annotations

import json
import os
import re
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from pathlib import Path, PurePosixPath

from ._text import tokenize
from .funnel import Termination, WhyChain
from .graph import EdgeKind, KnowledgeGraph, NodeKind, kind_of

BINARY_SNIFF_BYTES = 8192
MIN_DRAFT_TOKEN = 4

# dropped from auto-drafted matchers
STOPWORDS = frozenset(
    """
    about above after again against also because been before being below between both
    does doing down during each from further have having here into itself more most
    once only other over same should some such than that their them then there these
    they this those through under until very were what when where which while with
    would your cause caused causes
    """.split()
)


class ScanError(Exception):
    pass


class InvalidPattern(ScanError):
    def __init__(self, message: str, offset: int | None = None) -> None:
        super().__init__(message if offset is None else f"{message} (at offset {offset})")
        self.offset = offset


class NotActionable(ScanError):
    pass


class UnconfirmedRule(ScanError):
    pass


class Mode(Enum):
    ALL_OF = "all"
    ANY_OF = "any"


@dataclass(frozen=True)
class Matcher:
    kind: str  # "literal" | "regex"
    pattern: str

    def __post_init__(self) -> None:
        if self.kind not in ("literal", "regex"):
            raise InvalidPattern(f"matcher kind must be 'literal' or 'regex', got {self.kind!r}")
        if not self.pattern:
            raise InvalidPattern("empty matcher pattern")
        if self.kind == "regex":
            _compile(self.pattern)

    def hits(self, line: str) -> bool:
        if self.kind == "literal":
            return self.pattern in line
        return _compile(self.pattern).search(line) is not None


@lru_cache(maxsize=1024)
def _compile(pattern: str) -> re.Pattern:
    try:
        return re.compile(pattern)
    except re.error as exc:
        raise InvalidPattern(f"invalid regex {pattern!r}: {exc.msg}", exc.pos) from None


@dataclass(frozen=True)
class ScanRule:
    id: str
    matchers: tuple[Matcher, ...]
    mode: Mode = Mode.ANY_OF
    file_glob: str = "**/*"
    description: str = ""
    confirmed: bool = True

    def __post_init__(self) -> None:
        if not self.matchers:
            raise InvalidPattern(f"rule {self.id!r} has no matchers")

    def confirm(self) -> "ScanRule":
        return replace(self, confirmed=True)

    def applies_to(self, rel_path: str) -> bool:
        return _glob_regex(self.file_glob).fullmatch(rel_path) is not None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "description": self.description,
            "mode": self.mode.value,
            "glob": self.file_glob,
            "matchers": [{"kind": m.kind, "pattern": m.pattern} for m in self.matchers],
        }


@lru_cache(maxsize=256)
def _glob_regex(glob: str) -> re.Pattern:
    """Translate a path glob (``**``, ``*``, ``?``) to a regex over posix paths."""
    i, out = 0, []
    while i < len(glob):
        if glob.startswith("**/", i):
            out.append("(?:.*/)?")
            i += 3
        elif glob.startswith("**", i):
            out.append(".*")
            i += 2
        elif glob[i] == "*":
            out.append("[^/]*")
            i += 1
        elif glob[i] == "?":
            out.append("[^/]")
            i += 1
        else:
            out.append(re.escape(glob[i]))
            i += 1
    return re.compile("".join(out))


def compile_rule(spec: str | dict) -> ScanRule:
    """Build a rule from one rule-file line (or its decoded object)."""
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise InvalidPattern(f"rule is not valid JSON: {exc.msg}", exc.pos) from None
    if not isinstance(spec, dict):
        raise InvalidPattern("rule must be an object")
    try:
        rule_id = spec["id"]
        raw = spec["matchers"]
    except KeyError as exc:
        raise InvalidPattern(f"rule missing field {exc.args[0]!r}") from None
    if not isinstance(raw, list):
        raise InvalidPattern("matchers must be a list")
    matchers = []
    for m in raw:
        if isinstance(m, str):
            m = {"kind": "literal", "pattern": m}
        matchers.append(Matcher(m.get("kind", "literal"), m.get("pattern", "")))
    try:
        mode = Mode(spec.get("mode", "any"))
    except ValueError:
        raise InvalidPattern(f"mode must be 'all' or 'any', got {spec.get('mode')!r}") from None
    return ScanRule(
        id=str(rule_id),
        matchers=tuple(matchers),
        mode=mode,
        file_glob=spec.get("glob", "**/*"),
        description=spec.get("description", ""),
    )


def load_rules(path: str | Path) -> list[ScanRule]:
    rules = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rules.append(compile_rule(line))
            except InvalidPattern as exc:
                raise InvalidPattern(f"{path}:{lineno}: {exc}", exc.offset) from None
    return rules


def rule_from_chain(chain: WhyChain, graph: KnowledgeGraph) -> ScanRule:
    """Draft a literal AnyOf rule from an actionable chain's terminal cause.

    The glob comes from the extension of the code file the final step cites,
    or failing that a file touched by a cited change request. Drafts come
    back unconfirmed and must be confirmed before scanning.
    """
    final = chain.final_step
    if chain.termination is not Termination.ACTIONABLE_CAUSE_FOUND or final is None:
        raise NotActionable(f"{chain.incident}: chain ended {chain.termination.value}")
    files = [n for n in final.cited if kind_of(n) is NodeKind.CODE_FILE]
    if not files:
        for n in final.cited:
            if kind_of(n) is NodeKind.CHANGE_REQUEST and n in graph:
                files.extend(graph.successors(n, EdgeKind.TOUCHES))
    if not files:
        raise NotActionable(f"{chain.incident}: no code file cited or touched")
    tokens = []
    for tok in tokenize(chain.terminal_cause):
        if len(tok) >= MIN_DRAFT_TOKEN and tok not in STOPWORDS and tok not in tokens:
            tokens.append(tok)
    if not tokens:
        raise NotActionable(f"{chain.incident}: terminal cause has no usable tokens")
    suffix = PurePosixPath(files[0].split(":", 1)[1]).suffix
    return ScanRule(
        id=f"draft-{chain.incident.split(':', 1)[1]}",
        matchers=tuple(Matcher("literal", t) for t in tokens),
        mode=Mode.ANY_OF,
        file_glob=f"**/*{suffix}" if suffix else "**/*",
        description=f"drafted from {chain.incident}: {chain.terminal_cause}",
        confirmed=False,
    )


@dataclass(frozen=True)
class ScanMatch:
    project: str
    path: str
    lines: tuple[int, ...]
    rule: str

    def to_dict(self) -> dict:
        return {"project": self.project, "path": self.path, "lines": list(self.lines), "rule": self.rule}


@dataclass
class ScanSummary:
    total_projects: int = 0
    matched_projects: int = 0
    matched_files: int = 0
    per_rule: dict[str, tuple[int, int]] = field(default_factory=dict)
    skipped_binary: int = 0
    skipped: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "total_projects": self.total_projects,
            "matched_projects": self.matched_projects,
            "matched_files": self.matched_files,
            "per_rule": {k: list(v) for k, v in sorted(self.per_rule.items())},
            "skipped_binary": self.skipped_binary,
            "skipped": [list(s) for s in self.skipped],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScanSummary":
        return cls(
            d["total_projects"],
            d["matched_projects"],
            d["matched_files"],
            {k: tuple(v) for k, v in d["per_rule"].items()},
            d.get("skipped_binary", 0),
            [tuple(s) for s in d.get("skipped", [])],
        )


def _list_files(root: Path) -> tuple[list[str], list[tuple[str, str]]]:
    projects = sorted(p.name for p in root.iterdir() if p.is_dir())
    files = []
    for project in projects:
        base = root / project
        for dirpath, dirnames, filenames in os.walk(base):
            dirnames.sort()
            rel_dir = Path(dirpath).relative_to(base).as_posix()
            for name in sorted(filenames):
                rel = name if rel_dir == "." else f"{rel_dir}/{name}"
                files.append((project, rel))
    return projects, files


def _scan_file(root: Path, project: str, rel: str, rules: Sequence[ScanRule]):
    """Returns (matches, status) where status is None, 'binary' or an error message."""
    applicable = [r for r in rules if r.applies_to(rel)]
    if not applicable:
        return [], None
    try:
        data = (root / project / rel).read_bytes()
    except OSError as exc:
        return [], f"unreadable: {exc.strerror or exc}"
    if b"\x00" in data[:BINARY_SNIFF_BYTES]:
        return [], "binary"
    lines = data.decode("utf-8", errors="replace").splitlines()
    matches = []
    for rule in applicable:
        hit_lines: set[int] = set()
        hit_matchers: set[int] = set()
        for lineno, line in enumerate(lines, 1):
            for mi, m in enumerate(rule.matchers):
                if m.hits(line):
                    hit_lines.add(lineno)
                    hit_matchers.add(mi)
        ok = len(hit_matchers) == len(rule.matchers) if rule.mode is Mode.ALL_OF else bool(hit_matchers)
        if ok:
            matches.append(ScanMatch(project, rel, tuple(sorted(hit_lines)), rule.id))
    return matches, None


def scan_corpus(
    corpus_root: str | Path,
    rules: Iterable[ScanRule],
    parallelism: int = 1,
) -> tuple[list[ScanMatch], ScanSummary]:
    """Scan every project under ``corpus_root`` with ``rules``.

    Matches are sorted by (project, path, rule id) whatever the worker count.
    Unreadable files go to ``summary.skipped``; binary files (a NUL byte in
    the first 8 KiB) are counted in ``summary.skipped_binary``.
    """
    root = Path(corpus_root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus root not found: {root}")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    rules = list(rules)
    unconfirmed = [r.id for r in rules if not r.confirmed]
    if unconfirmed:
        raise UnconfirmedRule(f"draft rules need confirmation before scanning: {unconfirmed}")
    ids = [r.id for r in rules]
    if len(set(ids)) != len(ids):
        raise ScanError("duplicate rule ids")

    projects, files = _list_files(root)
    summary = ScanSummary(total_projects=len(projects))
    if not rules:
        return [], summary

    if parallelism == 1:
        results = [_scan_file(root, p, f, rules) for p, f in files]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(lambda pf: _scan_file(root, pf[0], pf[1], rules), files))

    matches: list[ScanMatch] = []
    for (project, rel), (found, status) in zip(files, results):
        matches.extend(found)
        if status == "binary":
            summary.skipped_binary += 1
        elif status is not None:
            summary.skipped.append((f"{project}/{rel}", status))
    matches.sort(key=lambda m: (m.project, m.path, m.rule))

    summary.matched_projects = len({m.project for m in matches})
    summary.matched_files = len({(m.project, m.path) for m in matches})
    for rule in rules:
        own = [m for m in matches if m.rule == rule.id]
        summary.per_rule[rule.id] = (len({m.project for m in own}), len({(m.project, m.path) for m in own}))
    return matches, summary


def write_scan_report(path: str | Path, matches: Sequence[ScanMatch], summary: ScanSummary) -> None:
    """One JSON object per line: every match, then the summary."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for m in matches:
            fh.write(json.dumps({"record": "match", **m.to_dict()}, separators=(",", ":")) + "\n")
        fh.write(json.dumps({"record": "summary", **summary.to_dict()}, separators=(",", ":")) + "\n")


def read_scan_report(path: str | Path) -> tuple[list[ScanMatch], ScanSummary]:
    matches, summary = [], None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            kind = d.pop("record")
            if kind == "match":
                matches.append(ScanMatch(d["project"], d["path"], tuple(d["lines"]), d["rule"]))
            elif kind == "summary":
                summary = ScanSummary.from_dict(d)
    if summary is None:
        raise ScanError(f"{path}: no summary record")
    return matches, summary
