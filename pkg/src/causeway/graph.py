"""Typed property graph over SDLC artifacts.

The graph is the evidence base for every analysis stage. It is built by a
single writer, sealed, and then only read. Traversal treats edges as
undirected; every ordering is broken by node id so results are reproducible.
"""

from __future__ import annotations

import json
from collections import deque
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType

from ._text import token_set

__all__ = [
    "NodeKind",
    "EdgeKind",
    "Node",
    "Edge",
    "KnowledgeGraph",
    "GraphError",
    "DuplicateIdConflict",
    "KindPrefixMismatch",
    "MissingEndpoint",
    "DomainRangeViolation",
    "UnknownNode",
    "GraphSealed",
    "InvalidNodeId",
    "make_id",
    "kind_of",
]


class GraphError(Exception):
    """Base class for graph construction and query errors."""


class DuplicateIdConflict(GraphError):
    pass


class KindPrefixMismatch(GraphError):
    pass


class InvalidNodeId(GraphError):
    pass


class MissingEndpoint(GraphError):
    pass


class DomainRangeViolation(GraphError):
    pass


class UnknownNode(GraphError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class GraphSealed(GraphError):
    pass


class NodeKind(Enum):
    INCIDENT = "Incident"
    CHANGE_REQUEST = "ChangeRequest"
    CODE_FILE = "CodeFile"
    PROJECT = "Project"
    SERVICE = "Service"
    DEPLOYMENT_EVENT = "DeploymentEvent"
    TEAM = "Team"
    REQUIREMENT = "Requirement"

    @property
    def prefix(self) -> str:
        return _PREFIX[self]


_PREFIX = {
    NodeKind.INCIDENT: "inc",
    NodeKind.CHANGE_REQUEST: "chg",
    NodeKind.CODE_FILE: "file",
    NodeKind.PROJECT: "proj",
    NodeKind.SERVICE: "svc",
    NodeKind.DEPLOYMENT_EVENT: "dep",
    NodeKind.TEAM: "team",
    NodeKind.REQUIREMENT: "req",
}
_KIND_BY_PREFIX = {p: k for k, p in _PREFIX.items()}


class EdgeKind(Enum):
    AFFECTS = "AFFECTS"
    RESOLVED_BY = "RESOLVED_BY"
    TOUCHES = "TOUCHES"
    BELONGS_TO = "BELONGS_TO"
    DEPLOYS = "DEPLOYS"
    OWNED_BY = "OWNED_BY"
    DEPENDS_ON = "DEPENDS_ON"
    IMPLEMENTS = "IMPLEMENTS"

    @property
    def domain(self) -> NodeKind:
        return _DOMAIN_RANGE[self][0]

    @property
    def range(self) -> NodeKind:
        return _DOMAIN_RANGE[self][1]


_DOMAIN_RANGE = {
    EdgeKind.AFFECTS: (NodeKind.INCIDENT, NodeKind.SERVICE),
    EdgeKind.RESOLVED_BY: (NodeKind.INCIDENT, NodeKind.CHANGE_REQUEST),
    EdgeKind.TOUCHES: (NodeKind.CHANGE_REQUEST, NodeKind.CODE_FILE),
    EdgeKind.BELONGS_TO: (NodeKind.CODE_FILE, NodeKind.PROJECT),
    EdgeKind.DEPLOYS: (NodeKind.DEPLOYMENT_EVENT, NodeKind.CHANGE_REQUEST),
    EdgeKind.OWNED_BY: (NodeKind.SERVICE, NodeKind.TEAM),
    EdgeKind.DEPENDS_ON: (NodeKind.SERVICE, NodeKind.SERVICE),
    EdgeKind.IMPLEMENTS: (NodeKind.CHANGE_REQUEST, NodeKind.REQUIREMENT),
}


def kind_of(node_id: str) -> NodeKind:
    """Kind implied by a node id's prefix. Raises InvalidNodeId if malformed."""
    if node_id.count(":") != 1:
        raise InvalidNodeId(f"node id must contain exactly one ':': {node_id!r}")
    prefix, local = node_id.split(":")
    if not local:
        raise InvalidNodeId(f"empty local id: {node_id!r}")
    try:
        return _KIND_BY_PREFIX[prefix]
    except KeyError:
        raise InvalidNodeId(f"unknown kind prefix {prefix!r} in {node_id!r}") from None


def make_id(kind: NodeKind, local_id: str) -> str:
    node_id = f"{kind.prefix}:{local_id}"
    kind_of(node_id)
    return node_id


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    text: str = ""
    timestamp: int | float | None = None
    attrs: Mapping[str, str] = field(default_factory=dict)
    stub: bool = False

    def __post_init__(self) -> None:
        # freeze attrs so a sealed graph cannot be mutated through a node
        object.__setattr__(self, "attrs", MappingProxyType(dict(self.attrs)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Node):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self.id)

    def _key(self) -> tuple:
        return (self.id, self.kind, self.text, self.timestamp, dict(self.attrs), self.stub)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "ts": self.timestamp,
            "text": self.text,
            "attrs": dict(sorted(self.attrs.items())),
            "stub": self.stub,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Node":
        return cls(
            id=d["id"],
            kind=NodeKind(d["kind"]),
            text=d.get("text", ""),
            timestamp=d.get("ts"),
            attrs=d.get("attrs") or {},
            stub=bool(d.get("stub", False)),
        )


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: EdgeKind
    weight: float = 1.0

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.src, self.dst, self.kind.value)

    def to_dict(self) -> dict:
        return {"src": self.src, "dst": self.dst, "kind": self.kind.value, "weight": self.weight}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Edge":
        return cls(d["src"], d["dst"], EdgeKind(d["kind"]), float(d.get("weight", 1.0)))


class KnowledgeGraph:
    """Property graph with typed nodes, domain/range-checked edges and
    undirected adjacency for evidence traversal.
    """

    def __init__(self) -> None:
        self._nodes: dict[str, Node] = {}
        self._edges: dict[tuple[str, str, str], Edge] = {}
        self._out: dict[str, set[str]] = {}
        self._in: dict[str, set[str]] = {}
        self._sealed = False
        self._tokens: dict[str, frozenset[str]] = {}

    # -- construction -------------------------------------------------------

    @property
    def sealed(self) -> bool:
        return self._sealed

    def seal(self) -> "KnowledgeGraph":
        self._sealed = True
        return self

    def _check_writable(self) -> None:
        if self._sealed:
            raise GraphSealed("graph is sealed; build a new graph instead")

    def add_node(self, node: Node) -> None:
        self._check_writable()
        if kind_of(node.id) is not node.kind:
            raise KindPrefixMismatch(
                f"id {node.id!r} has prefix for {kind_of(node.id).value}, node kind is {node.kind.value}"
            )
        existing = self._nodes.get(node.id)
        if existing is not None:
            if existing == node:
                return
            raise DuplicateIdConflict(f"node {node.id!r} already present with different content")
        self._nodes[node.id] = node
        self._out.setdefault(node.id, set())
        self._in.setdefault(node.id, set())

    def add_edge(self, edge: Edge) -> None:
        self._check_writable()
        for end in (edge.src, edge.dst):
            if end not in self._nodes:
                raise MissingEndpoint(f"edge endpoint {end!r} not in graph")
        src_kind = self._nodes[edge.src].kind
        dst_kind = self._nodes[edge.dst].kind
        if (src_kind, dst_kind) != (edge.kind.domain, edge.kind.range):
            raise DomainRangeViolation(
                f"{edge.kind.value} requires {edge.kind.domain.value}->{edge.kind.range.value}, "
                f"got {src_kind.value}->{dst_kind.value}"
            )
        if not 0.0 <= edge.weight <= 1.0:
            raise ValueError(f"edge weight must lie in [0, 1], got {edge.weight}")
        if edge.key in self._edges:
            return
        self._edges[edge.key] = edge
        self._out[edge.src].add(edge.dst)
        self._in[edge.dst].add(edge.src)

    # -- access -------------------------------------------------------------

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(f"unknown node {node_id!r}") from None

    def nodes(self, kind: NodeKind | None = None) -> list[Node]:
        """Nodes sorted by id, optionally restricted to one kind."""
        return [self._nodes[i] for i in sorted(self._nodes) if kind is None or self._nodes[i].kind is kind]

    def edges(self, kind: EdgeKind | None = None) -> list[Edge]:
        return [self._edges[k] for k in sorted(self._edges) if kind is None or k[2] == kind.value]

    def successors(self, node_id: str, kind: EdgeKind | None = None) -> list[str]:
        self.node(node_id)
        out = self._out[node_id]
        if kind is not None:
            out = {d for d in out if (node_id, d, kind.value) in self._edges}
        return sorted(out)

    def predecessors(self, node_id: str, kind: EdgeKind | None = None) -> list[str]:
        self.node(node_id)
        inc = self._in[node_id]
        if kind is not None:
            inc = {s for s in inc if (s, node_id, kind.value) in self._edges}
        return sorted(inc)

    def neighbors(self, node_id: str) -> list[str]:
        self.node(node_id)
        return sorted(self._out[node_id] | self._in[node_id])

    def node_tokens(self, node_id: str) -> frozenset[str]:
        toks = self._tokens.get(node_id)
        if toks is None:
            toks = token_set(self.node(node_id).text)
            if self._sealed:
                self._tokens[node_id] = toks
        return toks

    # -- queries ------------------------------------------------------------

    def k_hop(
        self,
        start: str,
        k: int,
        kind_filter: Iterable[NodeKind] | None = None,
    ) -> list[tuple[str, int]]:
        """Nodes within ``k`` undirected hops of ``start`` with their minimal
        distance, sorted by (distance, id). ``start`` itself is excluded and
        ``kind_filter`` restricts the output, not the traversal.
        """
        self.node(start)
        if k < 0:
            raise ValueError("k must be >= 0")
        kinds = frozenset(kind_filter) if kind_filter is not None else None
        dist = {start: 0}
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            d = dist[cur]
            if d == k:
                continue
            for nxt in self._out[cur] | self._in[cur]:
                if nxt not in dist:
                    dist[nxt] = d + 1
                    queue.append(nxt)
        out = [
            (nid, d)
            for nid, d in dist.items()
            if nid != start and (kinds is None or self._nodes[nid].kind in kinds)
        ]
        out.sort(key=lambda t: (t[1], t[0]))
        return out

    def text_search(
        self,
        terms: Iterable[str],
        kind_filter: Iterable[NodeKind] | None = None,
        candidates: Iterable[str] | None = None,
    ) -> list[tuple[str, int]]:
        """Rank nodes by the number of distinct query tokens in their text.

        Only positive scores are returned, ordered by score desc, timestamp
        desc (missing timestamps last), id asc. ``candidates`` restricts the
        search to a subset of node ids.
        """
        query = frozenset(terms)
        if not query:
            raise ValueError("terms must be non-empty")
        kinds = frozenset(kind_filter) if kind_filter is not None else None
        pool = self._nodes if candidates is None else candidates
        hits = []
        for nid in pool:
            node = self.node(nid)
            if kinds is not None and node.kind not in kinds:
                continue
            score = len(query & self.node_tokens(nid))
            if score > 0:
                hits.append((nid, score))
        hits.sort(key=lambda h: _search_key(self._nodes[h[0]], h[1]))
        return hits

    # -- serialization --------------------------------------------------------

    def iter_jsonl(self) -> Iterator[str]:
        for node in self.nodes():
            yield _dumps(node.to_dict())
        for edge in self.edges():
            yield _dumps(edge.to_dict())

    def to_jsonl(self) -> str:
        return "".join(line + "\n" for line in self.iter_jsonl())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "KnowledgeGraph":
        """Load a serialized graph (nodes first, then edges); returns it sealed."""
        graph = cls()
        edges = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GraphError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if "src" in d:
                edges.append(Edge.from_dict(d))
            else:
                graph.add_node(Node.from_dict(d))
        for edge in edges:
            graph.add_edge(edge)
        return graph.seal()

    @classmethod
    def load(cls, path) -> "KnowledgeGraph":
        with open(path, encoding="utf-8") as fh:
            return cls.from_jsonl(fh.read())


def _search_key(node: Node, score: int) -> tuple:
    ts = node.timestamp
    return (-score, ts is None, -(ts or 0), node.id)


def _dumps(d: dict) -> str:
    return json.dumps(d, ensure_ascii=False, separators=(",", ":"))
