"""Schema graph data model, validation and k-hop neighborhoods.

A schema is a typed multigraph with two node categories (tables and
attributes) and three edge kinds. Node ids are ``"table"`` for tables and
``"table.attr"`` for attributes. Graphs are immutable once built; derived
indexes (adjacency, id lookups) are computed lazily and cached.
"""

from __future__ import annotations

import dataclasses
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

from .exceptions import UnknownNode


class DataType(str, Enum):
    INT = "Int"
    FLOAT = "Float"
    TEXT = "Text"
    DATE = "Date"
    BOOL = "Bool"


class EdgeKind(str, Enum):
    MEMBERSHIP = "membership"
    CANDIDATE = "candidate"
    FOREIGN_KEY = "foreign_key"


ALL_KINDS = frozenset(EdgeKind)

TABLE = "table"
BEACON = "beacon"
ATTRIBUTE = "attribute"


@dataclass(frozen=True)
class FeatureRecord:
    name: str
    data_type: DataType = DataType.TEXT
    distinct_count: int = 0
    row_count: int = 0
    null_fraction: float = 0.0
    mean_length: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "data_type", DataType(self.data_type))


@dataclass(frozen=True)
class TableNode:
    name: str
    role: str = TABLE  # TABLE or BEACON


@dataclass(frozen=True)
class AttributeNode:
    id: str
    table: str
    features: FeatureRecord

    @property
    def name(self) -> str:
        return self.features.name


@dataclass(frozen=True)
class SchemaEdge:
    src: str
    dst: str
    kind: EdgeKind
    label: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EdgeKind(self.kind))

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.src, self.dst, self.kind.value)


@dataclass(frozen=True)
class CandidateEdge:
    """Ordered endpoint pair ``(src, dst)``; also used for table-pair anchors."""

    src: str
    dst: str
    label: float | None = None
    provenance: str = "observed"  # or "hypothesized"


def attribute_id(table: str, attr: str) -> str:
    return f"{table}.{attr}"


def endpoints(anchor) -> tuple[str, str]:
    """Return ``(src, dst)`` of a CandidateEdge, SchemaEdge, Sample or 2-tuple."""
    if isinstance(anchor, tuple):
        return anchor[0], anchor[1]
    return anchor.src, anchor.dst


@dataclass(frozen=True)
class SchemaGraph:
    """Immutable schema graph ``(tables, attributes, edges)``.

    Inputs are stored in canonical order (sorted by id / edge key) and exact
    duplicate edges ``(src, dst, kind)`` are dropped, keeping the first.
    """

    tables: tuple[TableNode, ...] = ()
    attributes: tuple[AttributeNode, ...] = ()
    edges: tuple[SchemaEdge, ...] = ()

    def __post_init__(self):
        tables = tuple(sorted(self.tables, key=lambda t: t.name))
        attrs = tuple(sorted(self.attributes, key=lambda a: a.id))
        seen = {}
        for e in self.edges:
            seen.setdefault(e.key, e)
        edges = tuple(seen[k] for k in sorted(seen))
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "attributes", attrs)
        object.__setattr__(self, "edges", edges)

    # -- lookups -----------------------------------------------------------
    @cached_property
    def table_map(self) -> dict[str, TableNode]:
        return {t.name: t for t in self.tables}

    @cached_property
    def attribute_map(self) -> dict[str, AttributeNode]:
        return {a.id: a for a in self.attributes}

    @cached_property
    def feature_map(self) -> dict[str, FeatureRecord]:
        return {a.id: a.features for a in self.attributes}

    @cached_property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(sorted([t.name for t in self.tables] + [a.id for a in self.attributes]))

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.node_ids)}

    @cached_property
    def beacons(self) -> frozenset[str]:
        return frozenset(t.name for t in self.tables if t.role == BEACON)

    @cached_property
    def table_attributes(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {t.name: [] for t in self.tables}
        for a in self.attributes:
            out.setdefault(a.table, []).append(a.id)
        return {k: tuple(v) for k, v in out.items()}

    def has_node(self, node_id: str) -> bool:
        return node_id in self.table_map or node_id in self.attribute_map

    def category(self, node_id: str) -> str:
        t = self.table_map.get(node_id)
        if t is not None:
            return BEACON if t.role == BEACON else TABLE
        if node_id in self.attribute_map:
            return ATTRIBUTE
        raise UnknownNode(node_id)

    def table_of(self, attr_id: str) -> str:
        try:
            return self.attribute_map[attr_id].table
        except KeyError:
            raise UnknownNode(attr_id) from None

    def edges_of_kind(self, kind: EdgeKind) -> tuple[SchemaEdge, ...]:
        kind = EdgeKind(kind)
        return tuple(e for e in self.edges if e.kind == kind)

    @property
    def candidate_edges(self) -> tuple[SchemaEdge, ...]:
        return self.edges_of_kind(EdgeKind.CANDIDATE)

    @property
    def fk_edges(self) -> tuple[SchemaEdge, ...]:
        return self.edges_of_kind(EdgeKind.FOREIGN_KEY)

    # -- adjacency ---------------------------------------------------------
    def incident(self, kinds: Iterable[EdgeKind] | None = None) -> dict[str, tuple[tuple[str, str, bool], ...]]:
        """Map node -> sorted ``(neighbor, kind, outgoing)`` triples.

        Self-loops are ignored. Edges whose endpoints are absent are skipped.
        """
        key = _kinds_key(kinds)
        cache = self.__dict__.setdefault("_incident_cache", {})
        if key in cache:
            return cache[key]
        acc: dict[str, list[tuple[str, str, bool]]] = {n: [] for n in self.node_ids}
        for e in self.edges:
            if e.kind.value not in key or e.src == e.dst:
                continue
            if e.src not in acc or e.dst not in acc:
                continue
            acc[e.src].append((e.dst, e.kind.value, True))
            acc[e.dst].append((e.src, e.kind.value, False))
        out = {n: tuple(sorted(v)) for n, v in acc.items()}
        cache[key] = out
        return out

    def neighbors(self, kinds: Iterable[EdgeKind] | None = None) -> dict[str, tuple[str, ...]]:
        """Undirected simple-graph neighbor lists (sorted, deduplicated)."""
        key = _kinds_key(kinds)
        cache = self.__dict__.setdefault("_neighbor_cache", {})
        if key not in cache:
            cache[key] = {n: tuple(sorted({u for u, _, _ in inc})) for n, inc in self.incident(key).items()}
        return cache[key]

    # -- functional updates ------------------------------------------------
    def replace(self, **changes) -> "SchemaGraph":
        return dataclasses.replace(self, **changes)

    def with_edges(self, add: Iterable[SchemaEdge] = (), remove: Iterable[SchemaEdge | tuple] = ()) -> "SchemaGraph":
        drop = {e.key if isinstance(e, SchemaEdge) else tuple(e) for e in remove}
        kept = [e for e in self.edges if e.key not in drop]
        return self.replace(edges=tuple(kept) + tuple(add))

    def without_kinds(self, kinds: Iterable[EdgeKind]) -> "SchemaGraph":
        kinds = {EdgeKind(k) for k in kinds}
        return self.replace(edges=tuple(e for e in self.edges if e.kind not in kinds))

    def with_features(self, updates: dict[str, FeatureRecord]) -> "SchemaGraph":
        attrs = tuple(
            dataclasses.replace(a, features=updates[a.id]) if a.id in updates else a for a in self.attributes
        )
        return self.replace(attributes=attrs)

    def with_roles(self, roles: dict[str, str]) -> "SchemaGraph":
        tables = tuple(TableNode(t.name, roles.get(t.name, t.role)) for t in self.tables)
        return self.replace(tables=tables)

    def __len__(self):
        return len(self.node_ids)


def _kinds_key(kinds) -> frozenset[str]:
    if kinds is None:
        return frozenset(k.value for k in ALL_KINDS)
    if isinstance(kinds, frozenset) and all(isinstance(k, str) and not isinstance(k, EdgeKind) for k in kinds):
        return kinds
    return frozenset(EdgeKind(k).value for k in kinds)


# ---------------------------------------------------------------------------
# validation


class Violation(NamedTuple):
    rule: str
    subject: str
    detail: str = ""


def validate(graph: SchemaGraph) -> list[Violation]:
    """Check every structural invariant; return violations (empty when valid)."""
    out: list[Violation] = []
    table_names = [t.name for t in graph.tables]
    attr_ids = [a.id for a in graph.attributes]

    seen: set[str] = set()
    for nid in table_names + attr_ids:
        if nid in seen:
            out.append(Violation("DuplicateId", nid, "node id used more than once"))
        seen.add(nid)

    tables = set(table_names)
    attrs = set(attr_ids)
    for t in graph.tables:
        if t.role not in (TABLE, BEACON):
            out.append(Violation("BadRole", t.name, f"unknown table role {t.role!r}"))

    membership: dict[str, list[str]] = {a: [] for a in attrs}
    for e in graph.edges:
        subject = f"{e.src}->{e.dst}:{e.kind.value}"
        missing = [n for n in (e.src, e.dst) if n not in seen]
        if missing:
            out.append(Violation("DanglingEndpoint", subject, f"unknown node(s) {missing}"))
            continue
        if e.src == e.dst:
            out.append(Violation("SelfLoop", subject, "edge endpoints must differ"))
            continue
        if e.kind is EdgeKind.MEMBERSHIP:
            if e.src not in attrs or e.dst not in tables:
                out.append(Violation("BadEndpointKind", subject, "membership edges run attribute->table"))
            else:
                membership[e.src].append(e.dst)
        elif e.src not in attrs or e.dst not in attrs:
            out.append(Violation("BadEndpointKind", subject, f"{e.kind.value} edges connect attributes only"))

    for a in graph.attributes:
        owners = membership.get(a.id, [])
        if not owners:
            out.append(Violation("MissingMembership", a.id, "attribute has no membership edge"))
        elif len(owners) > 1:
            out.append(Violation("MultipleMembership", a.id, f"member of {sorted(owners)}"))
        elif owners[0] != a.table:
            out.append(Violation("MembershipMismatch", a.id, f"declared table {a.table!r}, edge to {owners[0]!r}"))
        if a.table not in tables:
            out.append(Violation("UnknownTable", a.id, f"table {a.table!r} not declared"))
        f = a.features
        if f.distinct_count < 0 or f.row_count < 0 or f.mean_length < 0:
            out.append(Violation("BadFeature", a.id, "counts and lengths must be nonnegative"))
        if f.distinct_count > f.row_count:
            out.append(Violation("BadFeature", a.id, "distinct_count exceeds row_count"))
        if not 0.0 <= f.null_fraction <= 1.0:
            out.append(Violation("BadFeature", a.id, "null_fraction outside [0, 1]"))
    return out


# ---------------------------------------------------------------------------
# neighborhoods


@dataclass(frozen=True)
class Neighborhood:
    anchor: tuple[str, str]
    hops: int
    nodes: tuple[str, ...]
    edges: tuple[SchemaEdge, ...]
    distance: dict[str, int] = field(compare=False, repr=False)


def distances_from(graph: SchemaGraph, sources: Sequence[str], max_depth: int | None = None, kinds=None) -> dict[str, int]:
    """Multi-source BFS distances over the undirected graph."""
    nbrs = graph.neighbors(kinds)
    dist: dict[str, int] = {}
    queue: deque[str] = deque()
    for s in sources:
        if s not in nbrs:
            raise UnknownNode(s)
        if s not in dist:
            dist[s] = 0
            queue.append(s)
    while queue:
        v = queue.popleft()
        d = dist[v]
        if max_depth is not None and d >= max_depth:
            continue
        for u in nbrs[v]:
            if u not in dist:
                dist[u] = d + 1
                queue.append(u)
    return dist


def k_hop_neighborhood(graph: SchemaGraph, edge, k: int, kinds=None) -> Neighborhood:
    """Induced subgraph on all nodes within ``k`` hops of either endpoint.

    Traversal is undirected over ``kinds`` (default: every edge kind).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    src, dst = endpoints(edge)
    dist = distances_from(graph, (src, dst), k, kinds)
    nodes = tuple(sorted(dist))
    key = _kinds_key(kinds)
    induced = tuple(e for e in graph.edges if e.kind.value in key and e.src in dist and e.dst in dist)
    return Neighborhood((src, dst), k, nodes, induced, dist)


def restrict(graph: SchemaGraph, node_ids: Iterable[str]) -> SchemaGraph:
    """Induced sub-schema on ``node_ids``."""
    keep = set(node_ids)
    return SchemaGraph(
        tables=tuple(t for t in graph.tables if t.name in keep),
        attributes=tuple(a for a in graph.attributes if a.id in keep),
        edges=tuple(e for e in graph.edges if e.src in keep and e.dst in keep),
    )
