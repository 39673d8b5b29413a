"""Label generators for the four schema tasks and their nominal radii.

=================  ==============  ======  ===========================
task               anchor          radius  label
=================  ==============  ======  ===========================
FK discovery       attribute pair  0       candidate coincides with FK
cascade impact     attribute pair  1       referenced table fan-in
join cost          table pair      2       log10 rows along FK path
blast radius       table           3       decayed FK reachability
=================  ==============  ======  ===========================

Radii for the three table-level tasks count FK hops between tables (one
join = one hop). :func:`table_neighborhood` extracts the matching
sub-schema so each label can be recomputed from its own neighborhood.
"""

from __future__ import annotations

import logging
import math
from collections import deque

from .dataset import Sample, TaskDataset, TaskKind
from .exceptions import NoPositives, UnknownNode
from .graph import ALL_KINDS, EdgeKind, SchemaGraph, endpoints, k_hop_neighborhood, restrict

log = logging.getLogger(__name__)

JOIN_COST_CAP = 9.0
NOMINAL_RADIUS = {"fk": 0, "cascade": 1, "join_cost": 2, "blast_radius": 3}


def _require_table(graph, t):
    if t not in graph.table_map:
        raise UnknownNode(t)


def table_rows(graph: SchemaGraph, table: str) -> int:
    """Row count of a table: the largest row_count among its attributes."""
    _require_table(graph, table)
    return max((graph.feature_map[a].row_count for a in graph.table_attributes.get(table, ())), default=0)


def fk_references(graph: SchemaGraph) -> dict[str, tuple[str, ...]]:
    """Directed table-level FK graph: referencing table -> referenced tables."""
    out = {t.name: set() for t in graph.tables}
    for e in graph.fk_edges:
        a, b = graph.table_of(e.src), graph.table_of(e.dst)
        if a != b:
            out[a].add(b)
    return {t: tuple(sorted(v)) for t, v in out.items()}


def fk_adjacency(graph: SchemaGraph) -> dict[str, tuple[str, ...]]:
    """Undirected table-level FK graph."""
    out = {t.name: set() for t in graph.tables}
    for a, refs in fk_references(graph).items():
        for b in refs:
            out[a].add(b)
            out[b].add(a)
    return {t: tuple(sorted(v)) for t, v in out.items()}


def _bfs(adj, sources, max_depth):
    dist = {s: 0 for s in sources}
    q = deque(sources)
    while q:
        v = q.popleft()
        if dist[v] >= max_depth:
            continue
        for u in adj[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def _anchor_tables(graph, anchor):
    out = []
    for n in dict.fromkeys(endpoints(anchor)):
        if n in graph.table_map:
            out.append(n)
        elif n in graph.attribute_map:
            out.append(graph.table_of(n))
        else:
            raise UnknownNode(n)
    return out


def table_neighborhood(graph: SchemaGraph, anchor, k: int) -> SchemaGraph:
    """Sub-schema of all tables within ``k`` FK hops of the anchor's tables.

    Attributes of kept tables and all edges among kept nodes are retained.
    """
    tables = set(_bfs(fk_adjacency(graph), list(dict.fromkeys(_anchor_tables(graph, anchor))), k))
    nodes = set(tables)
    for t in tables:
        nodes.update(graph.table_attributes.get(t, ()))
    return restrict(graph, nodes)


# ---------------------------------------------------------------------------
# FK discovery (radius 0)


def fk_labels(graph: SchemaGraph, allow_empty: bool = False) -> TaskDataset:
    """Positives are candidate edges that coincide with a ground-truth FK.

    FK edges are removed from the message-passing channels since they are
    the labels. Negatives come from :func:`locrad.sampling.sample_negatives`.
    """
    fks = {(e.src, e.dst) for e in graph.fk_edges}
    cands = {(e.src, e.dst) for e in graph.candidate_edges}
    if not fks and not allow_empty:
        raise NoPositives("graph has no FK edges")
    for s, d in sorted(fks - cands):
        log.warning("FK %s -> %s is not a candidate edge and yields no sample", s, d)
    pos = sorted(fks & cands)
    if not pos and not allow_empty:
        raise NoPositives("no candidate edge coincides with an FK edge")
    return TaskDataset(
        graph=graph,
        samples=tuple(Sample(s, d, 1.0) for s, d in pos),
        kind=TaskKind.CLASSIFICATION,
        nominal_radius=NOMINAL_RADIUS["fk"],
        message_kinds=ALL_KINDS - {EdgeKind.FOREIGN_KEY},
        name="fk",
    )


# ---------------------------------------------------------------------------
# cascade impact (radius 1)


def referencing_tables(graph: SchemaGraph, table: str) -> tuple[str, ...]:
    _require_table(graph, table)
    return tuple(sorted(a for a, refs in fk_references(graph).items() if table in refs))


def cascade_impact_label(graph: SchemaGraph, edge, threshold: int = 2) -> int:
    """1 iff the table of the referenced endpoint (``dst``) has at least
    ``threshold`` distinct referencing tables."""
    src, dst = endpoints(edge)
    if not graph.has_node(src):
        raise UnknownNode(src)
    table = dst if dst in graph.table_map else graph.table_of(dst)
    return int(len(referencing_tables(graph, table)) >= threshold)


def cascade_dataset(graph: SchemaGraph, threshold: int = 2) -> TaskDataset:
    refs = fk_references(graph)
    fan_in = {t.name: 0 for t in graph.tables}
    for refd in refs.values():
        for b in refd:
            fan_in[b] += 1
    samples = tuple(
        Sample(e.src, e.dst, float(fan_in[graph.table_of(e.dst)] >= threshold)) for e in graph.candidate_edges
    )
    return TaskDataset(graph, samples, TaskKind.CLASSIFICATION, NOMINAL_RADIUS["cascade"], name="cascade")


# ---------------------------------------------------------------------------
# join cost (radius 2)


def join_cost_target(graph: SchemaGraph, table_pair, cap: float | None = JOIN_COST_CAP, max_hops: int = 2) -> float:
    """log10 of the product of table row counts along the cheapest shortest
    FK join path of at most ``max_hops`` joins; ``cap`` when there is none
    (``cap=None`` returns ``math.inf``)."""
    a, b = endpoints(table_pair)
    _require_table(graph, a)
    _require_table(graph, b)
    adj = fk_adjacency(graph)
    rows = {t: max(1, table_rows(graph, t)) for t in adj}
    if a == b:
        return math.log10(rows[a])
    # enumerate paths of increasing length; the first length that connects wins
    frontier = [(a,)]
    for _ in range(max_hops):
        nxt = []
        done = []
        for path in frontier:
            for u in adj[path[-1]]:
                if u in path:
                    continue
                p = path + (u,)
                (done if u == b else nxt).append(p)
        if done:
            return min(sum(math.log10(rows[t]) for t in p) for p in done)
        frontier = nxt
    return math.inf if cap is None else float(cap)


def join_cost_dataset(graph: SchemaGraph, keep_unreachable: bool = False, cap: float = JOIN_COST_CAP,
                      include_self: bool = False) -> TaskDataset:
    """All unordered table pairs (``a < b``) labeled with their join cost."""
    names = [t.name for t in graph.tables]
    samples = []
    for i, a in enumerate(names):
        for b in names[i if include_self else i + 1 :]:
            y = join_cost_target(graph, (a, b), cap=None)
            if math.isinf(y):
                if not keep_unreachable:
                    continue
                y = cap
            samples.append(Sample(a, b, y))
    return TaskDataset(graph, tuple(samples), TaskKind.REGRESSION, NOMINAL_RADIUS["join_cost"], name="join_cost")


# ---------------------------------------------------------------------------
# blast radius (radius 3)


def blast_radius_target(graph: SchemaGraph, table: str, horizon: int = 3, decay: float = 0.5) -> float:
    """Sum of ``decay ** d`` over tables first reached at depth ``1 <= d <= horizon``
    along directed FK chains (referencing -> referenced)."""
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if not 0 < decay <= 1:
        raise ValueError("decay must lie in (0, 1]")
    _require_table(graph, table)
    dist = _bfs(fk_references(graph), [table], horizon)
    return float(sum(decay**d for t, d in dist.items() if t != table))


def blast_radius_dataset(graph: SchemaGraph, horizon: int = 3, decay: float = 0.5) -> TaskDataset:
    samples = tuple(Sample(t.name, t.name, blast_radius_target(graph, t.name, horizon, decay)) for t in graph.tables)
    return TaskDataset(graph, samples, TaskKind.REGRESSION, NOMINAL_RADIUS["blast_radius"], name="blast_radius")


# ---------------------------------------------------------------------------


def recompute_label(task: str, graph: SchemaGraph, anchor, **params) -> float:
    """Label of ``anchor`` for ``task`` computed on ``graph``."""
    if task == "fk":
        s, d = endpoints(anchor)
        return float(any(e.src == s and e.dst == d for e in graph.fk_edges))
    if task == "cascade":
        return float(cascade_impact_label(graph, anchor, params.get("threshold", 2)))
    if task == "join_cost":
        return join_cost_target(graph, anchor, params.get("cap", JOIN_COST_CAP))
    if task == "blast_radius":
        return blast_radius_target(graph, endpoints(anchor)[0], params.get("horizon", 3), params.get("decay", 0.5))
    raise ValueError(f"unknown task {task!r}")


def check_sufficiency(task: str, dataset: TaskDataset, radius: int | None = None, **params) -> list[int]:
    """Indices of samples whose label changes when recomputed on the
    radius-limited neighborhood (empty when the radius is sufficient)."""
    r = NOMINAL_RADIUS[task] if radius is None else radius
    bad = []
    for i, s in enumerate(dataset.samples):
        anchor = (s.src, s.dst)
        if task == "fk":
            nb = k_hop_neighborhood(dataset.graph, anchor, r)
            local = restrict(dataset.graph, nb.nodes)
        else:
            local = table_neighborhood(dataset.graph, anchor, r)
        if recompute_label(task, local, anchor, **params) != recompute_label(task, dataset.graph, anchor, **params):
            bad.append(i)
    return bad
