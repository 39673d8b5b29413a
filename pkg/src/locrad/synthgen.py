"""Radius-controlled synthetic schema benchmark.

``generate_schema`` draws a schema whose FK backbone follows a fixed table
degree distribution and whose candidate edges are sampled among
type-compatible attribute pairs. ``inject_radius_cue`` then labels every
candidate edge so that the label depends on structure at exactly depth k:

* k = 0: a deterministic rule on the two endpoint feature records
  (types equal, ``distinct(src) <= distinct(dst)``, a shared name token);
  endpoint features are re-drawn until the positive rate hits the target.
* k >= 1: some tables are marked as beacons and an edge is positive iff the
  nearest beacon is exactly k hops from its nearer endpoint. Features are
  untouched, so endpoint features carry no label information.

``inject_radius_target`` builds the regression analogue: a decay-weighted
count of beacon tables within a horizon of k hops.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import Sample, TaskDataset, TaskKind
from .exceptions import CueInfeasible, InfeasibleParams, TooFewSamples
from .features import local_features, tokenize, type_class
from .utils import allocate_counts, derive_rng
from .graph import (
    BEACON,
    TABLE,
    AttributeNode,
    CandidateEdge,
    DataType,
    EdgeKind,
    FeatureRecord,
    SchemaEdge,
    SchemaGraph,
    TableNode,
    attribute_id,
    distances_from,
)

log = logging.getLogger(__name__)

MAX_RADIUS = 6
NAME_TOKENS = ("id", "user", "order", "item", "code", "name", "status", "date", "amount", "ref")
ROW_COUNTS = (100, 1000, 10000)
DISTINCT_FRACTIONS = (1.0, 0.5, 0.1, 0.01)
NULL_FRACTIONS = (0.0, 0.1, 0.3)
MEAN_LENGTHS = (8.0, 16.0, 32.0)
_NUMERIC_TYPES = (DataType.INT, DataType.FLOAT, DataType.BOOL)
_TEXT_TYPES = (DataType.TEXT, DataType.DATE)


@dataclass
class GeneratorParams:
    n_tables: int = 50
    attrs_per_table: tuple[int, int] = (2, 4)
    target_radius: int = 0
    candidate_density: float = 0.05
    degree_profile: tuple[tuple[int, float], ...] = ((1, 0.5), (2, 0.3), (3, 0.2))
    positive_fraction: float = 0.5
    seed: int = 0
    # size of the attribute-profile vocabulary; 0 draws every attribute fresh
    profile_pool: int = 0
    row_counts: tuple[int, ...] = ROW_COUNTS

    def __post_init__(self):
        self.attrs_per_table = tuple(int(v) for v in self.attrs_per_table)
        self.degree_profile = tuple((int(d), float(p)) for d, p in self.degree_profile)
        self.row_counts = tuple(int(r) for r in self.row_counts)

    def check(self):
        lo, hi = self.attrs_per_table
        if self.n_tables < 1:
            raise InfeasibleParams("n_tables must be positive")
        if not 1 <= lo <= hi:
            raise InfeasibleParams("attrs_per_table must satisfy 1 <= min <= max")
        if not 0 <= self.target_radius <= MAX_RADIUS:
            raise InfeasibleParams(f"target_radius must lie in [0, {MAX_RADIUS}]")
        if not 0 < self.candidate_density <= 1:
            raise InfeasibleParams("candidate_density must lie in (0, 1]")
        if not 0 < self.positive_fraction < 1:
            raise InfeasibleParams("positive_fraction must lie in (0, 1)")
        probs = [p for _, p in self.degree_profile]
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise InfeasibleParams("degree_profile probabilities must be nonnegative and sum to 1")
        if any(d < 0 for d, _ in self.degree_profile):
            raise InfeasibleParams("degrees must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise InfeasibleParams("seed must be a 64-bit unsigned integer")
        if not self.row_counts or min(self.row_counts) < 1:
            raise InfeasibleParams("row_counts must be positive")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorParams":
        data = dict(data)
        if "degree_profile" in data and isinstance(data["degree_profile"], dict):
            data["degree_profile"] = tuple(sorted((int(k), v) for k, v in data["degree_profile"].items()))
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# schema


def _random_record(rng, cls: str, rows: int) -> FeatureRecord:
    k = 1 if rng.random() < 0.5 else 2
    name = "_".join(rng.choice(NAME_TOKENS, size=k, replace=False))
    if cls == "numeric":
        dtype = _NUMERIC_TYPES[rng.integers(len(_NUMERIC_TYPES))]
        length = 0.0
    else:
        dtype = _TEXT_TYPES[rng.integers(len(_TEXT_TYPES))]
        length = float(rng.choice(MEAN_LENGTHS))
    frac = float(rng.choice(DISTINCT_FRACTIONS))
    return FeatureRecord(
        name=name,
        data_type=dtype,
        distinct_count=max(1, int(round(frac * rows))),
        row_count=rows,
        null_fraction=float(rng.choice(NULL_FRACTIONS)),
        mean_length=length,
    )


def degree_sequence(params: GeneratorParams, rng) -> np.ndarray:
    n = params.n_tables
    degrees = np.repeat([d for d, _ in params.degree_profile], allocate_counts([p for _, p in params.degree_profile], n))
    degrees = rng.permutation(np.minimum(degrees, n - 1))
    if degrees.sum() % 2:
        i = int(np.argmax(degrees))
        degrees[i] -= 1
    return degrees


def _pair_stubs(degrees, rng, attempts=200):
    stubs = np.repeat(np.arange(len(degrees)), degrees)
    best = None
    for _ in range(attempts):
        perm = rng.permutation(stubs)
        pairs = set()
        bad = 0
        for a, b in zip(perm[::2], perm[1::2]):
            key = (min(a, b), max(a, b))
            if a == b or key in pairs:
                bad += 1
                continue
            pairs.add(key)
        if bad == 0:
            return sorted(pairs)
        if best is None or len(pairs) > len(best):
            best = pairs
    return sorted(best) if best is not None else []


def total_variation(profile, realized_degrees) -> float:
    realized = np.asarray(realized_degrees)
    n = max(len(realized), 1)
    support = {d for d, _ in profile} | set(realized.tolist())
    target = dict(profile)
    return 0.5 * sum(abs(target.get(d, 0.0) - float((realized == d).sum()) / n) for d in support)


def _sample_candidates(owner, classes, density, rng, attempts=50):
    """Candidate pairs at ``density`` among type-compatible cross-table pairs.

    The edge count is ``round(density * #compatible pairs)`` and edges are
    wired by a configuration model whose out- and in-degrees differ by at
    most one across attributes of a class, so candidate degree is (nearly)
    constant instead of binomial.
    """
    owner = np.asarray(owner)
    classes = np.asarray(classes)
    pairs = []
    for cls in sorted(set(classes.tolist())):
        idx = np.flatnonzero(classes == cls)
        if len(idx) < 2:
            continue
        _, per_table = np.unique(owner[idx], return_counts=True)
        n_ok = len(idx) * len(idx) - int((per_table**2).sum())
        m = int(round(density * n_ok))
        if m == 0:
            continue
        out_deg = allocate_counts(np.full(len(idx), 1.0 / len(idx)), m)
        in_deg = allocate_counts(np.full(len(idx), 1.0 / len(idx)), m)
        out_stub = np.repeat(idx, rng.permutation(out_deg))
        in_base = np.repeat(idx, rng.permutation(in_deg))
        best = None
        for _ in range(attempts):
            in_stub = rng.permutation(in_base)
            got, seen = [], set()
            for a, b in zip(out_stub, in_stub):
                if owner[a] == owner[b] or (a, b) in seen:
                    continue
                seen.add((a, b))
                got.append((int(a), int(b)))
            if best is None or len(got) > len(best):
                best = got
            if len(got) == m:
                break
        pairs.extend(best)
    return pairs


def generate_schema(params: GeneratorParams) -> SchemaGraph:
    """Draw a synthetic schema; fully determined by ``params.seed``."""
    params.check()
    rng = derive_rng(params.seed, "schema")
    n = params.n_tables
    width = max(2, len(str(n - 1)))
    table_names = [f"t{i:0{width}d}" for i in range(n)]
    lo, hi = params.attrs_per_table
    sizes = rng.integers(lo, hi + 1, size=n)
    rows = rng.choice(params.row_counts, size=n)

    n_attrs = int(sizes.sum())
    # every table is split evenly between numeric and textual columns, so
    # neither type mix nor candidate degree says anything about the table
    classes = np.concatenate(
        [rng.permutation(np.repeat(["numeric", "textual"], allocate_counts([0.5, 0.5], int(m)))) for m in sizes]
    )
    pool = None
    if params.profile_pool > 0:
        k = params.profile_pool
        pool = {
            "numeric": [_random_record(rng, "numeric", 1) for _ in range(max(1, k // 2))],
            "textual": [_random_record(rng, "textual", 1) for _ in range(max(1, k - k // 2))],
        }

    attrs: list[AttributeNode] = []
    per_table: list[list[str]] = []
    c = 0
    for t, name in enumerate(table_names):
        ids = []
        for j in range(int(sizes[t])):
            cls = str(classes[c])
            c += 1
            if pool is None:
                rec = _random_record(rng, cls, int(rows[t]))
            else:
                proto = pool[cls][rng.integers(len(pool[cls]))]
                rec = FeatureRecord(
                    proto.name,
                    proto.data_type,
                    max(1, int(round(proto.distinct_count / proto.row_count * rows[t]))),
                    int(rows[t]),
                    proto.null_fraction,
                    proto.mean_length,
                )
            # column ids are positional; the profiled name lives in the record
            aid = attribute_id(name, f"c{j}")
            attrs.append(AttributeNode(aid, name, rec))
            ids.append(aid)
        per_table.append(ids)

    edges: list[SchemaEdge] = [SchemaEdge(a.id, a.table, EdgeKind.MEMBERSHIP) for a in attrs]
    attr_class = {a.id: type_class(a.features.data_type) for a in attrs}

    degrees = degree_sequence(params, rng)
    links = _pair_stubs(degrees, rng)
    realized = np.zeros(n, dtype=int)
    fk_pairs = []
    for a, b in links:
        if rng.random() < 0.5:
            a, b = b, a
        src = per_table[a][rng.integers(len(per_table[a]))]
        # a key references a column of the same type class when one exists
        same = [x for x in per_table[b] if attr_class[x] == attr_class[src]] or per_table[b]
        dst = same[rng.integers(len(same))]
        fk_pairs.append((src, dst))
        realized[a] += 1
        realized[b] += 1
    if n > 1 and total_variation(params.degree_profile, realized) > 0.1 + 1e-9:
        raise InfeasibleParams("degree profile cannot be realized on this many tables")
    edges.extend(SchemaEdge(s, d, EdgeKind.FOREIGN_KEY) for s, d in fk_pairs)

    owner = [a.table for a in attrs]
    cls_arr = [type_class(a.features.data_type) for a in attrs]
    cand = set(_sample_candidates(owner, cls_arr, params.candidate_density, rng))
    cand = {(attrs[i].id, attrs[j].id) for i, j in cand}
    cand.update(fk_pairs)
    edges.extend(SchemaEdge(s, d, EdgeKind.CANDIDATE) for s, d in sorted(cand))

    return SchemaGraph(tables=tuple(TableNode(t) for t in table_names), attributes=tuple(attrs), edges=tuple(edges))


def realized_fk_degrees(graph: SchemaGraph) -> np.ndarray:
    """Number of FK links incident to each table (table order)."""
    deg = {t.name: 0 for t in graph.tables}
    for e in graph.fk_edges:
        deg[graph.table_of(e.src)] += 1
        deg[graph.table_of(e.dst)] += 1
    return np.array([deg[t.name] for t in graph.tables])


# ---------------------------------------------------------------------------
# labels


def local_rule(a: FeatureRecord, b: FeatureRecord) -> int:
    """Endpoint-only label used for radius-0 datasets."""
    return int(
        a.data_type == b.data_type
        and a.distinct_count <= b.distinct_count
        and bool(set(tokenize(a.name)) & set(tokenize(b.name)))
    )


def _labeled_graph(graph, samples):
    lab = {(s.src, s.dst): s.label for s in samples}
    edges = [
        SchemaEdge(e.src, e.dst, e.kind, lab.get((e.src, e.dst))) if e.kind is EdgeKind.CANDIDATE else e
        for e in graph.edges
    ]
    return graph.replace(edges=tuple(edges))


def _inject_local(graph, positive_fraction, rng, tol, max_iter=20000):
    cands = [(e.src, e.dst) for e in graph.candidate_edges]
    feats = dict(graph.feature_map)
    touching: dict[str, list[int]] = {}
    for i, (s, d) in enumerate(cands):
        touching.setdefault(s, []).append(i)
        touching.setdefault(d, []).append(i)
    labels = np.array([local_rule(feats[s], feats[d]) for s, d in cands])
    target = positive_fraction * len(cands)
    attrs = sorted(touching)

    def redraw(rec):
        cls = type_class(rec.data_type)
        fresh = _random_record(rng, cls, rec.row_count)
        return fresh

    goal = max(0.25 * tol * len(cands), 0.5)
    for _ in range(max_iter):
        gap = labels.sum() - target
        if abs(gap) <= goal:
            break
        a = attrs[rng.integers(len(attrs))]
        old = feats[a]
        feats[a] = redraw(old)
        idx = touching[a]
        new = np.array([local_rule(feats[cands[i][0]], feats[cands[i][1]]) for i in idx])
        delta = new.sum() - labels[idx].sum()
        if abs(gap + delta) <= abs(gap):
            labels[idx] = new
        else:
            feats[a] = old
    return graph.with_features({a: feats[a] for a in attrs}), labels


def _table_distance_matrix(graph, anchors, cap, kinds=None):
    """``D[t, e]`` = hops from table t to the nearer endpoint of anchor e, capped."""
    tables = [t.name for t in graph.tables]
    D = np.full((len(tables), len(anchors)), cap, dtype=int)
    for ti, t in enumerate(tables):
        dist = distances_from(graph, (t,), cap, kinds)
        for ei, (s, d) in enumerate(anchors):
            D[ti, ei] = min(dist.get(s, cap), dist.get(d, cap), cap)
    return tables, D


def _place_beacons(D, k, positive_fraction, rng, tol, max_iter=6000):
    """Anneal a beacon set so that ``P(min distance == k)`` hits the target.

    Moves toggle one table or swap a beacon with a non-beacon.
    """
    n_tables, n_samples = D.shape
    def gap_of(mask):
        if not mask.any():
            return positive_fraction
        return abs(float((D[mask].min(axis=0) == k).mean()) - positive_fraction)

    chosen = np.zeros(n_tables, dtype=bool)
    gap = gap_of(chosen)
    best_gap, best = gap, chosen.copy()
    temp = 0.05
    for it in range(max_iter):
        if best_gap <= tol / 4:
            break
        trial = chosen.copy()
        on = np.flatnonzero(trial)
        off = np.flatnonzero(~trial)
        if len(on) and len(off) and rng.random() < 0.5:
            trial[on[rng.integers(len(on))]] = False
            trial[off[rng.integers(len(off))]] = True
        else:
            t = rng.integers(n_tables)
            trial[t] = not trial[t]
        g = gap_of(trial)
        t_now = temp * (1 - it / max_iter) + 1e-9
        if g <= gap or rng.random() < np.exp((gap - g) / t_now):
            chosen, gap = trial, g
            if gap < best_gap:
                best_gap, best = gap, chosen.copy()
    return best, best_gap


def inject_radius_cue(graph: SchemaGraph, k: int, positive_fraction: float = 0.5, seed: int = 0,
                      tol: float = 0.05) -> TaskDataset:
    """Label every candidate edge with a cue living at exactly depth ``k``."""
    if not 0 <= k <= MAX_RADIUS:
        raise ValueError(f"k must lie in [0, {MAX_RADIUS}]")
    rng = derive_rng(seed, "cue", k)
    cands = [(e.src, e.dst) for e in graph.candidate_edges]
    if not cands:
        raise CueInfeasible("graph has no candidate edges")
    graph = graph.with_roles({t.name: TABLE for t in graph.tables})
    if k == 0:
        graph, labels = _inject_local(graph, positive_fraction, rng, tol)
    else:
        tables, D = _table_distance_matrix(graph, cands, k + 1)
        mask, _ = _place_beacons(D, k, positive_fraction, rng, tol)
        graph = graph.with_roles({t: BEACON for t, m in zip(tables, mask) if m})
        labels = (D[mask].min(axis=0) == k).astype(int) if mask.any() else np.zeros(len(cands), dtype=int)
    rate = float(np.mean(labels))
    if abs(rate - positive_fraction) > tol:
        raise CueInfeasible(f"positive rate {rate:.3f} misses target {positive_fraction} by more than {tol}")
    samples = tuple(Sample(s, d, float(y)) for (s, d), y in zip(cands, labels))
    return TaskDataset(
        graph=_labeled_graph(graph, samples),
        samples=samples,
        kind=TaskKind.CLASSIFICATION,
        nominal_radius=k,
        name=f"cue_r{k}",
    )


def local_task_dataset(graph: SchemaGraph, n_positives: int = 100, plan=None, seed: int = 0) -> TaskDataset:
    """Radius-0 classification over arbitrary cross-table attribute pairs.

    Positives are drawn from all pairs satisfying :func:`local_rule`;
    negatives follow the sampling plan (hard, random incompatible and
    type-compatible strata) among pairs where the rule fails. Anchors are not
    restricted to candidate edges, so candidate incidence carries no label.
    """
    from .sampling import SamplingPlan, sample_negatives

    plan = plan or SamplingPlan(seed=seed)
    graph = graph.with_roles({t.name: TABLE for t in graph.tables})
    attrs = graph.attributes
    pool = [
        (a.id, b.id)
        for a in attrs
        for b in attrs
        if a.table != b.table and local_rule(a.features, b.features)
    ]
    if not pool:
        raise CueInfeasible("no attribute pair satisfies the local rule")
    rng = derive_rng(seed, "local_task")
    n = min(n_positives, len(pool))
    pos = [pool[i] for i in np.sort(rng.choice(len(pool), size=n, replace=False))]
    negs = sample_negatives(graph, pos, plan, exclude=lambda a, b: bool(local_rule(a.features, b.features)))
    samples = tuple(Sample(s, d, 1.0) for s, d in pos) + tuple(Sample(s, d, 0.0) for s, d in negs)
    return TaskDataset(graph=graph, samples=samples, kind=TaskKind.CLASSIFICATION, nominal_radius=0, name="local_r0")


def cue_label(graph: SchemaGraph, edge, k: int) -> int:
    """Recompute a cue label from scratch (used by intervention tests)."""
    s, d = edge[0], edge[1]
    if k == 0:
        return local_rule(graph.feature_map[s], graph.feature_map[d])
    dist = distances_from(graph, (s, d), k)
    near = [dist[b] for b in graph.beacons if b in dist]
    return int(bool(near) and min(near) == k)


def beacon_target(graph: SchemaGraph, edge, horizon: int, decay: float = 0.5) -> float:
    """Decay-weighted count of beacon tables within ``horizon`` hops.

    A beacon at hop distance d (from the nearer endpoint) contributes
    ``decay ** (d - 1)``.
    """
    dist = distances_from(graph, (edge[0], edge[1]), horizon)
    return float(sum(decay ** (dist[b] - 1) for b in graph.beacons if b in dist and dist[b] >= 1))


def inject_radius_target(graph: SchemaGraph, k: int, seed: int = 0, beacon_fraction: float = 0.15,
                         decay: float = 0.5) -> TaskDataset:
    """Regression labels: :func:`beacon_target` with horizon ``k`` (k >= 1)."""
    if not 1 <= k <= MAX_RADIUS:
        raise ValueError(f"k must lie in [1, {MAX_RADIUS}]")
    rng = derive_rng(seed, "target", k)
    cands = [(e.src, e.dst) for e in graph.candidate_edges]
    if not cands:
        raise CueInfeasible("graph has no candidate edges")
    names = [t.name for t in graph.tables]
    n_b = max(1, int(round(beacon_fraction * len(names))))
    chosen = set(rng.choice(names, size=n_b, replace=False).tolist())
    graph = graph.with_roles({t: (BEACON if t in chosen else TABLE) for t in names})
    labels = [beacon_target(graph, c, k, decay) for c in cands]
    samples = tuple(Sample(s, d, float(y)) for (s, d), y in zip(cands, labels))
    return TaskDataset(
        graph=_labeled_graph(graph, samples),
        samples=samples,
        kind=TaskKind.REGRESSION,
        nominal_radius=k,
        name=f"target_r{k}",
    )


# ---------------------------------------------------------------------------
# permutation independence test


def _point_biserial_max(X, y):
    yc = y - y.mean()
    ys = np.sqrt((yc**2).sum())
    if ys == 0:
        return 0.0
    Xc = X - X.mean(axis=0)
    xs = np.sqrt((Xc**2).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(xs > 0, (Xc * yc[:, None]).sum(axis=0) / (xs * ys), 0.0)
    return float(np.abs(r).max(initial=0.0))


def verify_feature_independence(dataset: TaskDataset, n_permutations: int = 1000, seed: int = 0) -> float:
    """Permutation p-value of the max |point-biserial r| between 0-hop features and labels."""
    if len(dataset.samples) < 20:
        raise TooFewSamples("independence test needs at least 20 labeled edges")
    if n_permutations < 200:
        raise TooFewSamples("independence test needs at least 200 permutations")
    X = local_features(dataset.graph, dataset.anchors)
    y = dataset.labels
    observed = _point_biserial_max(X, y)
    rng = derive_rng(seed, "perm")
    Xc = X - X.mean(axis=0)
    xs = np.sqrt((Xc**2).sum(axis=0))
    exceed = 0
    for _ in range(n_permutations):
        yp = rng.permutation(y)
        yc = yp - yp.mean()
        ys = np.sqrt((yc**2).sum())
        if ys == 0:
            stat = 0.0
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                r = np.where(xs > 0, (Xc * yc[:, None]).sum(axis=0) / (xs * ys), 0.0)
            stat = float(np.abs(r).max(initial=0.0))
        if stat >= observed - 1e-12:
            exceed += 1
    return (exceed + 1) / (n_permutations + 1)


# ---------------------------------------------------------------------------
# config io


def load_params(path) -> GeneratorParams:
    """Read GeneratorParams from a JSON or TOML file (``[generator]`` table optional)."""
    text = open(path, "rb").read()
    if str(path).endswith(".toml"):
        import tomli

        data = tomli.loads(text.decode("utf-8"))
    else:
        data = json.loads(text)
    data = data.get("generator", data)
    return GeneratorParams.from_dict(data)
