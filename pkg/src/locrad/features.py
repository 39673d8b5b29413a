"""Edge and node feature construction.

Edge vectors have a fixed 56-dim layout: 40 lexical, 8 type/statistics,
8 structural. Structural features are always computed on the graph with
foreign-key edges removed so ground-truth links never reach model inputs.
"""

from __future__ import annotations

import math
import re
from typing import Protocol

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import EmptyName, UnknownNode
from .graph import ATTRIBUTE, BEACON, TABLE, DataType, EdgeKind, FeatureRecord, SchemaGraph, endpoints

LEXICAL_DIM = 40
TYPESTAT_DIM = 8
STRUCTURAL_DIM = 8
FEATURE_DIM = LEXICAL_DIM + TYPESTAT_DIM + STRUCTURAL_DIM
N_BUCKETS = 32
LAYOUT_VERSION = 1
LAYOUT = {
    "lexical": (0, LEXICAL_DIM),
    "typestat": (LEXICAL_DIM, LEXICAL_DIM + TYPESTAT_DIM),
    "structural": (LEXICAL_DIM + TYPESTAT_DIM, FEATURE_DIM),
}

FEATURE_NAMES = (
    [f"lex_trigram_{i:02d}" for i in range(N_BUCKETS)]
    + [
        "lex_token_jaccard",
        "lex_edit_distance",
        "lex_prefix_match",
        "lex_suffix_match",
        "lex_exact_match",
        "lex_length_ratio",
        "lex_reserved_0",
        "lex_reserved_1",
    ]
    + [
        "ts_type_equal",
        "ts_type_coercible",
        "ts_distinct_ratio",
        "ts_containment",
        "ts_null_diff",
        "ts_row_log_ratio",
        "ts_length_ratio",
        "ts_dst_unique",
    ]
    + [
        "st_src_table_degree",
        "st_dst_table_degree",
        "st_src_attr_degree",
        "st_dst_attr_degree",
        "st_src_out_candidates",
        "st_dst_in_candidates",
        "st_src_neighbor_type_entropy",
        "st_dst_neighbor_type_entropy",
    ]
)

_NUMERIC = {DataType.INT, DataType.FLOAT, DataType.BOOL}
_TEXTUAL = {DataType.TEXT, DataType.DATE}
_DEGREE_CAP = 64


def type_class(t: DataType) -> str:
    return "numeric" if DataType(t) in _NUMERIC else "textual"


def types_coercible(a: DataType, b: DataType) -> bool:
    return type_class(a) == type_class(b)


# ---------------------------------------------------------------------------
# string helpers


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def tokenize(name: str) -> list[str]:
    spaced = re.sub(r"([a-z0-9])([A-Z])", r"\1_\2", name)
    return [t for t in re.split(r"[^a-z0-9]+", spaced.lower()) if t]


def trigrams(name: str) -> list[str]:
    s = f"^{name.lower()}$"
    return [s[i : i + 3] for i in range(len(s) - 2)]


def trigram_buckets(name: str, n_buckets: int = N_BUCKETS) -> np.ndarray:
    v = np.zeros(n_buckets)
    for g in trigrams(name):
        v[fnv1a64(g.encode("utf-8")) % n_buckets] += 1.0
    return v


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def token_jaccard(name_a: str, name_b: str) -> float:
    ta, tb = set(tokenize(name_a)), set(tokenize(name_b))
    if not ta and not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def trigram_overlap(name_a: str, name_b: str) -> float:
    """Jaccard overlap of exact (unhashed) padded trigram sets."""
    ga, gb = set(trigrams(name_a)), set(trigrams(name_b))
    if not ga or not gb:
        return 0.0
    return len(ga & gb) / len(ga | gb)


# ---------------------------------------------------------------------------
# lexical


class LexicalEncoder(Protocol):
    def encode(self, name_a: str, name_b: str) -> np.ndarray:
        """Return a 32-dim vector with entries in [0, 1]."""


class HashedTrigramEncoder:
    """Per-bucket cosine contributions of hashed character-trigram counts.

    The 32 entries sum to the cosine similarity of the two bucket vectors.
    """

    def encode(self, name_a, name_b):
        va, vb = trigram_buckets(name_a), trigram_buckets(name_b)
        na, nb = np.linalg.norm(va), np.linalg.norm(vb)
        if na == 0 or nb == 0:
            return np.zeros(N_BUCKETS)
        return va * vb / (na * nb)


class PrecomputedEmbeddingEncoder:
    """Use externally supplied per-name vectors (e.g. language-model embeddings).

    Vectors are folded into 32 buckets by index modulo 32 and compared the
    same way as hashed trigrams. Unknown names fall back to ``fallback``.
    """

    def __init__(self, vectors: dict[str, np.ndarray], fallback: LexicalEncoder | None = None):
        self.vectors = vectors
        self.fallback = fallback or HashedTrigramEncoder()

    def _fold(self, v):
        v = np.abs(np.asarray(v, dtype=float))
        out = np.zeros(N_BUCKETS)
        np.add.at(out, np.arange(len(v)) % N_BUCKETS, v)
        return out

    def encode(self, name_a, name_b):
        if name_a not in self.vectors or name_b not in self.vectors:
            return self.fallback.encode(name_a, name_b)
        va, vb = self._fold(self.vectors[name_a]), self._fold(self.vectors[name_b])
        na, nb = np.linalg.norm(va), np.linalg.norm(vb)
        if na == 0 or nb == 0:
            return np.zeros(N_BUCKETS)
        return va * vb / (na * nb)


_DEFAULT_ENCODER = HashedTrigramEncoder()


def lexical_features(name_a: str, name_b: str, encoder: LexicalEncoder | None = None) -> np.ndarray:
    if not name_a or not name_b:
        raise EmptyName("attribute names must be nonempty")
    enc = encoder or _DEFAULT_ENCODER
    out = np.zeros(LEXICAL_DIM)
    out[:N_BUCKETS] = np.clip(enc.encode(name_a, name_b), 0.0, 1.0)
    a, b = name_a.lower(), name_b.lower()
    out[32] = token_jaccard(a, b)
    out[33] = levenshtein(a, b) / max(len(a), len(b))
    out[34] = float(a.startswith(b) or b.startswith(a))
    out[35] = float(a.endswith(b) or b.endswith(a))
    out[36] = float(a == b)
    out[37] = min(len(a), len(b)) / max(len(a), len(b))
    return out


# ---------------------------------------------------------------------------
# type / statistics


def typestat_features(a: FeatureRecord, b: FeatureRecord) -> np.ndarray:
    out = np.zeros(TYPESTAT_DIM)
    out[0] = float(a.data_type == b.data_type)
    out[1] = float(types_coercible(a.data_type, b.data_type))
    out[2] = min(1.0, a.distinct_count / max(1, b.distinct_count))
    out[3] = float(a.distinct_count <= b.distinct_count)
    out[4] = abs(a.null_fraction - b.null_fraction)
    if a.row_count > 0 and b.row_count > 0:
        lr = float(np.clip(math.log10(a.row_count / b.row_count), -3.0, 3.0))
        out[5] = (lr + 3.0) / 6.0
        out[7] = float(b.distinct_count == b.row_count)
    if a.mean_length > 0 and b.mean_length > 0:
        out[6] = min(a.mean_length, b.mean_length) / max(a.mean_length, b.mean_length)
    return out


# ---------------------------------------------------------------------------
# structural


def _scaled_log(count: int) -> float:
    return min(1.0, math.log1p(count) / math.log1p(_DEGREE_CAP))


def _entropy(types: list[DataType]) -> float:
    if not types:
        return 0.0
    _, counts = np.unique([t.value for t in types], return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum() / math.log(len(DataType)))


class _StructuralIndex:
    """Candidate-edge incidence of a graph, FK edges excluded by construction."""

    def __init__(self, graph: SchemaGraph):
        self.graph = graph
        self.out: dict[str, list[str]] = {}
        self.inc: dict[str, list[str]] = {}
        for e in graph.edges:
            if e.kind is not EdgeKind.CANDIDATE or e.src == e.dst:
                continue
            self.out.setdefault(e.src, []).append(e.dst)
            self.inc.setdefault(e.dst, []).append(e.src)

    def _owner(self, node):
        if node in self.graph.attribute_map:
            return self.graph.attribute_map[node].table
        return node

    def _attr_edges(self, node, anchor):
        edges = [(node, d) for d in self.out.get(node, [])] + [(s, node) for s in self.inc.get(node, [])]
        return [e for e in edges if e != anchor]

    def vector(self, src, dst) -> np.ndarray:
        g = self.graph
        for n in (src, dst):
            if not g.has_node(n):
                raise UnknownNode(n)
        anchor = (src, dst)
        out = np.zeros(STRUCTURAL_DIM)
        for slot, node in ((0, src), (1, dst)):
            table = self._owner(node)
            members = g.table_attributes.get(table, ())
            tdeg = sum(len(self._attr_edges(m, anchor)) for m in members)
            out[slot] = _scaled_log(tdeg)
            edges = self._attr_edges(node, anchor)
            out[2 + slot] = _scaled_log(len(edges))
            nbr_types = []
            for s, d in edges:
                other = d if s == node else s
                if other in g.feature_map:
                    nbr_types.append(g.feature_map[other].data_type)
            out[6 + slot] = _entropy(nbr_types)
        out[4] = _scaled_log(sum(1 for d in self.out.get(src, []) if (src, d) != anchor))
        out[5] = _scaled_log(sum(1 for s in self.inc.get(dst, []) if (s, dst) != anchor))
        return out


def structural_features(graph: SchemaGraph, edge) -> np.ndarray:
    src, dst = endpoints(edge)
    return _StructuralIndex(graph.without_kinds([EdgeKind.FOREIGN_KEY])).vector(src, dst)


# ---------------------------------------------------------------------------
# full edge vectors


def record_for(graph: SchemaGraph, node: str) -> FeatureRecord:
    """FeatureRecord of an attribute; tables get a name-only pseudo record."""
    rec = graph.feature_map.get(node)
    if rec is not None:
        return rec
    if node in graph.table_map:
        rows = max((graph.feature_map[a].row_count for a in graph.table_attributes.get(node, ())), default=0)
        return FeatureRecord(name=node, data_type=DataType.TEXT, row_count=rows)
    raise UnknownNode(node)


def local_features(graph: SchemaGraph, anchors, encoder=None) -> np.ndarray:
    """0-hop (lexical + type/statistics) rows for each anchor."""
    rows = []
    for a in anchors:
        s, d = endpoints(a)
        ra, rb = record_for(graph, s), record_for(graph, d)
        rows.append(np.concatenate([lexical_features(ra.name, rb.name, encoder), typestat_features(ra, rb)]))
    return np.array(rows).reshape(len(rows), LEXICAL_DIM + TYPESTAT_DIM)


def edge_feature_matrix(graph: SchemaGraph, anchors, encoder=None) -> np.ndarray:
    """Unscaled 56-dim feature rows; every entry lies in [0, 1]."""
    anchors = [endpoints(a) for a in anchors]
    idx = _StructuralIndex(graph.without_kinds([EdgeKind.FOREIGN_KEY]))
    local = local_features(graph, anchors, encoder)
    struct = np.array([idx.vector(s, d) for s, d in anchors]).reshape(len(anchors), STRUCTURAL_DIM)
    return np.hstack([local, struct])


class EdgeFeaturizer(TransformerMixin, BaseEstimator):
    """Map anchors ``(src, dst)`` of ``graph`` to scaled 56-dim vectors.

    Min-max scaling is fitted on the rows passed to ``fit`` (the training
    split) and applied, clipped to [0, 1], everywhere else.
    """

    def __init__(self, graph=None, encoder=None, scale=True):
        self.graph = graph
        self.encoder = encoder
        self.scale = scale

    def fit(self, X, y=None):
        raw = edge_feature_matrix(self.graph, X, self.encoder)
        self.min_ = raw.min(axis=0) if len(raw) else np.zeros(FEATURE_DIM)
        self.max_ = raw.max(axis=0) if len(raw) else np.ones(FEATURE_DIM)
        self.n_features_out_ = FEATURE_DIM
        return self

    def transform(self, X):
        check_is_fitted(self, "min_")
        raw = edge_feature_matrix(self.graph, X, self.encoder)
        if not self.scale:
            return raw
        span = self.max_ - self.min_
        out = np.where(span > 0, (raw - self.min_) / np.where(span > 0, span, 1.0), 0.0)
        return np.clip(out, 0.0, 1.0)

    def get_feature_names_out(self, input_features=None):
        return np.array(FEATURE_NAMES, dtype=object)


def export_csv(path, matrix, anchors=None):
    """Write a feature matrix with a header naming each dimension."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = (["src", "dst"] if anchors is not None else []) + list(FEATURE_NAMES)
        w.writerow(head)
        for i, row in enumerate(np.asarray(matrix)):
            prefix = list(endpoints(anchors[i])) if anchors is not None else []
            w.writerow(prefix + [repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# node features for message passing

NODE_BUCKETS = 16
NODE_FEATURE_DIM = 3 + len(DataType) + 5 + NODE_BUCKETS
_TYPE_ORDER = list(DataType)


def node_feature_matrix(graph: SchemaGraph) -> np.ndarray:
    """Per-node input rows (ordered as ``graph.node_ids``), entries in [0, 1].

    Columns: category one-hot (table, beacon, attribute), data-type one-hot,
    scaled log distinct count, scaled log row count, null fraction, scaled
    mean length, uniqueness flag, then L2-normalized hashed name trigrams.
    """
    X = np.zeros((len(graph.node_ids), NODE_FEATURE_DIM))
    for i, nid in enumerate(graph.node_ids):
        cat = graph.category(nid)
        X[i, {TABLE: 0, BEACON: 1, ATTRIBUTE: 2}[cat]] = 1.0
        if cat != ATTRIBUTE:
            continue
        f = graph.feature_map[nid]
        X[i, 3 + _TYPE_ORDER.index(f.data_type)] = 1.0
        o = 3 + len(DataType)
        X[i, o] = min(1.0, math.log10(1 + f.distinct_count) / 7.0)
        X[i, o + 1] = min(1.0, math.log10(1 + f.row_count) / 7.0)
        X[i, o + 2] = f.null_fraction
        X[i, o + 3] = min(1.0, f.mean_length / 64.0)
        X[i, o + 4] = float(f.row_count > 0 and f.distinct_count == f.row_count)
        b = trigram_buckets(f.name, NODE_BUCKETS)
        n = np.linalg.norm(b)
        if n > 0:
            X[i, o + 5 :] = b / n
    return X
