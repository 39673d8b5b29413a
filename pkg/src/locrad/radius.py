"""Empirical relational-radius estimation.

A sample's k-signature is a 128-bit Weisfeiler-Lehman digest of its k-hop
neighborhood, seeded with node category, quantized node features and the
anchor role of each node. The estimated radius is the smallest k at which
equal signatures never carry different labels; for every smaller k a
colliding pair with different labels is kept as a certificate.
"""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import permutations
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .graph import ATTRIBUTE, SchemaGraph, endpoints, k_hop_neighborhood

NOT_DETERMINED = None
SMALL_NEIGHBORHOOD = 8


def _quant(x: float) -> str:
    return format(float(x), ".3g")


def feature_token(graph: SchemaGraph, node_id: str) -> str:
    """Quantized, hashable description of a node's own features."""
    cat = graph.category(node_id)
    if cat != ATTRIBUTE:
        return cat
    f = graph.feature_map[node_id]
    return "|".join(
        (
            cat,
            f.name,
            f.data_type.value,
            _quant(f.distinct_count),
            _quant(f.row_count),
            _quant(f.null_fraction),
            _quant(f.mean_length),
        )
    )


def _h(payload: str, size: int = 8) -> str:
    return hashlib.blake2b(payload.encode("utf-8"), digest_size=size).hexdigest()


def _role(node, src, dst) -> str:
    if node == src and node == dst:
        return "sd"
    if node == src:
        return "s"
    if node == dst:
        return "d"
    return "-"


def _initial_colors(graph, nodes, src, dst, tokens=None):
    out = {}
    for v in nodes:
        tok = tokens[v] if tokens is not None else feature_token(graph, v)
        out[v] = _h(f"{tok}#{_role(v, src, dst)}")
    return out


def _local_adjacency(nodes, edges):
    adj = {v: [] for v in nodes}
    for e in edges:
        if e.src == e.dst:
            continue
        adj[e.src].append((e.dst, e.kind.value, ">"))
        adj[e.dst].append((e.src, e.kind.value, "<"))
    return adj


def khop_signature(graph: SchemaGraph, edge, k: int, wl_rounds: int | None = None, kinds=None, _tokens=None) -> bytes:
    """128-bit digest of the k-hop neighborhood of ``edge``.

    ``wl_rounds`` defaults to ``max(k, 1)`` and must be at least ``k``.
    """
    if wl_rounds is None:
        wl_rounds = max(k, 1)
    if wl_rounds < k or wl_rounds < 1:
        raise ValueError("wl_rounds must be positive and >= k")
    src, dst = endpoints(edge)
    nb = k_hop_neighborhood(graph, (src, dst), k, kinds)
    colors = _initial_colors(graph, nb.nodes, src, dst, _tokens)
    adj = _local_adjacency(nb.nodes, nb.edges)
    for _ in range(wl_rounds):
        colors = {
            v: _h(colors[v] + "(" + ",".join(sorted(f"{kd}{dr}{colors[u]}" for u, kd, dr in adj[v])) + ")")
            for v in nb.nodes
        }
    payload = ",".join(sorted(colors.values())) + "|" + colors[src] + "|" + colors[dst]
    return hashlib.blake2b(payload.encode("utf-8"), digest_size=16).digest()


def neighborhoods_isomorphic(graph_a: SchemaGraph, edge_a, graph_b: SchemaGraph, edge_b, k: int, kinds=None) -> bool:
    """Exact check by backtracking over color-preserving bijections.

    Anchors are fixed because anchor role is part of each node's color.
    Intended for small neighborhoods (a handful of nodes).
    """
    sa, da = endpoints(edge_a)
    sb, db = endpoints(edge_b)
    na = k_hop_neighborhood(graph_a, (sa, da), k, kinds)
    nbh = k_hop_neighborhood(graph_b, (sb, db), k, kinds)
    if len(na.nodes) != len(nbh.nodes) or len(na.edges) != len(nbh.edges):
        return False
    col_a = {v: f"{feature_token(graph_a, v)}#{_role(v, sa, da)}" for v in na.nodes}
    col_b = {v: f"{feature_token(graph_b, v)}#{_role(v, sb, db)}" for v in nbh.nodes}
    if sorted(col_a.values()) != sorted(col_b.values()):
        return False
    edges_a = sorted((e.src, e.dst, e.kind.value) for e in na.edges)
    edges_b = {(e.src, e.dst, e.kind.value) for e in nbh.edges}
    nodes_a = list(na.nodes)
    if len(nodes_a) > 10:
        raise ValueError("brute-force isomorphism is limited to 10 nodes")
    for perm in permutations(nbh.nodes):
        mapping = dict(zip(nodes_a, perm))
        if any(col_a[v] != col_b[mapping[v]] for v in nodes_a):
            continue
        if all((mapping[s], mapping[d], kd) in edges_b for s, d, kd in edges_a):
            return True
    return False


def label_classes(labels: Sequence[float], regression: bool) -> np.ndarray:
    """Discrete classes for collision checking; regression labels go to deciles."""
    y = np.asarray(labels, dtype=float)
    if not regression:
        return y.astype(int)
    if len(y) == 0:
        return y.astype(int)
    cuts = np.unique(np.quantile(y, np.linspace(0.1, 0.9, 9)))
    return np.searchsorted(cuts, y, side="right")


@dataclass
class RadiusEstimate:
    r_hat: int | None
    k_max_searched: int
    certificate: dict[int, tuple[int, int]] = field(default_factory=dict)
    determinacy_rate: dict[int, float] = field(default_factory=dict)

    @property
    def determined(self) -> bool:
        return self.r_hat is not NOT_DETERMINED

    def to_dict(self, samples=None) -> dict:
        cert = {}
        for k, (i, j) in sorted(self.certificate.items()):
            entry = {"i": i, "j": j}
            if samples is not None:
                entry["a"] = list(endpoints(samples[i]))
                entry["b"] = list(endpoints(samples[j]))
            cert[str(k)] = entry
        return {
            "r_hat": self.r_hat,
            "determined": self.determined,
            "k_max_searched": self.k_max_searched,
            "determinacy_rate": {str(k): v for k, v in sorted(self.determinacy_rate.items())},
            "certificate": cert,
        }


def _level(graph, anchors, classes, k, wl_rounds, kinds, tokens, verify_small):
    digests = [khop_signature(graph, a, k, max(wl_rounds or k, k, 1), kinds, tokens) for a in anchors]
    groups: dict[bytes, list[int]] = defaultdict(list)
    for i, d in enumerate(digests):
        groups[d].append(i)
    pure = 0
    witness = None
    for d in sorted(groups):
        members = groups[d]
        labels = {classes[i] for i in members}
        if len(labels) == 1:
            pure += len(members)
            continue
        pair = _find_witness(graph, anchors, classes, members, k, kinds, verify_small)
        if pair is None:
            pure += len(members)
        elif witness is None:
            witness = pair
    return witness, pure / max(len(anchors), 1), digests


def _find_witness(graph, anchors, classes, members, k, kinds, verify_small):
    first = members[0]
    for j in members[1:]:
        if classes[j] == classes[first]:
            continue
        if verify_small:
            na = k_hop_neighborhood(graph, anchors[first], k, kinds)
            nb = k_hop_neighborhood(graph, anchors[j], k, kinds)
            if len(na.nodes) <= SMALL_NEIGHBORHOOD and len(nb.nodes) <= SMALL_NEIGHBORHOOD:
                if not neighborhoods_isomorphic(graph, anchors[first], graph, anchors[j], k, kinds):
                    continue
        return (first, j)
    # fall back to any differing pair not involving ``first``
    by_label = defaultdict(list)
    for i in members:
        by_label[classes[i]].append(i)
    keys = sorted(by_label)
    for a in by_label[keys[0]]:
        for lab in keys[1:]:
            for b in by_label[lab]:
                if a == first:
                    continue
                if verify_small:
                    na = k_hop_neighborhood(graph, anchors[a], k, kinds)
                    nb = k_hop_neighborhood(graph, anchors[b], k, kinds)
                    if len(na.nodes) <= SMALL_NEIGHBORHOOD and len(nb.nodes) <= SMALL_NEIGHBORHOOD:
                        if not neighborhoods_isomorphic(graph, anchors[a], graph, anchors[b], k, kinds):
                            continue
                return (min(a, b), max(a, b))
    return None


def estimate_radius(dataset, k_max: int = 5, wl_rounds: int | None = None, exhaustive: bool = False,
                    verify_small: bool = True) -> RadiusEstimate:
    """Smallest k <= k_max at which k-signatures determine the labels.

    With ``exhaustive=True`` determinacy rates are reported for every
    k <= k_max, not just up to the estimate.
    """
    graph = dataset.graph
    anchors = [(s.src, s.dst) for s in dataset.samples]
    classes = label_classes([s.label for s in dataset.samples], dataset.is_regression)
    kinds = dataset.message_kinds
    tokens = {v: feature_token(graph, v) for v in graph.node_ids}
    est = RadiusEstimate(NOT_DETERMINED, 0)
    for k in range(k_max + 1):
        witness, rate, _ = _level(graph, anchors, classes, k, wl_rounds, kinds, tokens, verify_small)
        est.determinacy_rate[k] = rate
        est.k_max_searched = k
        if witness is None:
            if est.r_hat is NOT_DETERMINED:
                est.r_hat = k
            if not exhaustive:
                break
        elif est.r_hat is NOT_DETERMINED:
            est.certificate[k] = witness
    return est


def verify_certificate(dataset, estimate: RadiusEstimate, wl_rounds: int | None = None) -> bool:
    """Recheck every witness: equal digests at its level, different labels."""
    classes = label_classes([s.label for s in dataset.samples], dataset.is_regression)
    for k, (i, j) in estimate.certificate.items():
        a, b = dataset.samples[i], dataset.samples[j]
        if classes[i] == classes[j]:
            return False
        rounds = max(wl_rounds or k, k, 1)
        sa = khop_signature(dataset.graph, (a.src, a.dst), k, rounds, dataset.message_kinds)
        sb = khop_signature(dataset.graph, (b.src, b.dst), k, rounds, dataset.message_kinds)
        if sa != sb:
            return False
    return True


class RadiusEstimator(BaseEstimator):
    """Estimator wrapper: ``fit(dataset)`` sets ``r_hat_`` and friends."""

    def __init__(self, k_max=5, wl_rounds=None, exhaustive=False, verify_small=True):
        self.k_max = k_max
        self.wl_rounds = wl_rounds
        self.exhaustive = exhaustive
        self.verify_small = verify_small

    def fit(self, dataset, y=None):
        est = estimate_radius(dataset, self.k_max, self.wl_rounds, self.exhaustive, self.verify_small)
        self.estimate_ = est
        self.r_hat_ = est.r_hat
        self.certificate_ = est.certificate
        self.determinacy_rate_ = est.determinacy_rate
        return self
