"""k-layer mean-aggregation message passing network for edge scoring.

Layer ``l``: ``H' = ReLU([H, M H] W_l + b_l)`` where ``M`` is the row-normalized
adjacency (mean over neighbors; a node without neighbors aggregates to the
zero vector). The head scores an anchor ``(u, v)`` as
``[H_u, H_v] W_out + b_out``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..exceptions import ShapeMismatch, UnknownNode
from ..graph import SchemaGraph, endpoints
from ..utils import check_matrix
from .nn import dropout_mask
from .spec import Family


class GraphOperator:
    """Node indexing plus the mean-aggregation matrix of a graph."""

    def __init__(self, graph: SchemaGraph, kinds=None):
        self.graph = graph
        self.kinds = kinds
        self.index = graph.node_index
        nbrs = graph.neighbors(kinds)
        n = len(graph.node_ids)
        rows, cols, vals = [], [], []
        for v in graph.node_ids:
            ns = [u for u in nbrs[v] if u != v]
            if not ns:
                continue
            # column order follows node id order, so summation order is stable
            idx = sorted(self.index[u] for u in ns)
            w = 1.0 / len(idx)
            rows.extend([self.index[v]] * len(idx))
            cols.extend(idx)
            vals.extend([w] * len(idx))
        self.mean = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        self.mean.sort_indices()
        self.mean_t = self.mean.T.tocsr()

    def anchor_index(self, anchors) -> tuple[np.ndarray, np.ndarray]:
        src, dst = [], []
        for a in anchors:
            s, d = endpoints(a)
            try:
                src.append(self.index[s])
                dst.append(self.index[d])
            except KeyError as exc:
                raise UnknownNode(exc.args[0]) from None
        return np.array(src, dtype=int), np.array(dst, dtype=int)


def _check(spec, op, X):
    if spec.family is not Family.GNN:
        raise ShapeMismatch(f"expected a GNN spec, got {spec.family.value}")
    X = check_matrix(X, spec.in_dim, "node features")
    if X.shape[0] != len(op.index):
        raise ShapeMismatch(f"node features have {X.shape[0]} rows for {len(op.index)} nodes")
    return X


def propagate(params, spec, op: GraphOperator, X, train=False, seed=0, epoch=0, cache=None,
              validate=True) -> np.ndarray:
    """Node embeddings after ``spec.depth_k`` layers.

    ``validate=False`` skips input checks for callers that checked ``X`` once
    up front (the training loop).
    """
    H = _check(spec, op, X) if validate else X
    layers = []
    for i in range(spec.depth_k):
        agg = op.mean @ H
        cat = np.concatenate([H, agg], axis=1)
        Z = cat @ params[f"W{i}"] + params[f"b{i}"]
        H = np.maximum(Z, 0.0)
        mask = dropout_mask(H.shape, spec.dropout, seed, epoch, i) if train else None
        if mask is not None:
            H = H * mask
        layers.append((cat, H, mask))
    if cache is not None:
        cache["layers"] = layers
    return H


def gnn_scores(params, spec, op, X, src, dst, train=False, seed=0, epoch=0, cache=None,
               validate=True) -> np.ndarray:
    H = propagate(params, spec, op, X, train, seed, epoch, cache, validate)
    E = np.concatenate([H[src], H[dst]], axis=1)
    if cache is not None:
        cache.update(H=H, E=E, src=src, dst=dst)
    return (E @ params["W_out"] + params["b_out"])[:, 0]


def gnn_backward(params, spec, op, cache, dout) -> dict[str, np.ndarray]:
    grads = {}
    d = np.asarray(dout, dtype=float)[:, None]
    E, H, src, dst = cache["E"], cache["H"], cache["src"], cache["dst"]
    grads["W_out"] = E.T @ d
    grads["b_out"] = d.sum(axis=0)
    dE = d @ params["W_out"].T
    h = H.shape[1]
    dH = np.zeros_like(H)
    np.add.at(dH, src, dE[:, :h])
    np.add.at(dH, dst, dE[:, h:])
    for i in reversed(range(spec.depth_k)):
        cat, Hout, mask = cache["layers"][i]
        if mask is not None:
            dH = dH * mask
        dZ = dH * (Hout > 0)
        grads[f"W{i}"] = cat.T @ dZ
        grads[f"b{i}"] = dZ.sum(axis=0)
        dcat = dZ @ params[f"W{i}"].T
        d_in = dcat.shape[1] // 2
        dH = dcat[:, :d_in] + op.mean_t @ dcat[:, d_in:]
    return grads


def gnn_forward(graph: SchemaGraph, node_features, spec, edge, params, kinds=None):
    """Inference score of one anchor (or an array of scores for a list)."""
    op = GraphOperator(graph, kinds)
    single = isinstance(edge, tuple) or hasattr(edge, "src")
    anchors = [edge] if single else list(edge)
    src, dst = op.anchor_index(anchors)
    out = gnn_scores(params, spec, op, node_features, src, dst)
    return float(out[0]) if single else out
