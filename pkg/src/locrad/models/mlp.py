"""0-hop edge model: fully connected ReLU stack on edge feature vectors."""

from __future__ import annotations

import numpy as np

from ..exceptions import ShapeMismatch
from ..utils import check_matrix
from .nn import dropout_mask
from .spec import Family


def _check(spec, X):
    if spec.family is not Family.MLP:
        raise ShapeMismatch(f"expected an MLP spec, got {spec.family.value}")
    return check_matrix(X, spec.in_dim, "edge features")


def mlp_scores(params, spec, X, train=False, seed=0, epoch=0, cache=None) -> np.ndarray:
    """Scores for every row of ``X``. With ``cache`` (a dict) the activations
    needed by :func:`mlp_backward` are stored there."""
    X = _check(spec, X)
    h = X
    acts = [h]
    masks = []
    for i in range(spec.depth_k):
        z = h @ params[f"W{i}"] + params[f"b{i}"]
        h = np.maximum(z, 0.0)
        mask = dropout_mask(h.shape, spec.dropout, seed, epoch, i) if train else None
        if mask is not None:
            h = h * mask
        masks.append(mask)
        acts.append(h)
    out = (h @ params["W_out"] + params["b_out"])[:, 0]
    if cache is not None:
        cache["acts"] = acts
        cache["masks"] = masks
    return out


def mlp_backward(params, spec, cache, dout) -> dict[str, np.ndarray]:
    acts, masks = cache["acts"], cache["masks"]
    grads = {}
    d = np.asarray(dout, dtype=float)[:, None]
    h = acts[-1]
    grads["W_out"] = h.T @ d
    grads["b_out"] = d.sum(axis=0)
    dh = d @ params["W_out"].T
    for i in reversed(range(spec.depth_k)):
        if masks[i] is not None:
            dh = dh * masks[i]
        # post-activation > 0 iff pre-activation > 0 (mask scaling is positive)
        dz = dh * (acts[i + 1] > 0)
        grads[f"W{i}"] = acts[i].T @ dz
        grads[f"b{i}"] = dz.sum(axis=0)
        dh = dz @ params[f"W{i}"].T
    return grads


def mlp_forward(edge_features, spec, params) -> float | np.ndarray:
    """Inference score(s); a single vector gives a float."""
    x = np.asarray(edge_features, dtype=float)
    out = mlp_scores(params, spec, x)
    return float(out[0]) if x.ndim == 1 else out
