"""Numeric building blocks: initialization, losses, dropout, Adam."""

from __future__ import annotations

import numpy as np

from ..utils import derive_rng


def init_params(spec, seed: int) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases; a pure function of ``seed``."""
    rng = derive_rng(seed, "init", spec.family.value)
    params = {}
    for name, shape in spec.param_shapes():
        if len(shape) == 2:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
        else:
            params[name] = np.zeros(shape)
    return params


def zeros_like_params(params):
    return {k: np.zeros_like(v) for k, v in params.items()}


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def dropout_mask(shape, rate: float, seed: int, epoch: int, layer: int) -> np.ndarray | None:
    """Inverted-dropout mask, fixed by ``(seed, epoch, layer)``."""
    if rate <= 0:
        return None
    rng = derive_rng(seed, "dropout", epoch, layer)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def auto_pos_weight(y) -> float:
    """``n_neg / n_pos``; 1 when a class is missing."""
    y = np.asarray(y)
    n_pos = float((y == 1).sum())
    n_neg = float((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return 1.0
    return n_neg / n_pos


def weighted_bce(logits, y, pos_weight: float = 1.0):
    """Mean of ``w_i * BCE(sigmoid(z_i), y_i)`` with ``w = pos_weight`` on
    positives and 1 on negatives. Returns ``(loss, dloss/dlogits)``."""
    z = np.asarray(logits, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.where(y == 1, pos_weight, 1.0)
    # log(1 + exp(-|z|)) form is stable for large |z|
    softplus = np.maximum(z, 0) + np.log1p(np.exp(-np.abs(z)))
    per = softplus - y * z
    n = len(z)
    loss = float((w * per).sum() / n)
    grad = w * (sigmoid(z) - y) / n
    return loss, grad


def mse(preds, y):
    p = np.asarray(preds, dtype=float)
    y = np.asarray(y, dtype=float)
    r = p - y
    n = len(p)
    return float((r * r).sum() / n), 2.0 * r / n


def l2_penalty(params, weight_decay):
    if weight_decay == 0:
        return 0.0
    return 0.5 * weight_decay * float(sum((v * v).sum() for v in params.values()))


class Adam:
    """Adam with L2 regularization folded into the gradient.

    Parameters live in one flat buffer (the dict holds views into it), so a
    step is a handful of vector operations whatever the number of tensors.
    The update is elementwise, hence identical to a per-tensor loop.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.keys = sorted(params)
        self.flat = np.concatenate([np.asarray(params[k], dtype=float).ravel() for k in self.keys])
        self.views = {}
        start = 0
        for k in self.keys:
            size = params[k].size
            self.views[k] = self.flat[start:start + size].reshape(params[k].shape)
            start += size
        self.m = np.zeros_like(self.flat)
        self.v = np.zeros_like(self.flat)
        self.t = 0

    def _sync(self, params):
        for k in self.keys:
            if params[k] is not self.views[k]:
                self.views[k][...] = params[k]
        return self.views

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1**self.t
        c2 = 1 - b2**self.t
        self._sync(params)
        g = np.concatenate([grads[k].ravel() for k in self.keys])
        if self.weight_decay:
            g = g + self.weight_decay * self.flat
        m, v = self.m, self.v
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        denom = np.sqrt(v / c2)
        denom += self.eps
        self.flat[...] = self.flat - (self.lr / c1) * m / denom
        params.update(self.views)
        return params
