"""Seeding, apportionment and input validation helpers."""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeMismatch


def derive_rng(seed: int, *stream) -> np.random.Generator:
    """Independent generator for ``(seed, *stream)``; stream items are ints or strings."""
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    for s in stream:
        if isinstance(s, str):
            words.extend(s.encode("utf-8"))
        else:
            words.append(int(s) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(words))


def allocate_counts(weights, n: int) -> np.ndarray:
    """Largest-remainder apportionment of ``n`` items to ``weights``."""
    w = np.asarray(weights, dtype=float)
    raw = w * n
    base = np.floor(raw).astype(int)
    short = n - base.sum()
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:short]] += 1
    return base


def check_matrix(X, n_cols: int | None = None, name: str = "X") -> np.ndarray:
    """2-D finite float64 array, optionally with a fixed column count."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got shape {X.shape}")
    if n_cols is not None and X.shape[1] != n_cols:
        raise ShapeMismatch(f"{name} has {X.shape[1]} columns, expected {n_cols}")
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contains NaN or infinite values")
    return X


def check_vector(y, n: int | None = None, name: str = "y") -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    if n is not None and len(y) != n:
        raise ShapeMismatch(f"{name} has length {len(y)}, expected {n}")
    if not np.isfinite(y).all():
        raise ValueError(f"{name} contains NaN or infinite values")
    return y


def check_binary(y, name: str = "y") -> np.ndarray:
    y = check_vector(y, name=name)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError(f"{name} must contain only 0/1 labels")
    return y
