"""Evaluation metrics for edge classifiers and regressors."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .exceptions import DegenerateLabels, ShapeMismatch, ZeroVariance


def _sigmoid(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _pair(scores, labels, min_len=1):
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels, dtype=float).ravel()
    if len(s) != len(y):
        raise ShapeMismatch("scores and labels differ in length")
    if len(s) < min_len:
        raise ValueError(f"need at least {min_len} samples")
    return s, y


def confusion(pred, labels):
    pred = np.asarray(pred, dtype=bool)
    y = np.asarray(labels) == 1
    tp = int((pred & y).sum())
    fp = int((pred & ~y).sum())
    fn = int((~pred & y).sum())
    tn = int((~pred & ~y).sum())
    return tp, fp, fn, tn


def precision_recall_f1(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def f1_score(scores, labels, threshold: float = 0.5, logits: bool = True) -> float:
    s, y = _pair(scores, labels)
    p = _sigmoid(s) if logits else s
    return precision_recall_f1(*confusion(p >= threshold, y)[:3])[2]


def roc_auc(scores, labels) -> float:
    """Mann-Whitney rank statistic with mid-ranks for ties."""
    s, y = _pair(scores, labels)
    n1 = int((y == 1).sum())
    n0 = len(y) - n1
    if n1 == 0 or n0 == 0:
        raise DegenerateLabels("ROC-AUC needs both classes")
    r = rankdata(s)
    u = r[y == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def pr_auc(scores, labels) -> float:
    """Average precision: step interpolation of the precision-recall curve.

    Tied scores enter as one threshold step.
    """
    s, y = _pair(scores, labels)
    n1 = int((y == 1).sum())
    if n1 == 0 or n1 == len(y):
        raise DegenerateLabels("PR-AUC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    tps = np.cumsum(y == 1)
    fps = np.cumsum(y == 0)
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp, fp = tps[last], fps[last]
    precision = tp / (tp + fp)
    recall = tp / n1
    prev = np.r_[0.0, recall[:-1]]
    return float(((recall - prev) * precision).sum())


def ece(probs, labels, n_bins: int = 10) -> float:
    """Expected calibration error over equal-width bins; empty bins are skipped.

    Each bin's confidence is the mean predicted probability of class 1 and
    its accuracy the observed frequency of class 1.
    """
    p, y = _pair(probs, labels)
    if n_bins < 1:
        raise ValueError("n_bins must be positive")
    if ((p < 0) | (p > 1)).any():
        raise ValueError("probabilities must lie in [0, 1]")
    bins = np.minimum((p * n_bins).astype(int), n_bins - 1)
    total = 0.0
    for b in range(n_bins):
        m = bins == b
        if not m.any():
            continue
        total += m.sum() / len(p) * abs(y[m].mean() - p[m].mean())
    return float(total)


def calibration_bins(probs, labels, n_bins: int = 10) -> list[dict]:
    """Per-bin counts, confidence and accuracy (for reliability plots)."""
    p, y = _pair(probs, labels)
    bins = np.minimum((p * n_bins).astype(int), n_bins - 1)
    rows = []
    for b in range(n_bins):
        m = bins == b
        rows.append(
            {
                "bin": b,
                "lo": b / n_bins,
                "hi": (b + 1) / n_bins,
                "count": int(m.sum()),
                "confidence": float(p[m].mean()) if m.any() else float("nan"),
                "accuracy": float(y[m].mean()) if m.any() else float("nan"),
            }
        )
    return rows


def classification_metrics(scores, labels, threshold: float = 0.5, logits: bool = True) -> dict[str, float]:
    """F1/precision/recall at ``threshold`` on sigmoid(score), plus ROC-AUC,
    PR-AUC and ECE. AUCs are NaN when only one class is present."""
    s, y = _pair(scores, labels)
    p = _sigmoid(s) if logits else s
    precision, recall, f1 = precision_recall_f1(*confusion(p >= threshold, y)[:3])
    out = {"f1": f1, "precision": precision, "recall": recall}
    try:
        out["roc_auc"] = roc_auc(s, y)
        out["pr_auc"] = pr_auc(s, y)
    except DegenerateLabels:
        out["roc_auc"] = float("nan")
        out["pr_auc"] = float("nan")
    out["ece"] = ece(p, y)
    return out


def r2_score(preds, targets) -> float:
    p, y = _pair(preds, targets, 2)
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0:
        raise ZeroVariance("targets have zero variance")
    return 1.0 - float(((y - p) ** 2).sum()) / sst


def regression_metrics(preds, targets) -> dict[str, float]:
    p, y = _pair(preds, targets, 2)
    return {"r2": r2_score(p, y), "mae": float(np.abs(p - y).mean())}
