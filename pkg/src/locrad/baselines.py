"""Non-learned FK baselines: a profile-statistics inclusion proxy and name similarity."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dataset import TEST, VAL, TaskDataset
from .exceptions import EmptyName
from .features import record_for, token_jaccard, trigram_overlap
from .graph import FeatureRecord, SchemaGraph, endpoints
from .metrics import classification_metrics, confusion, precision_recall_f1


class BaselineMethod(str, Enum):
    INCLUSION_PROXY = "inclusion_proxy"
    NAME_SIMILARITY = "name_similarity"


@dataclass(frozen=True)
class BaselineScore:
    edge: tuple[str, str]
    score: float
    method: BaselineMethod


def inclusion_proxy_score(a: FeatureRecord, b: FeatureRecord) -> float:
    """Evidence that the values of ``a`` are contained in a key column ``b``.

    Zero on a type mismatch. Otherwise the product of a containment term
    ``min(1, distinct_b / distinct_a)`` and a uniqueness term
    ``distinct_b / row_count_b``; both are 1 for a perfect containment profile.
    Unprofiled ``b`` (no rows) scores 0.
    """
    if a.data_type != b.data_type:
        return 0.0
    if b.row_count <= 0:
        return 0.0
    containment = 1.0 if a.distinct_count <= b.distinct_count else b.distinct_count / a.distinct_count
    uniqueness = min(1.0, b.distinct_count / b.row_count)
    return float(containment * uniqueness)


def name_similarity_score(name_a: str, name_b: str) -> float:
    """Larger of token Jaccard and exact trigram overlap."""
    if not name_a or not name_b:
        raise EmptyName("attribute names must be nonempty")
    return max(token_jaccard(name_a, name_b), trigram_overlap(name_a, name_b))


def score_edges(graph: SchemaGraph, anchors, method=BaselineMethod.NAME_SIMILARITY) -> list[BaselineScore]:
    method = BaselineMethod(method)
    out = []
    for anchor in anchors:
        s, d = endpoints(anchor)
        ra, rb = record_for(graph, s), record_for(graph, d)
        if method is BaselineMethod.INCLUSION_PROXY:
            v = inclusion_proxy_score(ra, rb)
        else:
            v = name_similarity_score(ra.name, rb.name)
        out.append(BaselineScore((s, d), v, method))
    return out


def select_threshold(scores, labels) -> float:
    """Threshold maximizing F1 of ``score >= t``; ties go to the larger ``t``."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    best_t, best_f1 = 1.0, -1.0
    for t in np.unique(s)[::-1]:
        f1 = precision_recall_f1(*confusion(s >= t, y)[:3])[2]
        if f1 > best_f1:
            best_t, best_f1 = float(t), f1
    return best_t


def evaluate_baseline(dataset: TaskDataset, method=BaselineMethod.NAME_SIMILARITY, split=None) -> dict[str, float]:
    """Threshold on the validation part, report metrics on the test part.

    ``split`` overrides ``dataset.split`` (one of train/val/test per sample).
    """
    assignment = split if split is not None else dataset.split
    if assignment is None:
        raise ValueError("dataset has no split assignment")
    scores = np.array([b.score for b in score_edges(dataset.graph, dataset.anchors, method)])
    y = dataset.labels
    part = np.asarray(assignment)
    val, test = part == VAL, part == TEST
    t = select_threshold(scores[val], y[val])
    out = classification_metrics(scores[test], y[test], threshold=t, logits=False)
    out["threshold"] = t
    return out
