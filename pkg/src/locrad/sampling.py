"""Negative sampling and train/val/test split construction."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .dataset import TEST, TRAIN, VAL, Sample, TaskDataset
from .exceptions import PoolExhausted, TooFewSamples
from .features import token_jaccard, types_coercible
from .graph import SchemaGraph, endpoints
from .utils import allocate_counts, derive_rng

log = logging.getLogger(__name__)

PARTS = (TRAIN, VAL, TEST)


@dataclass(frozen=True)
class SamplingPlan:
    ratio_neg_per_pos: float = 3.0
    mix: tuple[float, float, float] = (0.5, 0.3, 0.2)  # type-compatible, hard, random incompatible
    hard_similarity_threshold: float = 0.6
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mix", tuple(float(w) for w in self.mix))
        if self.ratio_neg_per_pos <= 0:
            raise ValueError("ratio_neg_per_pos must be positive")
        if len(self.mix) != 3 or min(self.mix) < 0 or abs(sum(self.mix) - 1.0) > 1e-9:
            raise ValueError("mix must be three nonnegative weights summing to 1")
        if not 0 <= self.hard_similarity_threshold <= 1:
            raise ValueError("hard_similarity_threshold must lie in [0, 1]")


def negative_pools(graph: SchemaGraph, positives, threshold: float, exclude=None):
    """Return the three strata as sorted lists of ordered attribute pairs.

    Pairs coinciding with a positive or with any FK edge are excluded, as are
    pairs of attribute nodes for which ``exclude(a, b)`` is true.
    """
    banned = {endpoints(p) for p in positives} | {(e.src, e.dst) for e in graph.fk_edges}
    attrs = graph.attributes
    compatible, hard, incompatible = [], [], []
    for a in attrs:
        for b in attrs:
            if a.id == b.id or a.table == b.table or (a.id, b.id) in banned:
                continue
            if exclude is not None and exclude(a, b):
                continue
            pair = (a.id, b.id)
            if types_coercible(a.features.data_type, b.features.data_type):
                compatible.append(pair)
            else:
                incompatible.append(pair)
            if token_jaccard(a.features.name, b.features.name) >= threshold:
                hard.append(pair)
    return compatible, hard, incompatible


def sample_negatives(graph: SchemaGraph, positives, plan: SamplingPlan | None = None,
                     exclude=None) -> list[tuple[str, str]]:
    """Draw ``round(ratio * |positives|)`` distinct negatives by stratum.

    Order of drawing is hard, random incompatible, then type-compatible;
    shortfalls in the first two spill into the type-compatible stratum.
    """
    plan = plan or SamplingPlan()
    positives = list(positives)
    n = int(round(plan.ratio_neg_per_pos * len(positives)))
    compatible, hard, incompatible = negative_pools(graph, positives, plan.hard_similarity_threshold, exclude)
    union = set(compatible) | set(hard) | set(incompatible)
    if len(union) < n:
        raise PoolExhausted(f"requested {n} negatives but only {len(union)} candidate pairs exist")
    want_c, want_h, want_r = allocate_counts(plan.mix, n)
    rng = derive_rng(plan.seed, "negatives")
    chosen: list[tuple[str, str]] = []
    taken: set = set()

    def draw(pool, k, label):
        avail = [p for p in pool if p not in taken]
        if k > len(avail):
            log.warning("%s stratum has %d pairs for %d requested; deficit spills over", label, len(avail), k)
        k = min(k, len(avail))
        if k:
            idx = np.sort(rng.choice(len(avail), size=k, replace=False))
            for i in idx:
                chosen.append(avail[i])
                taken.add(avail[i])
        return k

    deficit = want_h - draw(hard, want_h, "hard")
    deficit += want_r - draw(incompatible, want_r, "random")
    need = want_c + deficit
    got = draw(compatible, need, "type-compatible")
    if got < need:
        rest = sorted(union - taken)
        draw(rest, need - got, "leftover")
    return chosen


def fk_dataset(graph: SchemaGraph, plan: SamplingPlan | None = None) -> TaskDataset:
    """FK discovery dataset: candidate/FK positives plus sampled negatives."""
    from .tasks import fk_labels

    pos = fk_labels(graph)
    negs = sample_negatives(graph, pos.anchors, plan)
    samples = pos.samples + tuple(Sample(s, d, 0.0) for s, d in negs)
    return pos.replace(samples=samples)


# ---------------------------------------------------------------------------
# splits


def _check_fractions(fractions):
    f = np.asarray(fractions, dtype=float)
    if f.shape != (3,) or f.min() < 0 or abs(f.sum() - 1) > 1e-9:
        raise ValueError("fractions must be three nonnegative numbers summing to 1")
    return f


def split(samples, fractions=(0.7, 0.15, 0.15), stratify: bool = True, seed: int = 0) -> list[str]:
    """Assign every sample to train/val/test.

    Sizes follow largest-remainder rounding; with ``stratify`` each label
    class is apportioned separately and every part must receive at least
    one sample of every class.
    """
    f = _check_fractions(fractions)
    labels = np.array([s.label if isinstance(s, Sample) else s for s in samples], dtype=float)
    n = len(labels)
    rng = derive_rng(seed, "split")
    out = np.empty(n, dtype=object)
    groups = [np.flatnonzero(labels == c) for c in np.unique(labels)] if stratify else [np.arange(n)]
    for idx in groups:
        counts = allocate_counts(f, len(idx))
        if stratify and counts.min() == 0:
            raise TooFewSamples(f"class with {len(idx)} samples cannot cover every split part")
        perm = rng.permutation(idx)
        bounds = np.cumsum(counts)[:-1]
        for part, chunk in zip(PARTS, np.split(perm, bounds)):
            out[chunk] = part
    return out.tolist()


def kfold_splits(labels, n_folds: int = 5, stratify: bool = True, seed: int = 0) -> list[list[str]]:
    """Cross-validation assignments: fold ``f`` is test, fold ``f+1`` is val."""
    labels = np.asarray(labels, dtype=float)
    if n_folds < 3:
        raise ValueError("need at least 3 folds")
    rng = derive_rng(seed, "kfold")
    fold = np.empty(len(labels), dtype=int)
    groups = [np.flatnonzero(labels == c) for c in np.unique(labels)] if stratify else [np.arange(len(labels))]
    offset = 0
    for idx in groups:
        perm = rng.permutation(idx)
        # rotate so small classes do not all land in fold 0
        fold[perm] = (np.arange(len(perm)) + offset) % n_folds
        offset += len(perm)
    if stratify and any(len(g) < n_folds for g in groups):
        raise TooFewSamples("every class needs at least one sample per fold")
    if np.bincount(fold, minlength=n_folds).min() == 0:
        raise TooFewSamples("too few samples for the requested folds")
    out = []
    for f in range(n_folds):
        parts = np.where(fold == f, TEST, np.where(fold == (f + 1) % n_folds, VAL, TRAIN))
        out.append(parts.tolist())
    return out


def balanced_indices(indices, labels, seed: int = 0) -> np.ndarray:
    """Oversample the minority class among ``indices`` to parity."""
    indices = np.asarray(indices)
    y = np.asarray(labels)[indices]
    rng = derive_rng(seed, "balance")
    pos, neg = indices[y == 1], indices[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        return indices
    small, big = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    extra = rng.choice(small, size=len(big) - len(small), replace=True)
    return np.sort(np.concatenate([indices, extra]))


def split_to_json(assignment) -> str:
    return json.dumps({str(i): p for i, p in enumerate(assignment)}, sort_keys=False, separators=(",", ":"))


def split_from_json(text: str) -> list[str]:
    data = json.loads(text)
    return [data[str(i)] for i in range(len(data))]
