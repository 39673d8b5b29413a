"""Labeled task datasets over a schema graph."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graph import ALL_KINDS, EdgeKind, SchemaGraph

TRAIN, VAL, TEST = "train", "val", "test"


class TaskKind(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


@dataclass(frozen=True)
class Sample:
    src: str
    dst: str
    label: float


@dataclass(frozen=True)
class TaskDataset:
    """A schema graph with labeled anchors (attribute pairs or table pairs).

    ``message_kinds`` lists the edge kinds models may propagate over; FK
    discovery datasets drop ``foreign_key`` there since FKs are the labels.
    ``split`` maps sample index to ``"train"``, ``"val"`` or ``"test"``.
    """

    graph: SchemaGraph
    samples: tuple[Sample, ...]
    kind: TaskKind = TaskKind.CLASSIFICATION
    nominal_radius: int = 0
    split: tuple[str, ...] | None = None
    message_kinds: frozenset = ALL_KINDS
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "kind", TaskKind(self.kind))
        object.__setattr__(self, "message_kinds", frozenset(EdgeKind(k) for k in self.message_kinds))
        if self.split is not None:
            object.__setattr__(self, "split", tuple(self.split))

    @property
    def is_regression(self) -> bool:
        return self.kind is TaskKind.REGRESSION

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=float)

    @property
    def anchors(self) -> list[tuple[str, str]]:
        return [(s.src, s.dst) for s in self.samples]

    def __len__(self):
        return len(self.samples)

    def indices(self, part: str) -> np.ndarray:
        if self.split is None:
            raise ValueError("dataset has no split assignment")
        return np.array([i for i, p in enumerate(self.split) if p == part], dtype=int)

    def replace(self, **changes) -> "TaskDataset":
        return dataclasses.replace(self, **changes)

    def with_split(self, split) -> "TaskDataset":
        if isinstance(split, dict):
            split = [split[i] for i in range(len(self.samples))]
        return self.replace(split=tuple(split))


def check_dataset(ds: TaskDataset) -> list[str]:
    """Return human-readable invariant violations (empty when valid)."""
    problems = []
    for i, s in enumerate(ds.samples):
        if not (ds.graph.has_node(s.src) and ds.graph.has_node(s.dst)):
            problems.append(f"sample {i} anchored outside the graph")
        if ds.is_regression:
            if not math.isfinite(s.label):
                problems.append(f"sample {i} has non-finite regression label")
        elif s.label not in (0, 1):
            problems.append(f"sample {i} has non-binary label {s.label!r}")
    if ds.split is not None:
        if len(ds.split) != len(ds.samples):
            problems.append("split does not cover every sample exactly once")
        bad = {p for p in ds.split} - {TRAIN, VAL, TEST}
        if bad:
            problems.append(f"unknown split names {sorted(bad)}")
    return problems


def zscore(values) -> np.ndarray:
    """Standardize regression targets; a constant vector maps to zeros."""
    y = np.asarray(values, dtype=float)
    sd = y.std()
    if sd == 0:
        return np.zeros_like(y)
    return (y - y.mean()) / sd
