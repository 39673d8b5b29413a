"""Architecture and training descriptions plus capacity matching."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum

from ..exceptions import Infeasible
from ..features import FEATURE_DIM, NODE_FEATURE_DIM

MAX_GNN_DEPTH = 8
MAX_WIDTH = 4096


class Family(str, Enum):
    MLP = "mlp"
    GNN = "gnn"


class Head(str, Enum):
    LOGIT = "logit"
    SCALAR = "scalar"


class Loss(str, Enum):
    WEIGHTED_BCE = "weighted_bce"
    MSE = "mse"


@dataclass(frozen=True)
class ModelSpec:
    """``depth_k`` counts message-passing layers (GNN) or hidden layers (MLP)."""

    family: Family
    depth_k: int
    hidden_dim: int = 64
    dropout: float = 0.2
    head: Head = Head.LOGIT
    in_dim: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "head", Head(self.head))
        if self.in_dim <= 0:
            default = NODE_FEATURE_DIM if self.family is Family.GNN else FEATURE_DIM
            object.__setattr__(self, "in_dim", default)
        if self.family is Family.GNN and not 1 <= self.depth_k <= MAX_GNN_DEPTH:
            raise ValueError(f"GNN depth must lie in [1, {MAX_GNN_DEPTH}]")
        if self.family is Family.MLP and self.depth_k < 0:
            raise ValueError("MLP depth must be nonnegative")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")

    def param_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        d, h, k = self.in_dim, self.hidden_dim, self.depth_k
        shapes = []
        if self.family is Family.MLP:
            prev = d
            for i in range(k):
                shapes += [(f"W{i}", (prev, h)), (f"b{i}", (h,))]
                prev = h
            shapes += [("W_out", (prev, 1)), ("b_out", (1,))]
        else:
            prev = d
            for i in range(k):
                shapes += [(f"W{i}", (2 * prev, h)), (f"b{i}", (h,))]
                prev = h
            shapes += [("W_out", (2 * h, 1)), ("b_out", (1,))]
        return shapes

    def param_count(self) -> int:
        total = 0
        for _, shape in self.param_shapes():
            n = 1
            for s in shape:
                n *= s
            total += n
        return total

    def replace(self, **changes) -> "ModelSpec":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "depth_k": self.depth_k,
            "hidden_dim": self.hidden_dim,
            "dropout": self.dropout,
            "head": self.head.value,
            "in_dim": self.in_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)


@dataclass(frozen=True)
class TrainingConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-5
    max_epochs: int = 200
    patience: int = 20
    class_weight: str | float = "auto"
    seed: int = 0
    loss: Loss = Loss.WEIGHTED_BCE
    balanced_sampling: bool = False

    def __post_init__(self):
        object.__setattr__(self, "loss", Loss(self.loss))
        if self.lr <= 0 or self.weight_decay < 0:
            raise ValueError("lr must be positive and weight_decay nonnegative")
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be positive")
        if self.class_weight != "auto" and float(self.class_weight) <= 0:
            raise ValueError("class_weight must be 'auto' or a positive number")

    def replace(self, **changes) -> "TrainingConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["loss"] = self.loss.value
        return d


def mlp_param_count(in_dim: int, width: int, depth: int) -> int:
    if depth == 0:
        return in_dim + 1
    return in_dim * width + width + (depth - 1) * (width * width + width) + width + 1


def gnn_param_count(in_dim: int, hidden: int, depth: int) -> int:
    return (2 * in_dim * hidden + hidden) + (depth - 1) * (2 * hidden * hidden + hidden) + (2 * hidden + 1)


def match_capacity(reference: ModelSpec, target_family, tolerance: float = 0.05, in_dim: int | None = None,
                   depth: int | None = None) -> ModelSpec:
    """Spec of ``target_family`` whose parameter count is within ``tolerance``
    of ``reference``; the smallest qualifying width wins.

    Depth mirrors the reference (clipped to the target family's range) unless
    given; ``in_dim`` defaults to the family's standard input width.
    """
    target_family = Family(target_family)
    if target_family is reference.family and in_dim is None and depth is None:
        return reference
    goal = reference.param_count()
    lo, hi = goal * (1 - tolerance), goal * (1 + tolerance)
    if depth is None:
        depth = reference.depth_k
        if target_family is Family.GNN:
            depth = min(max(depth, 1), MAX_GNN_DEPTH)
    probe = ModelSpec(target_family, depth, 1, reference.dropout, reference.head, in_dim or 0)
    if target_family is Family.MLP and depth == 0:
        if lo <= probe.param_count() <= hi:
            return probe
        raise Infeasible("a linear model cannot match the reference parameter count")
    for w in range(1, MAX_WIDTH + 1):
        cand = probe.replace(hidden_dim=w)
        n = cand.param_count()
        if lo <= n <= hi:
            return cand
        if n > hi:
            break
    raise Infeasible(f"no width of a depth-{depth} {target_family.value} lands within {tolerance:.0%} of {goal}")
