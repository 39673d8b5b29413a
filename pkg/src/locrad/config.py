"""Experiment configuration: dataclasses, TOML/JSON loading and hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomli

from .exceptions import ConfigError
from .models.spec import MAX_GNN_DEPTH, TrainingConfig
from .sampling import SamplingPlan
from .synthgen import MAX_RADIUS, GeneratorParams

BUILDERS = ("local", "cue", "target")

# Generator settings under which the radius oracle recovers the injected depth:
# one shared feature prototype per type class, one row count, and a sparse
# near-regular candidate set, so structure rather than features separates anchors.
BENCHMARK_GENERATOR = {
    "n_tables": 50,
    "attrs_per_table": [6, 6],
    "candidate_density": 0.0068,
    "profile_pool": 2,
    "row_counts": [1000],
}


@dataclass
class TaskSpec:
    """One synthetic task of the suite.

    ``builder`` selects the label mechanism: ``local`` (endpoint rule over
    arbitrary pairs, radius 0), ``cue`` (beacon at exactly ``radius`` hops,
    classification) or ``target`` (decayed beacon count within ``radius``
    hops, regression).
    """

    name: str
    radius: int
    builder: str
    generator: dict = field(default_factory=dict)
    positive_fraction: float = 0.3
    beacon_fraction: float = 0.5
    decay: float = 0.5
    n_positives: int = 100

    def check(self):
        if self.builder not in BUILDERS:
            raise ConfigError(f"task {self.name!r}: builder must be one of {BUILDERS}")
        if not 0 <= self.radius <= MAX_RADIUS:
            raise ConfigError(f"task {self.name!r}: radius must lie in [0, {MAX_RADIUS}]")
        if self.builder == "local" and self.radius != 0:
            raise ConfigError(f"task {self.name!r}: local tasks have radius 0")
        if self.builder == "target" and self.radius < 1:
            raise ConfigError(f"task {self.name!r}: target tasks need radius >= 1")
        try:
            self.generator_params(0).check()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"task {self.name!r}: bad generator settings: {exc}") from None

    def generator_params(self, seed: int) -> GeneratorParams:
        return GeneratorParams.from_dict({**self.generator, "seed": seed})


def default_tasks() -> list[TaskSpec]:
    rich = {k: v for k, v in BENCHMARK_GENERATOR.items() if k not in ("profile_pool", "row_counts")}
    return [
        TaskSpec("local_r0", 0, "local", dict(rich)),
        TaskSpec("cue_r1", 1, "cue", dict(BENCHMARK_GENERATOR)),
        TaskSpec("target_r2", 2, "target", dict(BENCHMARK_GENERATOR)),
        TaskSpec("target_r3", 3, "target", dict(BENCHMARK_GENERATOR)),
    ]


@dataclass
class ScalingConfig:
    sizes: list[int] = field(default_factory=lambda: [20, 50, 100, 200])
    attrs_per_table: int = 2
    candidate_density: float = 0.0068
    depth: int = 2
    hidden_dim: int = 64
    epochs: int = 50
    repeats: int = 5
    seed: int = 0

    def check(self):
        if not self.sizes or min(self.sizes) < 1:
            raise ConfigError("scaling sizes must be positive")
        if self.attrs_per_table < 1 or self.epochs < 1 or self.repeats < 1:
            raise ConfigError("scaling attrs_per_table, epochs and repeats must be positive")


@dataclass
class ExperimentConfig:
    name: str = "default"
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    n_folds: int = 5
    tasks: list[TaskSpec] = field(default_factory=default_tasks)
    depths: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    hidden_dim: int = 64
    dropout: float = 0.2
    capacity_ref_depth: int = 2
    training: dict = field(default_factory=dict)
    sampling: dict = field(default_factory=dict)
    n_boot: int = 10000
    scaling: ScalingConfig = field(default_factory=ScalingConfig)
    out_dir: str = "runs/default"
    workers: int = 1

    def check(self) -> "ExperimentConfig":
        for name in ("seeds", "depths"):
            v = getattr(self, name)
            if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
                raise ConfigError(f"{name} must be a list of integers")
        for name in ("n_folds", "hidden_dim", "capacity_ref_depth", "n_boot", "workers"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{name} must be an integer")
        if not isinstance(self.training, dict) or not isinstance(self.sampling, dict):
            raise ConfigError("training and sampling must be tables")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.n_boot < 1 or self.hidden_dim < 1:
            raise ConfigError("n_boot and hidden_dim must be positive")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.n_folds < 3:
            raise ConfigError("n_folds must be at least 3")
        if not self.depths or min(self.depths) < 1 or max(self.depths) > MAX_GNN_DEPTH:
            raise ConfigError(f"depths must lie in [1, {MAX_GNN_DEPTH}]")
        if not 1 <= self.capacity_ref_depth <= MAX_GNN_DEPTH:
            raise ConfigError("capacity_ref_depth out of range")
        names = [t.name for t in self.tasks]
        if len(set(names)) != len(names):
            raise ConfigError("task names must be distinct")
        for t in self.tasks:
            t.check()
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        try:
            self.training_config(0)
            self.sampling_plan(0)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        self.scaling.check()
        return self

    def training_config(self, seed: int) -> TrainingConfig:
        return TrainingConfig(**{**self.training, "seed": seed})

    def sampling_plan(self, seed: int) -> SamplingPlan:
        d = dict(self.sampling)
        if "mix" in d:
            d["mix"] = tuple(d["mix"])
        return SamplingPlan(**{**d, "seed": seed})

    def task(self, name: str) -> TaskSpec:
        for t in self.tasks:
            if t.name == name:
                return t
        raise ConfigError(f"unknown task {name!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d.get("experiment", d))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "tasks" in d:
                d["tasks"] = [TaskSpec(**t) for t in d["tasks"]]
            if "scaling" in d:
                d["scaling"] = ScalingConfig(**d["scaling"])
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        return cfg.check()

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes).check()


# where outputs go and how cells are scheduled; neither changes any result
EXECUTION_KEYS = ("out_dir", "workers")


def experiment_dict(config: ExperimentConfig) -> dict:
    """Config fields that determine results (execution settings dropped)."""
    return {k: v for k, v in config.to_dict().items() if k not in EXECUTION_KEYS}


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(experiment_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomli.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return ExperimentConfig.from_dict(data)


def default_config_text() -> str:
    return resources.files("locrad").joinpath("data/default.toml").read_text(encoding="utf-8")


def default_config() -> ExperimentConfig:
    """The shipped default suite configuration."""
    return ExperimentConfig.from_dict(tomli.loads(default_config_text()))


def parse_seed_set(text: str) -> list[int]:
    """``"0-4"`` or ``"0,1,7"``; ranges are inclusive and may be mixed with singles."""
    seeds: list[int] = []
    try:
        for part in filter(None, (p.strip() for p in text.split(","))):
            lo, sep, hi = part.partition("-")
            seeds.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    except ValueError:
        raise ConfigError(f"bad seed set {text!r}") from None
    if not seeds:
        raise ConfigError("empty seed set")
    return seeds
