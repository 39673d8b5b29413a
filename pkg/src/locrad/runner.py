"""Experiment orchestration: suite cells, depth ablation, radius-advantage
correlation, capacity-matched comparisons, scaling, and report emission."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import time
import tracemalloc
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, TaskSpec, config_hash, experiment_dict
from .dataset import TEST, TRAIN, VAL, TaskDataset
from .exceptions import LocradError, TooFewPairs, TooFewTasks, ZeroVariance
from .features import EdgeFeaturizer, node_feature_matrix
from .metrics import classification_metrics, regression_metrics
from .models import Family, ModelSpec, GraphOperator, match_capacity, predict_scores, train
from .sampling import fk_dataset, kfold_splits, split
from .stats import MetricReport, apply_holm, paired_comparison, spearman_bootstrap
from .synthgen import GeneratorParams, generate_schema, inject_radius_cue, inject_radius_target, local_task_dataset

log = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "experiment", "task", "radius", "model", "depth", "params", "seed", "fold", "status",
    "metric_name", "val_metric", "test_metric",
    "f1", "precision", "recall", "roc_auc", "pr_auc", "ece", "r2", "mae",
    "best_epoch", "n_epochs", "size", "n_edges",
]
TIMING_COLUMNS = [
    "experiment", "task", "model", "depth", "seed", "fold", "size", "n_edges",
    "train_seconds", "seconds_per_epoch", "peak_bytes",
]
METRIC_KEYS = ("f1", "precision", "recall", "roc_auc", "pr_auc", "ece", "r2", "mae")
RUN_ERRORS = (LocradError, ArithmeticError, ValueError)


def _clean(v):
    """JSON/CSV-safe scalar: numpy scalars unwrapped, NaN and inf become None."""
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def _row(**kw) -> dict:
    row = {c: None for c in RESULT_COLUMNS}
    for k, v in kw.items():
        if k not in row:
            raise KeyError(k)
        row[k] = _clean(v)
    return row


# ---------------------------------------------------------------------------
# tasks and models


def build_task_dataset(task: TaskSpec, seed: int, config: ExperimentConfig) -> TaskDataset:
    graph = generate_schema(task.generator_params(seed))
    if task.builder == "local":
        ds = local_task_dataset(graph, task.n_positives, config.sampling_plan(seed), seed)
    elif task.builder == "cue":
        ds = inject_radius_cue(graph, task.radius, task.positive_fraction, seed)
    else:
        ds = inject_radius_target(graph, task.radius, seed, task.beacon_fraction, task.decay)
    return ds.replace(name=task.name)


def model_grid(config: ExperimentConfig) -> list[tuple[str, ModelSpec]]:
    """The capacity-matched MLP followed by one GNN per configured depth."""
    ref = ModelSpec(Family.GNN, config.capacity_ref_depth, config.hidden_dim, config.dropout)
    mlp = match_capacity(ref, Family.MLP).replace(dropout=config.dropout)
    grid = [("mlp", mlp)]
    grid += [("gnn", ModelSpec(Family.GNN, k, config.hidden_dim, config.dropout)) for k in config.depths]
    return grid


def fold_targets(ds: TaskDataset, assignment) -> np.ndarray:
    """Labels, z-scored with training-part statistics for regression."""
    y = ds.labels
    if not ds.is_regression:
        return y
    tr = y[np.asarray(assignment) == TRAIN]
    sd = tr.std()
    if sd == 0:
        raise ZeroVariance("training targets are constant")
    return (y - tr.mean()) / sd


def _features(spec, ds, assignment, node_X):
    if spec.family is Family.GNN:
        return node_X
    train_anchors = [a for a, p in zip(ds.anchors, assignment) if p == TRAIN]
    return EdgeFeaturizer(ds.graph).fit(train_anchors).transform(ds.anchors)


def evaluate_run(spec, ds, assignment, y, X, config_t) -> tuple[dict, object, float]:
    """Train on one split; returns (row fields, model, train seconds)."""
    t0 = time.perf_counter()
    model = train(spec, ds, X, config_t, split=list(assignment), labels=y)
    seconds = time.perf_counter() - t0
    part = np.asarray(assignment)
    te = np.flatnonzero(part == TEST)
    scores = predict_scores(model, ds, X, te)
    val = next(v for e, _, v in model.history if e == model.best_epoch)
    out = {"val_metric": val, "best_epoch": model.best_epoch, "n_epochs": model.n_epochs}
    if ds.is_regression:
        m = regression_metrics(scores, y[te])
        out.update(metric_name="r2", test_metric=m["r2"], **m)
    else:
        m = classification_metrics(scores, y[te])
        out.update(metric_name="f1", test_metric=m["f1"], **m)
    return out, model, seconds


def run_cell(job) -> tuple[list[dict], list[dict]]:
    """All models and folds of one (task, seed) cell. Failures are recorded per run."""
    config_dict, task_name, seed, experiment = job
    config = ExperimentConfig.from_dict(config_dict)
    task = config.task(task_name)
    rows, timings = [], []
    base = dict(experiment=experiment, task=task.name, radius=task.radius, seed=seed)
    try:
        ds = build_task_dataset(task, seed, config)
        folds = kfold_splits(ds.labels, config.n_folds, stratify=not ds.is_regression, seed=seed)
        node_X = node_feature_matrix(ds.graph)
    except RUN_ERRORS as exc:
        rows.append(_row(**base, model="*", status=f"failed:{type(exc).__name__}"))
        log.warning("cell %s seed %d failed: %s", task.name, seed, exc)
        return rows, timings
    cfg_t = config.training_config(seed)
    for label, spec in model_grid(config):
        ident = dict(base, model=label, depth=spec.depth_k, params=spec.param_count())
        for fold, assignment in enumerate(folds):
            try:
                y = fold_targets(ds, assignment)
                X = _features(spec, ds, assignment, node_X)
                fields, model, seconds = evaluate_run(spec, ds, assignment, y, X, cfg_t)
            except RUN_ERRORS as exc:
                rows.append(_row(**ident, fold=fold, status=f"failed:{type(exc).__name__}"))
                log.warning("%s %s%d seed %d fold %d failed: %s", task.name, label, spec.depth_k, seed, fold, exc)
                continue
            rows.append(_row(**ident, fold=fold, status="ok", **fields))
            timings.append({
                "experiment": experiment, "task": task.name, "model": label, "depth": spec.depth_k,
                "seed": seed, "fold": fold, "size": None, "n_edges": None,
                "train_seconds": seconds, "seconds_per_epoch": seconds / model.n_epochs, "peak_bytes": None,
            })
    return rows, timings


def _map(fn, jobs, workers: int):
    """Ordered map over jobs; results never depend on scheduling."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def run_cells(config: ExperimentConfig, tasks=None, experiment: str = "suite", workers=None):
    names = [t.name for t in config.tasks] if tasks is None else list(tasks)
    jobs = [(config.to_dict(), name, seed, experiment) for name in names for seed in config.seeds]
    rows, timings = [], []
    for r, t in _map(run_cell, jobs, workers or config.workers):
        rows.extend(r)
        timings.extend(t)
    return rows, timings


# ---------------------------------------------------------------------------
# analysis over result rows


def _ok(rows):
    return [r for r in rows if r["status"] == "ok"]


def _key(r):
    return (r["model"], r["depth"])


def depth_curves(rows) -> list[dict]:
    """Per (task, model, depth): mean/std of validation and test metrics."""
    groups = defaultdict(list)
    for r in _ok(rows):
        groups[(r["task"], r["radius"], r["model"], r["depth"])].append(r)
    out = []
    for (task, radius, model, depth), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][2] != "mlp", kv[0][3])):
        val = [r["val_metric"] for r in rs]
        test = [r["test_metric"] for r in rs]
        out.append({
            "task": task, "radius": radius, "model": model, "depth": depth, "n": len(rs),
            "metric": rs[0]["metric_name"],
            "val_mean": float(np.mean(val)), "val_std": float(np.std(val, ddof=1)) if len(val) > 1 else 0.0,
            "test_mean": float(np.mean(test)), "test_std": float(np.std(test, ddof=1)) if len(test) > 1 else 0.0,
        })
    return out


def best_depths(curves) -> dict[str, int]:
    """GNN depth with the highest mean validation metric, per task (ties: shallower)."""
    best = {}
    for c in curves:
        if c["model"] != "gnn":
            continue
        cur = best.get(c["task"])
        if cur is None or c["val_mean"] > cur["val_mean"]:
            best[c["task"]] = c
    return {t: c["depth"] for t, c in best.items()}


def _paired(rows, task, a_key, b_key):
    by = defaultdict(dict)
    for r in _ok(rows):
        if r["task"] == task:
            by[_key(r)][(r["seed"], r["fold"])] = r["test_metric"]
    common = sorted(set(by[a_key]) & set(by[b_key]))
    return [by[a_key][u] for u in common], [by[b_key][u] for u in common], common


def compare_models(rows, config: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    """Advantage of the best GNN over the MLP per task, plus paired tests.

    Two comparisons per task, both over (seed, fold) pairs: the
    capacity-reference GNN vs the MLP and the validation-selected GNN vs the
    MLP. Holm correction runs over the whole family.
    """
    curves = depth_curves(rows)
    best = best_depths(curves)
    advantage, tests, labels = [], [], []
    radius = {t.name: t.radius for t in config.tasks}
    for task in [t.name for t in config.tasks]:
        if task not in best:
            continue
        mean = {(c["model"], c["depth"]): c["test_mean"] for c in curves if c["task"] == task}
        mlp_key = next((k for k in mean if k[0] == "mlp"), None)
        if mlp_key is None:
            continue
        advantage.append({
            "task": task, "radius": radius[task], "best_depth": best[task],
            "best_gnn": mean[("gnn", best[task])], "mlp": mean[mlp_key],
            "advantage": mean[("gnn", best[task])] - mean[mlp_key],
        })
        for kind, depth in (("capacity", config.capacity_ref_depth), ("best", best[task])):
            if ("gnn", depth) not in mean:
                continue
            a, b, units = _paired(rows, task, ("gnn", depth), mlp_key)
            try:
                res = paired_comparison(a, b, f"gnn{depth}-mlp")
            except TooFewPairs as exc:
                log.warning("%s %s comparison skipped: %s", task, kind, exc)
                continue
            tests.append(res)
            labels.append({"task": task, "comparison": kind, "gnn_depth": depth,
                           "mean_gnn": float(np.mean(a)), "mean_mlp": float(np.mean(b))})
    if tests:
        apply_holm(tests)
    out = [{**lab, **{k: _clean(v) for k, v in t.to_dict().items()}} for lab, t in zip(labels, tests)]
    return advantage, out


def radius_advantage_from_pairs(pairs, n_boot: int = 10000, seed: int = 0) -> dict:
    """Spearman rho (and bootstrap CI) of (radius, advantage) pairs."""
    pairs = [(float(r), float(a)) for r, a in pairs]
    if len({r for r, _ in pairs}) < 3:
        raise TooFewTasks("need at least 3 tasks with distinct radii")
    x = [r for r, _ in pairs]
    y = [a for _, a in pairs]
    res = spearman_bootstrap(x, y, n_boot, seed)
    return {"pairs": [list(p) for p in pairs], **res.to_dict()}


def seed_stability(rows, advantage) -> dict:
    """Per task: ranking of best GNN vs MLP from all runs, and the seeds whose
    fold-averaged metrics rank the two the other way."""
    out = {}
    for adv in advantage:
        task, depth = adv["task"], adv["best_depth"]
        per_seed = defaultdict(lambda: defaultdict(list))
        for r in _ok(rows):
            if r["task"] == task and (r["model"] == "mlp" or (r["model"] == "gnn" and r["depth"] == depth)):
                per_seed[r["seed"]][r["model"]].append(r["test_metric"])
        overall = adv["advantage"] > 0
        flips = sorted(
            s for s, m in per_seed.items()
            if m["gnn"] and m["mlp"] and (np.mean(m["gnn"]) > np.mean(m["mlp"])) != overall
        )
        out[task] = {"ranking": "gnn>mlp" if overall else "mlp>gnn", "flipped_seeds": flips}
    return out


def metric_reports(rows) -> list[dict]:
    groups = defaultdict(list)
    for r in _ok(rows):
        groups[(r["task"], r["model"], r["depth"])].append(r)
    out = []
    for (task, model, depth), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        entry = {"task": task, "model": model, "depth": depth, "metrics": {}}
        for k in METRIC_KEYS:
            vals = [r[k] for r in rs if r[k] is not None]
            if vals:
                entry["metrics"][k] = {kk: _clean_tree(vv) for kk, vv in MetricReport(k, vals).to_dict().items()}
        out.append(entry)
    return out


def _clean_tree(v):
    if isinstance(v, dict):
        return {k: _clean_tree(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean_tree(x) for x in v]
    return _clean(v)


# ---------------------------------------------------------------------------
# report


@dataclass
class ExperimentReport:
    config: dict
    rows: list[dict] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(ExperimentConfig.from_dict(self.config))

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": self.rows, "summary": self.summary}

    @classmethod
    def from_dict(cls, d: dict, timings=None) -> "ExperimentReport":
        return cls(d["config"], d["rows"], list(timings or []), d.get("summary", {}))


def _summarize(config, rows) -> dict:
    curves = depth_curves(rows)
    advantage, tests = compare_models(rows, config)
    summary = {
        "curves": curves,
        "best_depths": best_depths(curves),
        "advantage": advantage,
        "tests": tests,
        "metric_reports": metric_reports(rows),
        "seed_stability": seed_stability(rows, advantage),
        "failed_runs": sum(r["status"] != "ok" for r in rows),
    }
    if len({a["radius"] for a in advantage}) >= 3:
        summary["correlation"] = radius_advantage_from_pairs(
            [(a["radius"], a["advantage"]) for a in advantage], config.n_boot, 0
        )
    return _clean_tree(summary)


def run_suite(config: ExperimentConfig, tasks=None, workers=None) -> ExperimentReport:
    """Every configured model on every (task, seed, fold); full summary."""
    rows, timings = run_cells(config, tasks, "suite", workers)
    return ExperimentReport(experiment_dict(config), rows, timings, _summarize(config, rows))


def run_depth_ablation(config: ExperimentConfig, task: str | None = None, workers=None) -> ExperimentReport:
    """Depth sweep (with the MLP row) on one task or all; the summary carries
    the curve and the argmax depth per task."""
    tasks = None if task is None else [config.task(task).name]
    rows, timings = run_cells(config, tasks, "ablate-depth", workers)
    curves = depth_curves(rows)
    summary = {"curves": curves, "best_depths": best_depths(curves),
               "failed_runs": sum(r["status"] != "ok" for r in rows)}
    return ExperimentReport(experiment_dict(config), rows, timings, _clean_tree(summary))


def run_radius_advantage(config: ExperimentConfig | None = None, pairs=None, workers=None):
    """Spearman correlation of nominal radius against GNN advantage.

    With ``pairs`` the correlation is computed directly on the given
    (radius, advantage) pairs; otherwise the suite is run first.
    """
    if pairs is not None:
        n_boot = config.n_boot if config is not None else 10000
        return radius_advantage_from_pairs(pairs, n_boot, 0)
    if len({t.radius for t in config.tasks}) < 3:
        raise TooFewTasks("need at least 3 tasks with distinct nominal radii")
    return run_suite(config, workers=workers)


# ---------------------------------------------------------------------------
# scaling


def _epoch_seconds(spec, ds, X, cfg_t, assignment, y, epochs, repeats) -> float:
    """Median per-epoch time: (T(1 + epochs) - T(1)) / epochs, after a warm-up run."""
    cfg1 = cfg_t.replace(max_epochs=1, patience=1)
    cfgE = cfg_t.replace(max_epochs=epochs + 1, patience=epochs + 2)
    train(spec, ds, X, cfg1, split=assignment, labels=y)
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        train(spec, ds, X, cfg1, split=assignment, labels=y)
        t1 = time.perf_counter()
        train(spec, ds, X, cfgE, split=assignment, labels=y)
        t2 = time.perf_counter()
        samples.append(max((t2 - t1) - (t1 - t0), 0.0) / epochs)
    return float(np.median(samples))


def _peak_bytes(spec, ds, X, cfg_t, assignment, y, epochs) -> int:
    tracemalloc.start()
    try:
        train(spec, ds, X, cfg_t.replace(max_epochs=epochs, patience=epochs + 1), split=assignment, labels=y)
        return tracemalloc.get_traced_memory()[1]
    finally:
        tracemalloc.stop()


def loglog_slope(xs, ys) -> float | None:
    pts = [(x, y) for x, y in zip(xs, ys) if x and y and x > 0 and y > 0]
    if len(pts) < 2:
        log.warning("scaling slope needs at least 2 sizes; got %d", len(pts))
        return None
    lx, ly = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
    return float(np.polyfit(lx, ly, 1)[0])


def scaling_params(sc, size: int, seed: int | None = None) -> GeneratorParams:
    """Generator settings for a schema with about ``size`` attributes."""
    a = sc.attrs_per_table
    return GeneratorParams(
        n_tables=max(2, int(round(size / a))),
        attrs_per_table=(a, a),
        candidate_density=sc.candidate_density,
        seed=sc.seed if seed is None else seed,
    )


def run_scaling(config: ExperimentConfig) -> ExperimentReport:
    """Per schema size: GNN per-epoch time, peak traced memory and test F1 of
    both families on FK discovery; log-log slope of time against |E|."""
    sc = config.scaling
    cfg_t = config.training_config(sc.seed)
    gnn = ModelSpec(Family.GNN, sc.depth, sc.hidden_dim, config.dropout)
    mlp = match_capacity(gnn, Family.MLP).replace(dropout=config.dropout)
    rows, timings, points = [], [], []
    for size in sc.sizes:
        base = dict(experiment="scaling", task="fk", radius=0, seed=sc.seed, fold=0, size=size)
        try:
            graph = generate_schema(scaling_params(sc, size))
            ds = fk_dataset(graph, config.sampling_plan(sc.seed))
            assignment = split(ds.samples, seed=sc.seed)
            y = ds.labels
            node_X = node_feature_matrix(ds.graph)
            n_edges = GraphOperator(ds.graph, ds.message_kinds).mean.nnz // 2
        except RUN_ERRORS as exc:
            rows.append(_row(**base, model="*", status=f"failed:{type(exc).__name__}"))
            continue
        per_epoch = _epoch_seconds(gnn, ds, node_X, cfg_t, assignment, y, sc.epochs, sc.repeats)
        peak = _peak_bytes(gnn, ds, node_X, cfg_t, assignment, y, min(sc.epochs, 5))
        points.append((n_edges, per_epoch))
        timings.append({"experiment": "scaling", "task": "fk", "model": "gnn", "depth": sc.depth,
                        "seed": sc.seed, "fold": 0, "size": size, "n_edges": n_edges,
                        "train_seconds": None, "seconds_per_epoch": per_epoch, "peak_bytes": peak})
        for label, spec in (("mlp", mlp), ("gnn", gnn)):
            ident = dict(base, model=label, depth=spec.depth_k, params=spec.param_count(), n_edges=n_edges)
            try:
                X = _features(spec, ds, assignment, node_X)
                fields, _, _ = evaluate_run(spec, ds, assignment, y, X, cfg_t)
            except RUN_ERRORS as exc:
                rows.append(_row(**ident, status=f"failed:{type(exc).__name__}"))
                continue
            rows.append(_row(**ident, status="ok", **fields))
    slope = loglog_slope([p[0] for p in points], [p[1] for p in points])
    summary = {"points": [{"n_edges": e, "seconds_per_epoch": t} for e, t in points], "loglog_slope": slope}
    return ExperimentReport(experiment_dict(config), rows, timings, _clean_tree(summary))


# ---------------------------------------------------------------------------
# emission


def _csv_text(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="raise")
    w.writeheader()
    for r in rows:
        w.writerow({c: ("" if r.get(c) is None else r.get(c)) for c in columns})
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def emit_report(report: ExperimentReport, out_dir, formats=("csv", "json")) -> dict[str, Path]:
    """Write results.csv, report.json, timings.csv and MANIFEST.json.

    Everything except timings.csv is a deterministic function of the config;
    the MANIFEST records hashes of the deterministic files only.
    """
    if not report.rows:
        raise ValueError("report has no rows")
    formats = set(formats)
    if not formats <= {"csv", "json"}:
        raise ValueError("formats must be drawn from {'csv', 'json'}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    if "csv" in formats:
        files["results.csv"] = _csv_text(report.rows, RESULT_COLUMNS)
    if "json" in formats:
        files["report.json"] = _json_text(report.to_dict())
    manifest = {
        "toolkit": "locrad",
        "version": __version__,
        "config_hash": report.config_hash,
        "seeds": list(report.config["seeds"]),
        "runs": len(report.rows),
        "files": {name: hashlib.sha256(text.encode("utf-8")).hexdigest() for name, text in sorted(files.items())},
    }
    files["MANIFEST.json"] = _json_text(manifest)
    paths = {}
    for name, text in files.items():
        p = out / name
        p.write_text(text, encoding="utf-8")
        paths[name] = p
    if report.timings:
        p = out / "timings.csv"
        p.write_text(_csv_text(report.timings, TIMING_COLUMNS), encoding="utf-8")
        paths["timings.csv"] = p
    return paths


def load_report(out_dir) -> ExperimentReport:
    out = Path(out_dir)
    data = json.loads((out / "report.json").read_text(encoding="utf-8"))
    timings = []
    tp = out / "timings.csv"
    if tp.exists():
        with tp.open(newline="", encoding="utf-8") as fh:
            timings = list(csv.DictReader(fh))
    return ExperimentReport.from_dict(data, timings)
