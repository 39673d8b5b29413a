"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, default_config, load_config, parse_seed_set
from .dataset import TRAIN, TaskKind
from .exceptions import (
    ConfigError, CueInfeasible, DegenerateLabels, EmptyName, FormatError, InfeasibleParams, LinkError,
    NoPositives, ParseError, PoolExhausted, ShapeMismatch, TooFewPairs, TooFewPoints, TooFewSamples,
    TooFewTasks, UnknownNode, ZeroVariance,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4
DATA_ERRORS = (
    ParseError, LinkError, FormatError, UnknownNode, InfeasibleParams, CueInfeasible, NoPositives,
    TooFewSamples, PoolExhausted, EmptyName, ShapeMismatch, DegenerateLabels, TooFewPairs, TooFewPoints,
    TooFewTasks, ZeroVariance, json.JSONDecodeError, UnicodeDecodeError, FileNotFoundError,
)

log = logging.getLogger("locrad")


def _read(path) -> bytes:
    return Path(path).read_bytes()


def _write(text: str, path=None):
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    changes = {}
    if args.seed_set:
        changes["seeds"] = parse_seed_set(args.seed_set)
    if args.out_dir:
        changes["out_dir"] = args.out_dir
    if args.workers:
        changes["workers"] = args.workers
    return cfg.replace(**changes) if changes else cfg


def _load_dataset(path):
    from .ingest import load_dataset

    return load_dataset(_read(path))


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args):
    from .ingest import emit_dataset, emit_json
    from .synthgen import GeneratorParams, generate_schema, inject_radius_cue, inject_radius_target, load_params

    cfg = _config(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    if args.params:
        params = load_params(args.params)
        params = GeneratorParams.from_dict({**params.to_dict(), "seed": seed})
        graph = generate_schema(params)
        if args.radius is None:
            _write(emit_json(graph), args.output)
            return EXIT_OK
        if args.target:
            ds = inject_radius_target(graph, args.radius, seed)
        else:
            ds = inject_radius_cue(graph, args.radius, params.positive_fraction, seed)
    else:
        from .runner import build_task_dataset

        task = cfg.task(args.task) if args.task else cfg.tasks[0]
        ds = build_task_dataset(task, seed, cfg)
    _write(emit_dataset(ds), args.output)
    return EXIT_OK


def cmd_ingest(args):
    from .ingest import emit_json, load_json, load_stats, parse_ddl, apply_stats

    raw = _read(args.input)
    stats = load_stats(_read(args.stats).decode("utf-8")) if args.stats else None
    if Path(args.input).suffix.lower() == ".json":
        graph = load_json(raw)
        if stats:
            graph = apply_stats(graph, stats)
    else:
        graph = parse_ddl(raw, stats)
    _write(emit_json(graph), args.output)
    return EXIT_OK


def cmd_featurize(args):
    from .features import EdgeFeaturizer, export_csv

    ds = _load_dataset(args.dataset)
    anchors = ds.anchors
    fit_on = [a for a, p in zip(anchors, ds.split) if p == TRAIN] if ds.split else anchors
    X = EdgeFeaturizer(ds.graph, scale=not args.raw).fit(fit_on).transform(anchors)
    out = args.output or "-"
    if out == "-":
        import tempfile

        with tempfile.NamedTemporaryFile("r", suffix=".csv") as tmp:
            export_csv(tmp.name, X, anchors)
            sys.stdout.write(Path(tmp.name).read_text())
    else:
        export_csv(out, X, anchors)
    return EXIT_OK


def cmd_radius(args):
    from .radius import estimate_radius, verify_certificate

    ds = _load_dataset(args.dataset)
    est = estimate_radius(ds, k_max=args.k_max, exhaustive=args.exhaustive)
    out = est.to_dict(ds.anchors)
    out["certificate_verified"] = verify_certificate(ds, est)
    out["nominal_radius"] = ds.nominal_radius
    _write(_dump(out), args.output)
    return EXIT_OK


def cmd_train(args):
    from .features import EdgeFeaturizer, node_feature_matrix
    from .metrics import classification_metrics, regression_metrics
    from .models import Family, ModelSpec, TrainingConfig, predict_scores, save_model, train
    from .runner import fold_targets
    from .sampling import split

    ds = _load_dataset(args.dataset)
    seed = args.seed if args.seed is not None else 0
    assignment = list(ds.split) if ds.split else split(ds.samples, stratify=not ds.is_regression, seed=seed)
    family = Family(args.family)
    spec = ModelSpec(family, args.depth, args.hidden_dim, args.dropout)
    y = fold_targets(ds, assignment)
    if family is Family.GNN:
        X = node_feature_matrix(ds.graph)
    else:
        X = EdgeFeaturizer(ds.graph).fit([a for a, p in zip(ds.anchors, assignment) if p == TRAIN]).transform(ds.anchors)
    cfg = TrainingConfig(lr=args.lr, max_epochs=args.epochs, patience=args.patience, seed=seed)
    model = train(spec, ds, X, cfg, split=assignment, labels=y)
    te = np.flatnonzero(np.asarray(assignment) == "test")
    scores = predict_scores(model, ds, X, te)
    metrics = regression_metrics(scores, y[te]) if ds.kind is TaskKind.REGRESSION else classification_metrics(scores, y[te])
    if args.model_out:
        save_model(model, args.model_out)
    _write(_dump({"spec": spec.to_dict(), "best_epoch": model.best_epoch, "epochs": model.n_epochs,
                  "test": {k: (None if v != v else v) for k, v in metrics.items()}}), args.output)
    return EXIT_OK


def _emit(report, cfg, args):
    from .runner import emit_report

    paths = emit_report(report, cfg.out_dir)
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return paths


def cmd_ablate_depth(args):
    from .runner import run_depth_ablation

    cfg = _config(args)
    rep = run_depth_ablation(cfg, args.task)
    _emit(rep, cfg, args)
    _write(_dump({"curves": rep.summary["curves"], "best_depths": rep.summary["best_depths"]}))
    return EXIT_OK


def _parse_pairs(text):
    pairs = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        r, sep, a = part.partition(":")
        if not sep:
            raise ConfigError(f"pair {part!r} is not radius:advantage")
        pairs.append((float(r), float(a)))
    return pairs


def cmd_radius_advantage(args):
    from .runner import run_radius_advantage

    cfg = _config(args)
    if args.pairs:
        _write(_dump(run_radius_advantage(cfg, pairs=_parse_pairs(args.pairs))))
        return EXIT_OK
    rep = run_radius_advantage(cfg)
    _emit(rep, cfg, args)
    _write(_dump({"advantage": rep.summary["advantage"], "correlation": rep.summary.get("correlation")}))
    return EXIT_OK


def cmd_scale(args):
    from .runner import run_scaling

    cfg = _config(args)
    rep = run_scaling(cfg)
    _emit(rep, cfg, args)
    _write(_dump(rep.summary))
    return EXIT_OK


def cmd_stats(args):
    """Paired tests from a CSV with columns ``a,b`` and optional ``group``;
    with ``--spearman`` the columns are ``x,y``."""
    from .stats import apply_holm, paired_comparison, spearman_bootstrap

    with open(args.input, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if args.spearman:
        try:
            x = [float(r["x"]) for r in rows]
            y = [float(r["y"]) for r in rows]
        except (KeyError, ValueError) as exc:
            raise FormatError("", f"expected numeric columns x,y: {exc}") from None
        _write(_dump(spearman_bootstrap(x, y, args.n_boot, args.seed or 0).to_dict()))
        return EXIT_OK
    groups: dict[str, tuple[list, list]] = {}
    try:
        for r in rows:
            a, b = groups.setdefault(r.get("group", "") or "", ([], []))
            a.append(float(r["a"]))
            b.append(float(r["b"]))
    except (KeyError, ValueError) as exc:
        raise FormatError("", f"expected numeric columns a,b: {exc}") from None
    names = sorted(groups)
    results = apply_holm([paired_comparison(*groups[g], label=g) for g in names])
    _write(_dump([{"group": g, **r.to_dict()} for g, r in zip(names, results)]))
    return EXIT_OK


def cmd_report(args):
    from .runner import emit_report, load_report, run_suite

    cfg = _config(args)
    if args.source:
        rep = load_report(args.source)
        paths = emit_report(rep, cfg.out_dir)
    else:
        rep = run_suite(cfg)
        paths = _emit(rep, cfg, args)
    manifest = json.loads(paths["MANIFEST.json"].read_text())
    _write(_dump(manifest))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def globals_(parser, default):
        parser.add_argument("--config", default=default, help="experiment config (TOML or JSON); defaults to the shipped suite")
        parser.add_argument("--seed-set", default=default, help="seeds, e.g. 0-4 or 0,2,5")
        parser.add_argument("--out-dir", default=default, help="directory for reports")
        parser.add_argument("--workers", type=int, default=default, help="parallel (task, seed) cells")
        parser.add_argument("-v", "--verbose", action="store_true", default=default)

    # global flags are accepted before or after the subcommand; the subparser
    # copy suppresses its defaults so it never clobbers a value given earlier
    common = argparse.ArgumentParser(add_help=False)
    globals_(common, argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="locrad", description="Relational radius toolkit")
    globals_(p, None)
    p.add_argument("--version", action="version", version=f"locrad {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.set_defaults(func=fn)
        return sp

    sp = add("generate", cmd_generate, "draw a synthetic schema or task dataset")
    sp.add_argument("--task", help="task name from the config")
    sp.add_argument("--params", help="generator parameters file (JSON or TOML)")
    sp.add_argument("--radius", type=int, help="with --params: inject a cue at this depth")
    sp.add_argument("--target", action="store_true", help="with --radius: regression target instead of a cue")
    sp.add_argument("--seed", type=int)
    sp.add_argument("-o", "--output")

    sp = add("ingest", cmd_ingest, "parse DDL or graph JSON into canonical graph JSON")
    sp.add_argument("input")
    sp.add_argument("--stats", help="per-column statistics JSON")
    sp.add_argument("-o", "--output")

    sp = add("featurize", cmd_featurize, "export edge feature vectors as CSV")
    sp.add_argument("dataset")
    sp.add_argument("--raw", action="store_true", help="skip min-max scaling")
    sp.add_argument("-o", "--output")

    sp = add("radius", cmd_radius, "estimate the relational radius of a dataset")
    sp.add_argument("dataset")
    sp.add_argument("--k-max", type=int, default=5)
    sp.add_argument("--exhaustive", action="store_true")
    sp.add_argument("-o", "--output")

    sp = add("train", cmd_train, "train one model on a dataset")
    sp.add_argument("dataset")
    sp.add_argument("--family", choices=["mlp", "gnn"], default="gnn")
    sp.add_argument("--depth", type=int, default=2)
    sp.add_argument("--hidden-dim", type=int, default=64)
    sp.add_argument("--dropout", type=float, default=0.2)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--patience", type=int, default=20)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--model-out")
    sp.add_argument("-o", "--output")

    sp = add("ablate-depth", cmd_ablate_depth, "GNN depth sweep")
    sp.add_argument("--task", help="restrict to one task")

    sp = add("radius-advantage", cmd_radius_advantage, "radius vs GNN advantage correlation")
    sp.add_argument("--pairs", help="literal pairs radius:advantage,... instead of running the suite")

    add("scale", cmd_scale, "per-epoch time and memory against schema size")

    sp = add("stats", cmd_stats, "paired tests or Spearman correlation from a CSV")
    sp.add_argument("input")
    sp.add_argument("--spearman", action="store_true")
    sp.add_argument("--n-boot", type=int, default=10000)
    sp.add_argument("--seed", type=int)

    sp = add("report", cmd_report, "run the full suite (or re-emit a saved report)")
    sp.add_argument("--from", dest="source", help="directory holding a saved report.json")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DATA_ERRORS as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
