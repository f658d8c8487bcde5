"""Command-line entry point; one subcommand per pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
``LABELSCOPE_SEED`` is the global fallback for every ``--seed`` flag.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import cartography, confident, evaluation, experiment, model, noise
from .data import (
    DataError,
    SplitSpec,
    load_dataset,
    load_prob_matrix,
    save_dataset,
    save_prob_matrix,
    stratified_split,
    validate_prob_matrix,
)
from .model import NumericError, TrainConfig


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _env_seed() -> int:
    return int(os.environ.get("LABELSCOPE_SEED", "0"))


def _add_seed(p):
    p.add_argument(
        "--seed",
        type=int,
        default=None,
        help="random seed (default: $LABELSCOPE_SEED or 0)",
    )


def _add_train_flags(p):
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=1.0)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--feature-dims", type=int, default=1024)
    p.add_argument("--l2", type=float, default=0.0)
    _add_seed(p)


def _train_config(args, epochs_default: int) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs if args.epochs is not None else epochs_default,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        feature_dims=args.feature_dims,
        seed=args.seed if args.seed is not None else _env_seed(),
        l2=args.l2,
    )


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="labelscope", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("split", help="stratified train/val/test split")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--manifest", default=None)
    sp.add_argument(
        "--ratios", type=float, nargs=3, default=[0.8, 0.1, 0.1],
        metavar=("TRAIN", "VAL", "TEST"),
    )
    _add_seed(sp)
    sp.add_argument("--outdir", required=True)

    sp = sub.add_parser("make-synthetic", help="generate a token-pool corpus")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--classes", type=int, default=2)
    sp.add_argument("--separation", type=float, default=0.9)
    sp.add_argument("--vocab", type=int, default=40)
    _add_seed(sp)
    sp.add_argument("--out", required=True, help="output dataset path (.jsonl)")

    sp = sub.add_parser("inject-noise", help="flip labels with a known record")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--manifest", default=None)
    sp.add_argument("--rate", type=float, required=True)
    _add_seed(sp)
    sp.add_argument("--outdir", required=True)

    sp = sub.add_parser("cl", help="out-of-fold probabilities + label issues")
    sp.add_argument("--train", required=True, dest="train_path")
    sp.add_argument("--manifest", default=None)
    sp.add_argument("--k", type=int, default=4)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument(
        "--proba", default=None,
        help="use an existing out-of-fold probability CSV instead of training",
    )
    _add_train_flags(sp)
    sp.add_argument("--outdir", required=True)

    sp = sub.add_parser("dm", help="training dynamics + knee-point filter")
    sp.add_argument("--train", required=True, dest="train_path")
    sp.add_argument("--manifest", default=None)
    sp.add_argument(
        "--dynamics", default=None,
        help="use an existing per-epoch dynamics CSV instead of training",
    )
    _add_train_flags(sp)
    sp.add_argument("--outdir", required=True)

    sp = sub.add_parser("random-control", help="remove a uniform random subset")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--manifest", default=None)
    sp.add_argument("--k", type=int, required=True)
    _add_seed(sp)
    sp.add_argument("--outdir", required=True)

    sp = sub.add_parser("evaluate", help="train on one file, score another")
    sp.add_argument("--train", required=True, dest="train_path")
    sp.add_argument("--test", required=True, dest="test_path")
    sp.add_argument("--manifest", default=None)
    _add_train_flags(sp)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("experiment", help="full comparison protocol from JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=None, help="override config seeds")
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--outdir", required=True)

    sp = sub.add_parser("datamap", help="render a cartography report as SVG")
    sp.add_argument("--cartography", required=True)
    sp.add_argument("--out", required=True)

    return p


def _cmd_split(args):
    spec = SplitSpec(
        tuple(args.ratios), args.seed if args.seed is not None else _env_seed()
    )
    ds = load_dataset(args.dataset, args.manifest)
    parts = stratified_split(ds, spec)
    outdir = Path(args.outdir)
    for name, part in zip(("train", "val", "test"), parts):
        save_dataset(part, outdir / f"{name}.jsonl")
    return 0


def _cmd_make_synthetic(args):
    ds = noise.make_synthetic(
        args.n,
        args.classes,
        args.separation,
        args.vocab,
        args.seed if args.seed is not None else _env_seed(),
    )
    save_dataset(ds, args.out)
    return 0


def _cmd_inject_noise(args):
    ds = load_dataset(args.dataset, args.manifest)
    spec = noise.NoiseSpec(
        args.rate, args.seed if args.seed is not None else _env_seed()
    )
    noisy, flips = noise.inject_noise(ds, spec)
    outdir = Path(args.outdir)
    save_dataset(noisy, outdir / "noisy.jsonl")
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "flips.json", "w", encoding="utf-8") as f:
        json.dump(
            [
                {
                    "id": ex_id,
                    "original": ds.classes.names[orig],
                    "flipped": ds.classes.names[new],
                }
                for ex_id, orig, new in flips.entries
            ],
            f,
            ensure_ascii=False,
            indent=2,
        )
        f.write("\n")
    return 0


def _cmd_cl(args, parser):
    if args.k < 2:
        parser.error(f"--k must be >= 2, got {args.k}")
    ds = load_dataset(args.train_path, args.manifest)
    if args.proba is not None:
        pm = load_prob_matrix(args.proba)
        validate_prob_matrix(pm, ds)
    else:
        cfg = _train_config(args, epochs_default=3)
        pm = model.oof_predict(ds, args.k, cfg, n_jobs=args.jobs)
    issues = confident.find_label_issues(pm, ds)
    result = evaluation.apply_filter(ds, issues.flagged, "CL")
    outdir = Path(args.outdir)
    save_prob_matrix(pm, ds.classes, outdir / "proba.csv")
    confident.save_issue_report(issues, len(ds), outdir / "issues.json")
    save_dataset(result.retained, outdir / "filtered.jsonl")
    return 0


def _cmd_dm(args):
    ds = load_dataset(args.train_path, args.manifest)
    if args.dynamics is not None:
        log = model.load_dynamics(args.dynamics)
    else:
        cfg = _train_config(args, epochs_default=10)
        log = model.record_dynamics(ds, cfg)
    records = cartography.categorize(cartography.compute_metrics(log, ds))
    threshold, removed = cartography.knee_threshold(records)
    stats = cartography.corpus_stats(records, threshold)
    result = evaluation.apply_filter(ds, removed, "DM")
    outdir = Path(args.outdir)
    model.save_dynamics(log, ds.classes, outdir / "dynamics.csv")
    cartography.save_cartography_report(
        cartography.cartography_report(records, stats, removed),
        outdir / "cartography.json",
    )
    (outdir / "datamap.svg").write_text(cartography.datamap_svg(records))
    save_dataset(result.retained, outdir / "filtered.jsonl")
    return 0


def _cmd_random_control(args):
    ds = load_dataset(args.dataset, args.manifest)
    result = evaluation.random_control(
        ds, args.k, args.seed if args.seed is not None else _env_seed()
    )
    outdir = Path(args.outdir)
    save_dataset(result.retained, outdir / "filtered.jsonl")
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "removed.json", "w", encoding="utf-8") as f:
        json.dump(sorted(result.removed_ids), f, indent=2)
        f.write("\n")
    return 0


def _cmd_evaluate(args):
    train_ds = load_dataset(args.train_path, args.manifest)
    test_ds = load_dataset(args.test_path, args.manifest)
    cfg = _train_config(args, epochs_default=3)
    params = model.train(train_ds, cfg)
    pm = model.predict_proba(params, test_ds)
    preds = np.argmax(pm.rows, axis=1)
    report = evaluation.f1_macro(preds, test_ds.labels(), len(test_ds.classes))
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(
            {
                "f1_macro": report.f1_macro,
                "accuracy": report.accuracy,
                "per_class_f1": list(report.per_class_f1),
            },
            f,
            indent=2,
        )
        f.write("\n")
    return 0


def _cmd_experiment(args):
    cfg = experiment.load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    if args.jobs is not None:
        cfg = dataclasses.replace(cfg, jobs=args.jobs)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    reports = experiment.run_all(cfg)
    for report in reports:
        path = outdir / f"report_seed{report.run_seed}.json"
        path.write_text(experiment.report_json(report))
    experiment.write_summary_csv(reports, outdir / "summary.csv")
    return 0


def _cmd_datamap(args):
    with open(args.cartography, encoding="utf-8") as f:
        doc = json.load(f)
    records = [
        cartography.CartographyRecord(
            id=e["id"],
            confidence=e["confidence"],
            variability=e["variability"],
            correctness_count=e["correctness_count"],
            correctness_fraction=e.get("correctness_fraction", 0.0),
            forgetfulness=e["forgetfulness"],
            category=e.get("category"),
        )
        for e in doc["examples"]
    ]
    Path(args.out).write_text(cartography.datamap_svg(records))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.command == "split":
            if abs(sum(args.ratios) - 1.0) > 1e-9:
                parser.error(f"--ratios must sum to 1, got {sum(args.ratios)}")
            return _cmd_split(args)
        if args.command == "make-synthetic":
            return _cmd_make_synthetic(args)
        if args.command == "inject-noise":
            return _cmd_inject_noise(args)
        if args.command == "cl":
            return _cmd_cl(args, parser)
        if args.command == "dm":
            return _cmd_dm(args)
        if args.command == "random-control":
            return _cmd_random_control(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "experiment":
            return _cmd_experiment(args)
        if args.command == "datamap":
            return _cmd_datamap(args)
        parser.error(f"unknown command {args.command!r}")
    except SystemExit as e:
        return int(e.code or 0)
    except FileNotFoundError as e:
        print(f"labelscope: error: file not found: {e.filename}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"labelscope: error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"labelscope: numeric failure: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
