"""End-to-end experiment runner: split, noise injection, baseline vs CL vs DM
vs matched random controls, detection metrics against the injected flips."""

from __future__ import annotations

import json
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import cartography, confident, evaluation, model, noise
from .data import DataError, LabeledDataset, SplitSpec, load_dataset, stratified_split
from .evaluation import DeltaReport, EvalReport, FilterResult
from .model import TrainConfig
from .noise import DetectionReport, NoiseSpec

# stage tags for seed derivation; distinct so stages never share streams
_SEED_TAGS = {
    "synthetic": 0,
    "split": 1,
    "noise": 2,
    "train": 3,
    "retrain_cl": 4,
    "dynamics": 5,
    "retrain_dm": 6,
    "control_cl": 7,
    "control_dm": 8,
}


def derive_seed(run_seed: int, base_seed: int, stage: str) -> int:
    entropy = [
        run_seed & 0xFFFFFFFFFFFFFFFF,
        base_seed & 0xFFFFFFFFFFFFFFFF,
        _SEED_TAGS[stage],
    ]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "synthetic"
    synthetic: dict | None = None  # n, classes, separation, vocab, text_len
    data: dict | None = None  # dataset, manifest paths
    split: SplitSpec = SplitSpec()
    train: TrainConfig = TrainConfig()
    cl_k: int = 4
    dm_epochs: int = 10
    noise: NoiseSpec = NoiseSpec(0.0, 0)
    seeds: tuple[int, ...] = (0,)
    jobs: int = 1

    def __post_init__(self):
        if self.synthetic is None and self.data is None:
            raise DataError("config needs a 'synthetic' or 'data' block")
        if self.cl_k < 2:
            raise DataError(f"cl.k must be >= 2, got {self.cl_k}")
        if self.dm_epochs < 2:
            raise DataError(f"dm.epochs must be >= 2, got {self.dm_epochs}")


def config_from_dict(doc: dict) -> ExperimentConfig:
    split = doc.get("split", {})
    train = doc.get("train", {})
    noise_block = doc.get("noise", {})
    return ExperimentConfig(
        name=doc.get("name", "synthetic" if "synthetic" in doc else "data"),
        synthetic=doc.get("synthetic"),
        data=doc.get("data"),
        split=SplitSpec(
            ratios=tuple(split.get("ratios", (0.8, 0.1, 0.1))),
            seed=split.get("seed", 0),
        ),
        train=TrainConfig(
            epochs=train.get("epochs", 3),
            learning_rate=train.get("learning_rate", 1.0),
            batch_size=train.get("batch_size", 32),
            feature_dims=train.get("feature_dims", 1024),
            seed=train.get("seed", 0),
            l2=train.get("l2", 0.0),
        ),
        cl_k=doc.get("cl", {}).get("k", 4),
        dm_epochs=doc.get("dm", {}).get("epochs", 10),
        noise=NoiseSpec(
            rate=noise_block.get("rate", 0.0), seed=noise_block.get("seed", 0)
        ),
        seeds=tuple(doc.get("seeds", (0,))),
        jobs=doc.get("jobs", 1),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as f:
        return config_from_dict(json.load(f))


@dataclass(frozen=True)
class Condition:
    filter: FilterResult | None  # None for the baseline
    eval: EvalReport


@dataclass(frozen=True)
class ExperimentReport:
    corpus: str
    run_seed: int
    conditions: dict[str, Condition]
    deltas: DeltaReport
    detection: dict[str, DetectionReport]
    dynamics_stats: cartography.CorpusDynamicsStats
    flipped_count: int
    config_echo: dict


@contextmanager
def _stage(name: str):
    try:
        yield
    except (DataError, model.NumericError) as e:
        raise type(e)(f"[{name}] {e}") from e


def _evaluate(params: model.ModelParams, test: LabeledDataset) -> EvalReport:
    pm = model.predict_proba(params, test)
    preds = np.argmax(pm.rows, axis=1)
    return evaluation.f1_macro(preds, test.labels(), len(test.classes))


def _source_dataset(cfg: ExperimentConfig, run_seed: int) -> LabeledDataset:
    if cfg.synthetic is not None:
        s = cfg.synthetic
        return noise.make_synthetic(
            n=s["n"],
            n_classes=s.get("classes", 2),
            separation=s.get("separation", 0.9),
            vocab=s.get("vocab", 40),
            seed=derive_seed(run_seed, s.get("seed", 0), "synthetic"),
            text_len=tuple(s.get("text_len", (4, 12))),
        )
    return load_dataset(cfg.data["dataset"], cfg.data.get("manifest"))


def run_experiment(cfg: ExperimentConfig, run_seed: int) -> ExperimentReport:
    """One full comparison run; the validation and test splits are never
    noised or filtered."""
    base_train = cfg.train

    with _stage("data"):
        ds = _source_dataset(cfg, run_seed)
    with _stage("split"):
        spec = replace(cfg.split, seed=derive_seed(run_seed, cfg.split.seed, "split"))
        train_ds, _val_ds, test_ds = stratified_split(ds, spec)
    with _stage("noise"):
        nspec = NoiseSpec(
            cfg.noise.rate, derive_seed(run_seed, cfg.noise.seed, "noise")
        )
        noisy_train, flips = noise.inject_noise(train_ds, nspec)

    with _stage("baseline"):
        tcfg = replace(base_train, seed=derive_seed(run_seed, base_train.seed, "train"))
        baseline_eval = _evaluate(model.train(noisy_train, tcfg), test_ds)

    with _stage("confident-learning"):
        pm = model.oof_predict(noisy_train, cfg.cl_k, tcfg, n_jobs=cfg.jobs)
        issues = confident.find_label_issues(pm, noisy_train)
        cl_filter = evaluation.apply_filter(noisy_train, issues.flagged, "CL")
        cl_cfg = replace(
            base_train, seed=derive_seed(run_seed, base_train.seed, "retrain_cl")
        )
        cl_eval = _evaluate(model.train(cl_filter.retained, cl_cfg), test_ds)

    with _stage("cartography"):
        dyn_cfg = replace(
            base_train,
            epochs=cfg.dm_epochs,
            seed=derive_seed(run_seed, base_train.seed, "dynamics"),
        )
        log = model.record_dynamics(noisy_train, dyn_cfg)
        records = cartography.categorize(cartography.compute_metrics(log, noisy_train))
        threshold, dm_removed = cartography.knee_threshold(records)
        dyn_stats = cartography.corpus_stats(records, threshold)
        dm_filter = evaluation.apply_filter(noisy_train, dm_removed, "DM")
        dm_cfg = replace(
            base_train, seed=derive_seed(run_seed, base_train.seed, "retrain_dm")
        )
        dm_eval = _evaluate(model.train(dm_filter.retained, dm_cfg), test_ds)

    with _stage("random-controls"):
        rnd_cl = evaluation.random_control(
            noisy_train,
            cl_filter.removed_count,
            derive_seed(run_seed, base_train.seed, "control_cl"),
        )
        rnd_cl_eval = _evaluate(model.train(rnd_cl.retained, tcfg), test_ds)
        rnd_dm = evaluation.random_control(
            noisy_train,
            dm_filter.removed_count,
            derive_seed(run_seed, base_train.seed, "control_dm"),
        )
        rnd_dm_eval = _evaluate(model.train(rnd_dm.retained, tcfg), test_ds)

    with _stage("report"):
        deltas = evaluation.delta_report(
            baseline_eval,
            {"cl": cl_eval, "dm": dm_eval},
            {"cl": rnd_cl_eval, "dm": rnd_dm_eval},
        )
        detection = {
            "cl": noise.detection_metrics(issues.flagged, flips, len(noisy_train)),
            "dm": noise.detection_metrics(dm_removed, flips, len(noisy_train)),
        }
        conditions = {
            "baseline": Condition(None, baseline_eval),
            "cl": Condition(cl_filter, cl_eval),
            "dm": Condition(dm_filter, dm_eval),
            "random_cl": Condition(rnd_cl, rnd_cl_eval),
            "random_dm": Condition(rnd_dm, rnd_dm_eval),
        }
    return ExperimentReport(
        corpus=cfg.name,
        run_seed=run_seed,
        conditions=conditions,
        deltas=deltas,
        detection=detection,
        dynamics_stats=dyn_stats,
        flipped_count=len(flips),
        config_echo=config_echo(cfg),
    )


def run_all(cfg: ExperimentConfig) -> list[ExperimentReport]:
    return [run_experiment(cfg, s) for s in cfg.seeds]


def config_echo(cfg: ExperimentConfig) -> dict:
    return {
        "name": cfg.name,
        "synthetic": cfg.synthetic,
        "data": cfg.data,
        "split": {"ratios": list(cfg.split.ratios), "seed": cfg.split.seed},
        "train": {
            "epochs": cfg.train.epochs,
            "learning_rate": cfg.train.learning_rate,
            "batch_size": cfg.train.batch_size,
            "feature_dims": cfg.train.feature_dims,
            "seed": cfg.train.seed,
            "l2": cfg.train.l2,
        },
        "cl": {"k": cfg.cl_k},
        "dm": {"epochs": cfg.dm_epochs},
        "noise": {"rate": cfg.noise.rate, "seed": cfg.noise.seed},
        "seeds": list(cfg.seeds),
        "jobs": cfg.jobs,
    }


def _eval_dict(e: EvalReport) -> dict:
    return {
        "f1_macro": e.f1_macro,
        "accuracy": e.accuracy,
        "per_class_f1": list(e.per_class_f1),
    }


def report_to_dict(report: ExperimentReport) -> dict:
    conditions = {}
    for tag, cond in report.conditions.items():
        entry = _eval_dict(cond.eval)
        if cond.filter is None:
            entry.update({"removed": 0, "removed_percent": 0.0, "method": "baseline"})
        else:
            entry.update(
                {
                    "removed": cond.filter.removed_count,
                    "removed_percent": cond.filter.removed_percent,
                    "method": cond.filter.method,
                }
            )
        conditions[tag] = entry
    return {
        "corpus": report.corpus,
        "run_seed": report.run_seed,
        "conditions": conditions,
        "deltas": {
            tag: {"base": d.delta_base, "random": d.delta_random}
            for tag, d in report.deltas.entries.items()
        },
        "detection": {
            tag: {
                "precision": d.precision,
                "recall": d.recall,
                "f1": d.f1,
                "flagged": d.flagged_count,
                "flipped": d.flipped_count,
            }
            for tag, d in report.detection.items()
        },
        "dynamics_stats": cartography.stats_to_dict(report.dynamics_stats),
        "flipped_count": report.flipped_count,
        "config": report.config_echo,
    }


def report_json(report: ExperimentReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


SUMMARY_COLUMNS = ("corpus", "method", "removed", "percent", "f1", "delta_base", "delta_rnd")


def summary_rows(report: ExperimentReport) -> list[dict]:
    """Rows for the summary CSV, one per condition of this run."""

    def row(method, cond: Condition, delta_base=None, delta_rnd=None):
        return {
            "corpus": report.corpus,
            "method": method,
            "removed": 0 if cond.filter is None else cond.filter.removed_count,
            "percent": (
                "0.00"
                if cond.filter is None
                else f"{cond.filter.removed_percent:.2f}"
            ),
            "f1": f"{cond.eval.f1_macro:.4f}",
            "delta_base": (
                "-" if delta_base is None else evaluation.format_delta(delta_base)
            ),
            "delta_rnd": (
                "-" if delta_rnd is None else evaluation.format_delta(delta_rnd)
            ),
        }

    c = report.conditions
    d = report.deltas.entries
    base_f1 = c["baseline"].eval.f1_macro
    return [
        row("Baseline", c["baseline"]),
        row("CL", c["cl"], d["cl"].delta_base, d["cl"].delta_random),
        row("DM", c["dm"], d["dm"].delta_base, d["dm"].delta_random),
        row("Rnd(CL)", c["random_cl"], c["random_cl"].eval.f1_macro - base_f1),
        row("Rnd(DM)", c["random_dm"], c["random_dm"].eval.f1_macro - base_f1),
    ]


def write_summary_csv(reports: list[ExperimentReport], path) -> None:
    import csv

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=SUMMARY_COLUMNS)
        w.writeheader()
        for report in reports:
            for row in summary_rows(report):
                w.writerow(row)
