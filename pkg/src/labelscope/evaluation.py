"""Filtering application, random-removal controls, F1-macro/accuracy, and
delta reports against baseline and matched controls."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError, LabeledDataset


@dataclass(frozen=True)
class FilterResult:
    retained: LabeledDataset
    removed_ids: frozenset[str]
    removed_count: int
    removed_percent: float
    method: str


@dataclass(frozen=True)
class EvalReport:
    f1_macro: float
    accuracy: float
    per_class_f1: tuple[float, ...]


@dataclass(frozen=True)
class DeltaEntry:
    delta_base: float
    delta_random: float


@dataclass(frozen=True)
class DeltaReport:
    entries: dict[str, DeltaEntry]


def removed_percent(removed: int, total: int) -> float:
    return round(100.0 * removed / total, 2) if total else 0.0


def apply_filter(ds: LabeledDataset, removed_ids, method: str) -> FilterResult:
    removed = frozenset(removed_ids)
    known = set(ds.ids)
    unknown = removed - known
    if unknown:
        raise DataError(f"removal set contains unknown id {sorted(unknown)[0]!r}")
    retained = LabeledDataset(
        tuple(ex for ex in ds if ex.id not in removed), ds.classes
    )
    return FilterResult(
        retained=retained,
        removed_ids=removed,
        removed_count=len(removed),
        removed_percent=removed_percent(len(removed), len(ds)),
        method=method,
    )


def random_control(ds: LabeledDataset, k: int, seed: int) -> FilterResult:
    """Remove a uniform (unstratified) sample of k examples, seeded."""
    if not 0 <= k <= len(ds):
        raise DataError(f"k must be in [0, {len(ds)}], got {k}")
    rng = np.random.default_rng(seed)
    positions = rng.choice(len(ds), size=k, replace=False)
    removed = frozenset(ds.ids[i] for i in positions)
    return apply_filter(ds, removed, "random")


def f1_macro(preds, golds, n_classes: int) -> EvalReport:
    """Unweighted mean of per-class F1 over all n_classes; 0/0 ratios are 0."""
    preds = np.asarray(preds, dtype=np.int64)
    golds = np.asarray(golds, dtype=np.int64)
    if preds.shape != golds.shape:
        raise DataError(
            f"preds and golds lengths differ: {preds.shape[0]} vs {golds.shape[0]}"
        )
    if preds.size and (max(preds.max(), golds.max()) >= n_classes or preds.min() < 0
                       or golds.min() < 0):
        raise DataError(f"labels must lie in [0, {n_classes})")
    per_class = []
    for c in range(n_classes):
        tp = int(np.sum((preds == c) & (golds == c)))
        fp = int(np.sum((preds == c) & (golds != c)))
        fn = int(np.sum((preds != c) & (golds == c)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append(f1)
    macro = float(np.mean(per_class)) if per_class else 0.0
    accuracy = float(np.mean(preds == golds)) if preds.size else 0.0
    return EvalReport(macro, accuracy, tuple(per_class))


def delta_report(
    baseline: EvalReport,
    variants: dict[str, EvalReport],
    controls: dict[str, EvalReport],
) -> DeltaReport:
    """Exact (un-rounded) F1-macro differences per variant: vs baseline and vs
    its size-matched random control."""
    entries = {}
    for tag, report in variants.items():
        if tag not in controls:
            raise DataError(f"no matched random control for variant {tag!r}")
        entries[tag] = DeltaEntry(
            delta_base=report.f1_macro - baseline.f1_macro,
            delta_random=report.f1_macro - controls[tag].f1_macro,
        )
    return DeltaReport(entries)


def format_delta(value: float) -> str:
    return f"{value:+.4f}"
