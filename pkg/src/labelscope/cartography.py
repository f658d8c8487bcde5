"""Training-dynamics cartography: per-example confidence/variability/
correctness/forgetfulness, median-based easy/ambiguous/hard regions, and the
knee-point confidence filter."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import AlignmentError, DataError, LabeledDataset
from .model import DynamicsLog

EASY = "easy"
AMBIGUOUS = "ambiguous"
HARD = "hard"


@dataclass(frozen=True)
class CartographyRecord:
    id: str
    confidence: float  # mean over epochs of p(given label)
    variability: float  # population std of the same
    correctness_count: int
    correctness_fraction: float
    forgetfulness: int
    category: str | None = None


@dataclass(frozen=True)
class CorpusDynamicsStats:
    mean_confidence: float
    mean_variability: float
    mean_correctness_count: float
    mean_forgetfulness: float
    knee_threshold: float
    n_easy: int
    n_ambiguous: int
    n_hard: int


def compute_metrics(log: DynamicsLog, ds: LabeledDataset) -> list[CartographyRecord]:
    if log.ids != ds.ids:
        raise AlignmentError("dynamics log ids do not match the dataset ids")
    E = log.n_epochs
    labels = ds.labels()
    # argmax ties resolve to the lowest class index
    predicted = np.argmax(log.probs, axis=2)  # E x n
    records = []
    for i, ex in enumerate(ds):
        p_true = log.probs[:, i, labels[i]]
        correct = predicted[:, i] == labels[i]
        confidence = float(p_true.mean())
        variability = float(p_true.std())  # population std
        count = int(correct.sum())
        forgetfulness = 0
        if count > 0:
            first = int(np.argmax(correct))
            for e in range(first + 1, E):
                if correct[e - 1] and not correct[e]:
                    forgetfulness += 1
        records.append(
            CartographyRecord(
                id=ex.id,
                confidence=confidence,
                variability=variability,
                correctness_count=count,
                correctness_fraction=count / E,
                forgetfulness=forgetfulness,
            )
        )
    return records


def _lower_median(values) -> float:
    """Lower of the two middle values for even counts."""
    s = sorted(values)
    return s[(len(s) - 1) // 2]


def categorize(records: list[CartographyRecord]) -> list[CartographyRecord]:
    """Ambiguous above the variability median; the rest split easy/hard by the
    confidence median (computed over all records). Strict comparisons, so an
    all-identical input degrades to all-hard."""
    if not records:
        raise DataError("cannot categorize an empty record list")
    med_var = _lower_median(r.variability for r in records)
    med_conf = _lower_median(r.confidence for r in records)
    out = []
    for r in records:
        if r.variability > med_var:
            cat = AMBIGUOUS
        elif r.confidence > med_conf:
            cat = EASY
        else:
            cat = HARD
        out.append(replace(r, category=cat))
    return out


def knee_threshold(records: list[CartographyRecord]) -> tuple[float, frozenset[str]]:
    """Knee of the sorted-confidence curve; removes everything strictly below.

    Confidences are sorted ascending and min-max normalized on both axes; the
    knee is the point farthest from the chord between the endpoints, ties
    resolving to the higher index (the top of a jump). Flat or linear curves
    remove nothing.
    """
    n = len(records)
    if n < 3:
        raise DataError(f"knee detection needs at least 3 records, got {n}")
    order = sorted(range(n), key=lambda i: records[i].confidence)
    conf = np.array([records[i].confidence for i in order])
    span = conf[-1] - conf[0]
    if span < 1e-12:
        return float(conf[0]), frozenset()
    x = np.arange(n) / (n - 1)
    y = (conf - conf[0]) / span
    # chord endpoints are (0,0) and (1,1) after normalization
    dist = np.abs(y - x) / np.sqrt(2.0)
    if np.all(dist < 1e-12):
        return float(conf[0]), frozenset()
    knee = n - 1 - int(np.argmax(dist[::-1]))  # ties -> highest index
    threshold = float(conf[knee])
    removed = frozenset(r.id for r in records if r.confidence < threshold)
    return threshold, removed


def corpus_stats(
    records: list[CartographyRecord], threshold: float
) -> CorpusDynamicsStats:
    if not records or any(r.category is None for r in records):
        raise DataError("corpus stats need a non-empty categorized record list")
    cats = [r.category for r in records]
    return CorpusDynamicsStats(
        mean_confidence=float(np.mean([r.confidence for r in records])),
        mean_variability=float(np.mean([r.variability for r in records])),
        mean_correctness_count=float(np.mean([r.correctness_count for r in records])),
        mean_forgetfulness=float(np.mean([r.forgetfulness for r in records])),
        knee_threshold=threshold,
        n_easy=cats.count(EASY),
        n_ambiguous=cats.count(AMBIGUOUS),
        n_hard=cats.count(HARD),
    )


def stats_to_dict(stats: CorpusDynamicsStats) -> dict:
    return {
        "mean_confidence": round(stats.mean_confidence, 3),
        "mean_variability": round(stats.mean_variability, 3),
        "mean_correctness_count": round(stats.mean_correctness_count, 3),
        "mean_forgetfulness": round(stats.mean_forgetfulness, 3),
        "knee_threshold": round(stats.knee_threshold, 3),
        "easy": stats.n_easy,
        "ambiguous": stats.n_ambiguous,
        "hard": stats.n_hard,
    }


def cartography_report(
    records: list[CartographyRecord],
    stats: CorpusDynamicsStats,
    removed: frozenset[str],
) -> dict:
    return {
        "examples": [
            {
                "id": r.id,
                "confidence": r.confidence,
                "variability": r.variability,
                "correctness_count": r.correctness_count,
                "forgetfulness": r.forgetfulness,
                "category": r.category,
            }
            for r in records
        ],
        "stats": stats_to_dict(stats),
        "removed": sorted(removed),
    }


def save_cartography_report(report: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, ensure_ascii=False, indent=2)
        f.write("\n")


_CATEGORY_COLORS = {EASY: "#2166ac", AMBIGUOUS: "#f4a582", HARD: "#b2182b"}


def datamap_svg(records: list[CartographyRecord], width=640, height=480) -> str:
    """Scatter of the data map: x = variability, y = confidence, one marker per
    example, colored by category."""
    pad = 48
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
        f'y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 12}" text-anchor="middle" '
        f'font-size="13">variability</text>',
        f'<text x="14" y="{height // 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 14 {height // 2})">confidence</text>',
    ]
    for r in records:
        cx = pad + (r.variability / 0.5) * (width - 2 * pad)
        cy = (height - pad) - r.confidence * (height - 2 * pad)
        color = _CATEGORY_COLORS.get(r.category or HARD, "#777777")
        parts.append(
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2.5" fill="{color}" '
            f'fill-opacity="0.6"><title>{r.id}</title></circle>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
