"""Confident-learning core: adaptive class thresholds, the confident joint,
and label-issue flagging with self-confidence quality scores."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import LabeledDataset, ProbMatrix, validate_prob_matrix

UNDECIDED = -1


@dataclass(frozen=True)
class ClassThresholds:
    """t[j] = mean predicted probability of class j over examples labeled j.

    Classes with no examples get NaN and never enter a confident set.
    """

    t: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class ConfidentJoint:
    counts: np.ndarray  # C x C, row = given label, column = confident label
    undecided: int
    # per example: confidently predicted class index, or UNDECIDED
    assignment: tuple[int, ...]


@dataclass(frozen=True)
class IssueReport:
    flagged: frozenset[str]
    quality: dict[str, float]  # self-confidence per example id
    per_class_flags: dict[str, int]
    undecided: int
    confident_joint: np.ndarray

    @property
    def flagged_count(self) -> int:
        return len(self.flagged)

    def flagged_percent(self, total: int) -> float:
        return round(100.0 * len(self.flagged) / total, 2) if total else 0.0


def class_thresholds(pm: ProbMatrix, ds: LabeledDataset) -> ClassThresholds:
    validate_prob_matrix(pm, ds)
    if pm.kind != "out-of-fold":
        warnings.warn(
            "class thresholds expect out-of-fold probabilities; "
            f"got kind={pm.kind!r}",
            stacklevel=2,
        )
    labels = ds.labels()
    C = pm.n_classes
    t = np.full(C, np.nan)
    counts = np.zeros(C, dtype=np.int64)
    for j in range(C):
        mask = labels == j
        counts[j] = int(mask.sum())
        if counts[j] > 0:
            t[j] = pm.rows[mask, j].mean()
    return ClassThresholds(t, counts)


def confident_joint(
    pm: ProbMatrix, ds: LabeledDataset, thresholds: ClassThresholds
) -> ConfidentJoint:
    """Assign each example to the highest-probability class whose threshold it
    clears (ties to the lowest class index); no clearance means undecided."""
    validate_prob_matrix(pm, ds)
    labels = ds.labels()
    C = pm.n_classes
    t = thresholds.t
    counts = np.zeros((C, C), dtype=np.int64)
    assignment = []
    undecided = 0
    defined = ~np.isnan(t)
    for i in range(len(ds)):
        p = pm.rows[i]
        in_set = defined & (p >= np.where(defined, t, np.inf))
        if not in_set.any():
            assignment.append(UNDECIDED)
            undecided += 1
            continue
        candidates = np.flatnonzero(in_set)
        j = int(candidates[np.argmax(p[candidates])])  # argmax ties -> lowest index
        counts[labels[i], j] += 1
        assignment.append(j)
    return ConfidentJoint(counts, undecided, tuple(assignment))


def find_label_issues(pm: ProbMatrix, ds: LabeledDataset) -> IssueReport:
    """Flag off-diagonal confident-joint members; quality = p(given label)."""
    t = class_thresholds(pm, ds)
    cj = confident_joint(pm, ds, t)
    labels = ds.labels()
    flagged = set()
    quality = {}
    per_class = {name: 0 for name in ds.classes.names}
    for i, ex in enumerate(ds):
        quality[ex.id] = float(pm.rows[i, labels[i]])
        j = cj.assignment[i]
        if j != UNDECIDED and j != labels[i]:
            flagged.add(ex.id)
            per_class[ds.classes.names[labels[i]]] += 1
    return IssueReport(frozenset(flagged), quality, per_class, cj.undecided, cj.counts)


def issue_report_to_dict(report: IssueReport, total: int) -> dict:
    return {
        "flagged": sorted(report.flagged),
        "quality": {k: report.quality[k] for k in sorted(report.quality)},
        "per_class_flags": report.per_class_flags,
        "undecided": report.undecided,
        "confident_joint": report.confident_joint.tolist(),
        "flagged_count": report.flagged_count,
        "flagged_percent": report.flagged_percent(total),
    }


def save_issue_report(report: IssueReport, total: int, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(issue_report_to_dict(report, total), f, ensure_ascii=False, indent=2)
        f.write("\n")
