"""Synthetic ground truth: seeded label flipping, detection precision/recall,
and a balanced token-pool corpus generator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ClassMap, DataError, Example, LabeledDataset


@dataclass(frozen=True)
class NoiseSpec:
    rate: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise DataError(f"noise rate must be in [0,1], got {self.rate}")


@dataclass(frozen=True)
class FlipRecord:
    entries: tuple[tuple[str, int, int], ...]  # (id, original, flipped)

    def __post_init__(self):
        for ex_id, orig, new in self.entries:
            if orig == new:
                raise DataError(f"flip of {ex_id!r} keeps label {orig}")

    @property
    def flipped_ids(self) -> frozenset[str]:
        return frozenset(e[0] for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class DetectionReport:
    precision: float
    recall: float
    f1: float
    flagged_count: int
    flipped_count: int


def inject_noise(ds: LabeledDataset, spec: NoiseSpec) -> tuple[LabeledDataset, FlipRecord]:
    """Flip each label independently with probability spec.rate to a uniformly
    chosen different class; ids and order unchanged."""
    C = len(ds.classes)
    rng = np.random.default_rng(spec.seed)
    flip = rng.random(len(ds)) < spec.rate
    examples = []
    flips = []
    for i, ex in enumerate(ds):
        if flip[i]:
            r = int(rng.integers(0, C - 1))
            new = r if r < ex.label else r + 1
            flips.append((ex.id, ex.label, new))
            examples.append(Example(ex.id, ex.text, new))
        else:
            examples.append(ex)
    return LabeledDataset(tuple(examples), ds.classes), FlipRecord(tuple(flips))


def detection_metrics(flagged, flips: FlipRecord, n: int) -> DetectionReport:
    flagged = frozenset(flagged)
    flipped = flips.flipped_ids
    hit = len(flagged & flipped)
    precision = hit / len(flagged) if flagged else 0.0
    recall = hit / len(flipped) if flipped else 0.0
    f1 = (
        2 * precision * recall / (precision + recall) if precision + recall else 0.0
    )
    return DetectionReport(precision, recall, f1, len(flagged), len(flipped))


def make_synthetic(
    n: int,
    n_classes: int,
    separation: float,
    vocab: int,
    seed: int,
    text_len: tuple[int, int] = (4, 12),
) -> LabeledDataset:
    """Balanced corpus where each class owns a token pool of `vocab` words and
    all classes share another; each token is class-specific with probability
    `separation`."""
    if n_classes < 2 or n < n_classes:
        raise DataError(f"need n >= n_classes >= 2, got n={n}, C={n_classes}")
    if not 0.0 <= separation <= 1.0:
        raise DataError(f"separation must be in [0,1], got {separation}")
    if vocab < 1:
        raise DataError("vocab must be positive")
    lo, hi = text_len
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(n):
        label = i % n_classes  # round-robin keeps class counts within 1
        length = int(rng.integers(lo, hi + 1))
        tokens = []
        for _ in range(length):
            if rng.random() < separation:
                tokens.append(f"c{label}w{int(rng.integers(vocab))}")
            else:
                tokens.append(f"shw{int(rng.integers(vocab))}")
        examples.append(Example(f"syn{i:06d}", " ".join(tokens), label))
    classes = ClassMap(tuple(f"class{j}" for j in range(n_classes)))
    return LabeledDataset(tuple(examples), classes)
