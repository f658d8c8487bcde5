"""Dataset model, stratified splitting, and the file formats shared by every stage.

Datasets live on disk as JSON Lines (one ``{"id", "text", "label"}`` object per
line) next to a manifest JSON ``{"classes": [...]}`` that fixes the class order.
Probability matrices are CSV with an ``id`` column followed by one column per
class name.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed input data or violated dataset invariant."""


class AlignmentError(DataError):
    """Ids of two aligned structures disagree."""


@dataclass(frozen=True)
class ClassMap:
    """Ordered class names; the index of a name is its integer label."""

    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) < 2:
            raise DataError("need at least 2 classes, got %d" % len(self.names))
        if any(not n for n in self.names):
            raise DataError("class names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise DataError("class names must be unique")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown class name {name!r}") from None


@dataclass(frozen=True)
class Example:
    id: str
    text: str
    label: int

    def __post_init__(self):
        if not self.id:
            raise DataError("example id must be non-empty")
        if self.label < 0:
            raise DataError(f"negative label for id {self.id!r}")


@dataclass(frozen=True)
class LabeledDataset:
    examples: tuple[Example, ...]
    classes: ClassMap

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        seen = set()
        for ex in self.examples:
            if ex.id in seen:
                raise DataError(f"duplicate example id {ex.id!r}")
            seen.add(ex.id)
            if ex.label >= len(self.classes):
                raise DataError(
                    f"label {ex.label} of id {ex.id!r} out of range for "
                    f"{len(self.classes)} classes"
                )

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(ex.id for ex in self.examples)

    def labels(self) -> np.ndarray:
        return np.array([ex.label for ex in self.examples], dtype=np.int64)

    def select(self, positions) -> "LabeledDataset":
        """Sub-dataset at the given positions, order as given."""
        return LabeledDataset(tuple(self.examples[i] for i in positions), self.classes)


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            raise DataError("ratios must be three non-negative fractions")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise DataError(f"ratios must sum to 1, got {sum(self.ratios)}")


VALID_KINDS = ("out-of-fold", "in-sample")


@dataclass(frozen=True)
class ProbMatrix:
    """Per-example class probabilities aligned (by position) to a dataset."""

    ids: tuple[str, ...]
    rows: np.ndarray
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        rows = np.asarray(self.rows, dtype=np.float64)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        if rows.ndim != 2 or rows.shape[0] != len(self.ids):
            raise DataError("rows must be an n x C matrix aligned to ids")
        if not np.all(np.isfinite(rows)):
            raise DataError("probabilities must be finite")
        if self.kind not in VALID_KINDS:
            raise DataError(f"kind must be one of {VALID_KINDS}, got {self.kind!r}")

    @property
    def n_classes(self) -> int:
        return self.rows.shape[1]


def manifest_path_for(dataset_path) -> Path:
    return Path(dataset_path).with_suffix(".manifest.json")


def load_class_map(path) -> ClassMap:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if not isinstance(doc, dict) or "classes" not in doc:
        raise DataError(f"manifest {path} must be a JSON object with a 'classes' list")
    return ClassMap(tuple(doc["classes"]))


def save_class_map(classes: ClassMap, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"classes": list(classes.names)}, f, ensure_ascii=False)
        f.write("\n")


def load_dataset(path, manifest=None) -> LabeledDataset:
    """Read a JSON-Lines dataset plus its class manifest.

    ``manifest`` defaults to ``<stem>.manifest.json`` next to the dataset.
    Errors carry the 1-based line number of the offending line.
    """
    path = Path(path)
    if manifest is None:
        manifest = manifest_path_for(path)
    classes = load_class_map(manifest)
    examples = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: malformed JSON ({e.msg})") from None
            for field in ("id", "text", "label"):
                if field not in row:
                    raise DataError(f"{path}:{lineno}: missing field {field!r}")
            if row["id"] in seen:
                raise DataError(f"{path}:{lineno}: duplicate id {row['id']!r}")
            seen.add(row["id"])
            try:
                label = classes.index(row["label"])
            except DataError:
                raise DataError(
                    f"{path}:{lineno}: label {row['label']!r} not in manifest"
                ) from None
            examples.append(Example(row["id"], row["text"], label))
    return LabeledDataset(tuple(examples), classes)


def save_dataset(ds: LabeledDataset, path, manifest=None) -> None:
    path = Path(path)
    if manifest is None:
        manifest = manifest_path_for(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for ex in ds:
            f.write(
                json.dumps(
                    {"id": ex.id, "text": ex.text, "label": ds.classes.names[ex.label]},
                    ensure_ascii=False,
                )
                + "\n"
            )
    save_class_map(ds.classes, manifest)


def _largest_remainder_counts(n: int, ratios) -> list[int]:
    """Split n into parts proportional to ratios; leftovers go to the largest
    fractional remainders, earlier parts winning ties."""
    exact = [r * n for r in ratios]
    base = [int(np.floor(e)) for e in exact]
    leftover = n - sum(base)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def stratified_split(
    ds: LabeledDataset, spec: SplitSpec
) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Deterministic per-class split into train/val/test.

    Per class the three counts follow the largest-remainder rule; membership
    within a class is a seeded shuffle. Each part keeps the original dataset
    order.
    """
    labels = ds.labels()
    C = len(ds.classes)
    rng = np.random.default_rng(spec.seed)
    part_positions: list[list[int]] = [[], [], []]
    for c in range(C):
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            raise DataError(f"class {ds.classes.names[c]!r} has no examples")
        perm = idx[rng.permutation(idx.size)]
        counts = _largest_remainder_counts(idx.size, spec.ratios)
        offset = 0
        for p in range(3):
            part_positions[p].extend(perm[offset : offset + counts[p]].tolist())
            offset += counts[p]
    return tuple(ds.select(sorted(pos)) for pos in part_positions)


def validate_prob_matrix(pm: ProbMatrix, ds: LabeledDataset) -> np.ndarray:
    """Check id alignment and row-stochasticity; return |row sum - 1| per row."""
    if len(pm.ids) != len(ds):
        raise AlignmentError(
            f"probability matrix has {len(pm.ids)} rows, dataset has {len(ds)}"
        )
    for k, (a, b) in enumerate(zip(pm.ids, ds.ids)):
        if a != b:
            raise AlignmentError(f"id mismatch at position {k}: {a!r} != {b!r}")
    if pm.n_classes != len(ds.classes):
        raise AlignmentError(
            f"matrix has {pm.n_classes} columns, dataset has {len(ds.classes)} classes"
        )
    if np.any(pm.rows < 0) or np.any(pm.rows > 1):
        bad = np.argwhere((pm.rows < 0) | (pm.rows > 1))[0]
        raise DataError(
            f"probability out of [0,1] at row {bad[0]}, column {bad[1]}: "
            f"{pm.rows[bad[0], bad[1]]}"
        )
    sums = pm.rows.sum(axis=1)
    dev = np.abs(sums - 1.0)
    worst = int(np.argmax(dev))
    if dev[worst] > 1e-6:
        raise DataError(f"row {worst} sums to {sums[worst]}, expected 1 within 1e-6")
    return dev


def save_prob_matrix(pm: ProbMatrix, classes: ClassMap, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", *classes.names])
        for i, ex_id in enumerate(pm.ids):
            w.writerow([ex_id, *(repr(float(v)) for v in pm.rows[i])])


def load_prob_matrix(path, kind: str = "out-of-fold") -> ProbMatrix:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as f:
        r = csv.reader(f)
        header = next(r, None)
        if not header or header[0] != "id" or len(header) < 3:
            raise DataError(f"{path}: expected header 'id,<class names>'")
        ids = []
        rows = []
        for lineno, row in enumerate(r, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: {e}") from None
    return ProbMatrix(tuple(ids), np.array(rows, dtype=np.float64), kind)
