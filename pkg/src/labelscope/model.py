"""Reference classifier: hashed bag-of-words features + softmax regression.

Small and fully deterministic so the whole detection pipeline runs in seconds.
Features use FNV-1a 64-bit hashing, weights start at zero, and all shuffling
comes from the config seed, so runs are bit-reproducible across platforms.
"""

from __future__ import annotations

import csv
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import ClassMap, DataError, LabeledDataset, ProbMatrix

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class NumericError(ArithmeticError):
    """Training produced a non-finite loss (learning-rate blow-up)."""


def fnv1a64(token: str) -> int:
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def featurize(text: str, dims: int) -> np.ndarray:
    """Hash lowercase unigrams into a dims-long L2-normalized count vector."""
    if dims < 2:
        raise DataError(f"feature dims must be >= 2, got {dims}")
    vec = np.zeros(dims, dtype=np.float64)
    for tok in tokenize(text):
        vec[fnv1a64(tok) % dims] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def featurize_dataset(ds: LabeledDataset, dims: int) -> np.ndarray:
    X = np.zeros((len(ds), dims), dtype=np.float64)
    for i, ex in enumerate(ds):
        X[i] = featurize(ex.text, dims)
    return X


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3
    learning_rate: float = 1.0
    batch_size: int = 32
    feature_dims: int = 1024
    seed: int = 0
    l2: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if self.feature_dims < 2:
            raise DataError(f"feature_dims must be >= 2, got {self.feature_dims}")
        if self.learning_rate < 0:
            raise DataError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise DataError("batch_size must be positive")
        if self.l2 < 0:
            raise DataError("l2 must be non-negative")


@dataclass(frozen=True)
class ModelParams:
    weights: np.ndarray  # C x D
    bias: np.ndarray  # C

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NumericError("model parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(W, b, X, y, n_classes, l2=0.0):
    """Mean cross-entropy + l2*||W||^2 and its gradients w.r.t. W and b."""
    m = X.shape[0]
    P = softmax(X @ W.T + b)
    eps = 1e-300  # guards log(0); probabilities this small never occur in practice
    loss = -np.mean(np.log(P[np.arange(m), y] + eps)) + l2 * np.sum(W * W)
    G = P.copy()
    G[np.arange(m), y] -= 1.0
    dW = G.T @ X / m + 2.0 * l2 * W
    db = G.mean(axis=0)
    return loss, dW, db


def _fit(X, y, n_classes, cfg: TrainConfig, after_epoch=None):
    n, D = X.shape
    W = np.zeros((n_classes, D))
    b = np.zeros(n_classes)
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, dW, db = loss_and_grads(W, b, X[batch], y[batch], n_classes, cfg.l2)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss {loss}")
            W -= cfg.learning_rate * dW
            b -= cfg.learning_rate * db
        if after_epoch is not None:
            after_epoch(W, b)
    return W, b


def train(ds: LabeledDataset, cfg: TrainConfig) -> ModelParams:
    """Mini-batch gradient descent from zero weights; deterministic per seed."""
    if len(ds) == 0:
        raise DataError("cannot train on an empty dataset")
    y = ds.labels()
    C = len(ds.classes)
    present = np.bincount(y, minlength=C)
    if np.any(present == 0):
        missing = ds.classes.names[int(np.argmin(present))]
        raise DataError(f"class {missing!r} has no training examples")
    X = featurize_dataset(ds, cfg.feature_dims)
    W, b = _fit(X, y, C, cfg)
    return ModelParams(W, b)


def predict_proba(params: ModelParams, ds: LabeledDataset) -> ProbMatrix:
    X = featurize_dataset(ds, params.weights.shape[1])
    return ProbMatrix(ds.ids, softmax(X @ params.weights.T + params.bias), "in-sample")


def _fold_seed(base_seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([base_seed & _MASK64, fold]).generate_state(1)[0])


def stratified_folds(labels: np.ndarray, K: int, seed: int) -> np.ndarray:
    """Seeded stratified fold assignment; every class must have >= K examples."""
    rng = np.random.default_rng(seed)
    folds = np.empty(len(labels), dtype=np.int64)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < K:
            raise DataError(
                f"class {c} has {idx.size} examples, fewer than K={K} folds"
            )
        perm = idx[rng.permutation(idx.size)]
        folds[perm] = np.arange(perm.size) % K
    return folds


def oof_predict(
    ds: LabeledDataset, K: int, cfg: TrainConfig, n_jobs: int = 1
) -> ProbMatrix:
    """Out-of-fold probabilities from K seeded stratified folds.

    Each fold's row block comes from a model trained only on the other folds;
    the result is identical whether folds run sequentially or concurrently.
    """
    if K < 2:
        raise DataError(f"K must be >= 2, got {K}")
    y = ds.labels()
    C = len(ds.classes)
    folds = stratified_folds(y, K, cfg.seed)
    X = featurize_dataset(ds, cfg.feature_dims)
    rows = np.zeros((len(ds), C))

    def run_fold(f: int):
        held = folds == f
        fold_cfg = replace(cfg, seed=_fold_seed(cfg.seed, f))
        W, b = _fit(X[~held], y[~held], C, fold_cfg)
        return held, softmax(X[held] @ W.T + b)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run_fold, range(K)))
    else:
        results = [run_fold(f) for f in range(K)]
    for held, probs in results:
        rows[held] = probs
    return ProbMatrix(ds.ids, rows, "out-of-fold")


@dataclass(frozen=True)
class DynamicsLog:
    """Full-dataset probability snapshots after each training epoch."""

    ids: tuple[str, ...]
    probs: np.ndarray  # E x n x C

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        p = np.asarray(self.probs, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if p.ndim != 3 or p.shape[0] < 2 or p.shape[1] != len(self.ids):
            raise DataError("probs must be E x n x C with E >= 2, aligned to ids")
        if np.any(np.abs(p.sum(axis=2) - 1.0) > 1e-6):
            raise DataError("each (epoch, example) probability row must sum to 1")

    @property
    def n_epochs(self) -> int:
        return self.probs.shape[0]


def record_dynamics(ds: LabeledDataset, cfg: TrainConfig) -> DynamicsLog:
    """Train once for cfg.epochs, snapshotting in-sample probabilities after
    every epoch's updates."""
    if cfg.epochs < 2:
        raise DataError(f"dynamics need epochs >= 2, got {cfg.epochs}")
    if len(ds) == 0:
        raise DataError("cannot record dynamics on an empty dataset")
    y = ds.labels()
    C = len(ds.classes)
    X = featurize_dataset(ds, cfg.feature_dims)
    snaps = []

    def snap(W, b):
        snaps.append(softmax(X @ W.T + b))

    _fit(X, y, C, cfg, after_epoch=snap)
    return DynamicsLog(ds.ids, np.stack(snaps))


def save_dynamics(log: DynamicsLog, classes: ClassMap, path) -> None:
    """CSV with one row per (example, epoch); epochs numbered from 1."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "epoch", *classes.names])
        for e in range(log.n_epochs):
            for i, ex_id in enumerate(log.ids):
                w.writerow([ex_id, e + 1, *(repr(float(v)) for v in log.probs[e, i])])


def load_dynamics(path) -> DynamicsLog:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as f:
        r = csv.reader(f)
        header = next(r, None)
        if not header or header[:2] != ["id", "epoch"]:
            raise DataError(f"{path}: expected header 'id,epoch,<class names>'")
        C = len(header) - 2
        by_epoch: dict[int, dict[str, list[float]]] = {}
        id_order: list[str] = []
        seen_ids = set()
        for lineno, row in enumerate(r, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            ex_id, epoch = row[0], int(row[1])
            if ex_id not in seen_ids:
                seen_ids.add(ex_id)
                id_order.append(ex_id)
            by_epoch.setdefault(epoch, {})[ex_id] = [float(v) for v in row[2:]]
    epochs = sorted(by_epoch)
    if epochs != list(range(1, len(epochs) + 1)):
        raise DataError(f"{path}: epochs must be contiguous from 1, got {epochs}")
    probs = np.zeros((len(epochs), len(id_order), C))
    for e in epochs:
        rows = by_epoch[e]
        if set(rows) != seen_ids:
            raise DataError(f"{path}: epoch {e} does not cover every id")
        for i, ex_id in enumerate(id_order):
            probs[e - 1, i] = rows[ex_id]
    return DynamicsLog(tuple(id_order), probs)
