"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
report.
"""

import time

import numpy as np
import pytest

from labelscope.cartography import CartographyRecord, compute_metrics, knee_threshold
from labelscope.confident import class_thresholds, confident_joint
from labelscope.evaluation import delta_report, f1_macro, format_delta, removed_percent
from labelscope.experiment import config_from_dict, report_json, run_experiment
from labelscope.model import DynamicsLog, loss_and_grads

from conftest import build_dataset, build_probs
from test_confident import oracle_confident_joint
from test_evaluation import oracle_f1_macro

REGIME_SEEDS = (1, 2, 3, 4, 5)

REGIME_CONFIG = {
    "name": "synthetic",
    "synthetic": {"n": 2000, "classes": 2, "separation": 0.9, "vocab": 100,
                  "text_len": (2, 8)},
    "split": {"ratios": [0.8, 0.1, 0.1], "seed": 0},
    "train": {"epochs": 3, "learning_rate": 0.5, "batch_size": 32,
              "feature_dims": 512, "l2": 0.0, "seed": 0},
    "cl": {"k": 4},
    "dm": {"epochs": 10},
    "seeds": list(REGIME_SEEDS),
}


def _report(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    assert ok, f"{name}: {detail}"


def test_confident_joint_oracle_equivalence():
    rng = np.random.default_rng(20240)
    t0 = time.time()
    for _ in range(1000):
        n, C = int(rng.integers(2, 51)), int(rng.integers(2, 5))
        labels = rng.integers(0, C, size=n).tolist()
        probs = rng.dirichlet(np.ones(C) * rng.uniform(0.3, 3), size=n)
        ds = build_dataset(labels, classes=[f"c{j}" for j in range(C)])
        pm = build_probs(ds, probs)
        cj = confident_joint(pm, ds, class_thresholds(pm, ds))
        counts, undecided, assignment = oracle_confident_joint(
            probs.tolist(), labels, C
        )
        assert cj.counts.tolist() == counts
        assert cj.undecided == undecided
        assert list(cj.assignment) == assignment
    elapsed = time.time() - t0
    _report(
        "confident joint == brute-force oracle (1000 trials)",
        elapsed < 10,
        f"{elapsed:.1f}s",
    )


def test_f1_macro_oracle_equivalence():
    rng = np.random.default_rng(20241)
    t0 = time.time()
    for _ in range(1000):
        n, C = int(rng.integers(1, 21)), int(rng.integers(2, 6))
        preds = rng.integers(0, C, size=n).tolist()
        golds = rng.integers(0, C, size=n).tolist()
        assert abs(f1_macro(preds, golds, C).f1_macro - oracle_f1_macro(preds, golds, C)) < 1e-12
    elapsed = time.time() - t0
    _report(
        "f1-macro == brute-force oracle (1000 trials, 1e-12)",
        elapsed < 5,
        f"{elapsed:.1f}s",
    )


def test_cartography_fixtures():
    ds = build_dataset([0])
    probs = np.array([[[p, 1 - p]] for p in (0.5, 0.5, 1.0, 1.0)])
    (r,) = compute_metrics(DynamicsLog(ds.ids, probs), ds)
    ok1 = r.confidence == pytest.approx(0.75) and r.variability == pytest.approx(0.25)

    series = (0.3, 0.8, 0.7, 0.2, 0.9)  # correctness [0,1,1,0,1]
    probs = np.array([[[p, 1 - p]] for p in series])
    (r,) = compute_metrics(DynamicsLog(ds.ids, probs), ds)
    ok2 = r.forgetfulness == 1 and r.correctness_count == 3
    _report("cartography fixtures (confidence/variability/forgetfulness)", ok1 and ok2)


def test_table2_removed_percent_arithmetic():
    cases = [
        (829, 2337, 35.47),
        (1841, 49123, 3.75),
        (4558, 49123, 9.28),
        (1567, 8524, 18.38),
        (1234, 8524, 14.48),
        (256, 2337, 10.95),
    ]
    for removed, total, expected in cases:
        assert removed_percent(removed, total) == expected
    _report("filtering-percentage arithmetic (6 cases, 2 decimals)", True)


def test_table4_delta_arithmetic():
    def ev(f1):
        from labelscope.evaluation import EvalReport

        return EvalReport(f1, 0.0, (f1, f1))

    # (baseline, cl, dm, rnd_cl, rnd_dm) F1 values with their published deltas
    published = [
        (0.9353, 0.9320, 0.9260, 0.9325, 0.9237,
         "-0.0033", "-0.0093", "-0.0005", "+0.0023"),
        (0.6635, 0.6262, 0.6438, 0.6096, 0.6297,
         "-0.0373", "-0.0197", "+0.0166", "+0.0141"),
        (0.6444, 0.6578, 0.6441, 0.5230, 0.5851,
         "+0.0134", "-0.0003", "+0.1348", "+0.0590"),
    ]
    checked = 0
    for base, cl, dm, rcl, rdm, d_cb, d_db, d_cr, d_dr in published:
        report = delta_report(
            ev(base), {"cl": ev(cl), "dm": ev(dm)}, {"cl": ev(rcl), "dm": ev(rdm)}
        )
        assert format_delta(report.entries["cl"].delta_base) == d_cb
        assert format_delta(report.entries["dm"].delta_base) == d_db
        assert format_delta(report.entries["cl"].delta_random) == d_cr
        assert format_delta(report.entries["dm"].delta_random) == d_dr
        checked += 4
    _report(f"delta arithmetic ({checked} published deltas, 4 decimals)", checked == 12)


@pytest.fixture(scope="module")
def high_noise_runs():
    cfg = config_from_dict(dict(REGIME_CONFIG, noise={"rate": 0.3, "seed": 0}))
    return [run_experiment(cfg, s) for s in REGIME_SEEDS]


def test_high_noise_regime_delta_rnd_positive(high_noise_runs):
    t0 = time.time()
    drnds = [r.deltas.entries["cl"].delta_random for r in high_noise_runs]
    ok = all(d > 0 for d in drnds)
    _report(
        "high-noise regime: CL delta-vs-random > 0 in every seed",
        ok,
        " ".join(format_delta(d) for d in drnds),
    )
    assert time.time() - t0 < 300


def test_high_noise_regime_detection_quality(high_noise_runs):
    recall = float(np.mean([r.detection["cl"].recall for r in high_noise_runs]))
    precision = float(np.mean([r.detection["cl"].precision for r in high_noise_runs]))
    _report(
        "high-noise regime: mean recall >= 0.7 and mean precision >= 0.5",
        recall >= 0.7 and precision >= 0.5,
        f"recall={recall:.3f} precision={precision:.3f}",
    )


def test_clean_regime_flags_and_deltas():
    cfg = config_from_dict(dict(REGIME_CONFIG, noise={"rate": 0.0, "seed": 0}))
    worst_flag = 0.0
    worst_delta = 0.0
    for s in REGIME_SEEDS:
        r = run_experiment(cfg, s)
        worst_flag = max(worst_flag, r.conditions["cl"].filter.removed_percent)
        base = r.conditions["baseline"].eval.f1_macro
        for tag, cond in r.conditions.items():
            if tag != "baseline":
                worst_delta = max(worst_delta, abs(cond.eval.f1_macro - base))
    _report(
        "clean regime: CL flags < 5% and |delta-vs-base| < 0.05, 5 seeds",
        worst_flag < 5.0 and worst_delta < 0.05,
        f"max_flag%={worst_flag:.2f} max|dBase|={worst_delta:.4f}",
    )


def test_knee_filter_fixtures():
    def rec(i, c):
        return CartographyRecord(f"r{i}", c, 0.0, 0, 0.0, 0, None)

    confs = [0.05, 0.06, 0.07, 0.90, 0.91, 0.92]
    threshold, removed = knee_threshold([rec(i, c) for i, c in enumerate(confs)])
    ok1 = removed == {"r0", "r1", "r2"} and threshold == pytest.approx(0.90)

    linear = [rec(i, (i + 1) / 10) for i in range(10)]
    _, removed_linear = knee_threshold(linear)
    ok2 = removed_linear == frozenset()
    _report("knee filter fixtures (jump removes 3, linear removes 0)", ok1 and ok2)


def test_gradient_check():
    rng = np.random.default_rng(777)
    h = 1e-5
    worst = 0.0
    for _ in range(20):
        n, D, C = 5, 7, int(rng.integers(2, 5))
        X = rng.normal(size=(n, D))
        y = rng.integers(0, C, size=n)
        W = rng.normal(scale=0.5, size=(C, D))
        b = rng.normal(scale=0.5, size=C)
        l2 = float(rng.uniform(0, 0.1))
        _, dW, _ = loss_and_grads(W, b, X, y, C, l2)
        for _ in range(5):
            idx = (int(rng.integers(C)), int(rng.integers(D)))
            Wp, Wm = W.copy(), W.copy()
            Wp[idx] += h
            Wm[idx] -= h
            fd = (
                loss_and_grads(Wp, b, X, y, C, l2)[0]
                - loss_and_grads(Wm, b, X, y, C, l2)[0]
            ) / (2 * h)
            rel = abs(dW[idx] - fd) / max(abs(fd), 1e-8)
            worst = max(worst, rel)
    _report(
        "gradient vs central differences (20 x 5 coordinates, rel < 1e-4)",
        worst < 1e-4,
        f"worst={worst:.2e}",
    )


def test_full_experiment_determinism():
    cfg = config_from_dict(
        dict(
            REGIME_CONFIG,
            synthetic={"n": 400, "classes": 2, "separation": 0.9, "vocab": 30},
            noise={"rate": 0.2, "seed": 0},
        )
    )
    a = report_json(run_experiment(cfg, 3)).encode()
    b = report_json(run_experiment(cfg, 3)).encode()
    _report("full experiment twice -> byte-identical JSON report", a == b)
