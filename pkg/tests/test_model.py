import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelscope.data import DataError, validate_prob_matrix
from labelscope.model import (
    DynamicsLog,
    ModelParams,
    TrainConfig,
    featurize,
    fnv1a64,
    load_dynamics,
    loss_and_grads,
    oof_predict,
    predict_proba,
    record_dynamics,
    save_dynamics,
    stratified_folds,
    train,
)
from labelscope.noise import make_synthetic

from conftest import build_dataset


class TestFeaturize:
    def test_empty_text_is_zero(self):
        assert not featurize("", 16).any()

    def test_two_token_ratio(self):
        # "a a b": counts (2, 1), L2 norm sqrt(5)
        vec = featurize("a a b", 4096)
        nz = np.sort(vec[vec > 0])
        assert nz.shape == (2,)
        assert np.isclose(np.linalg.norm(vec), 1.0)
        assert np.isclose(nz[1] / nz[0], 2.0)
        assert np.isclose(nz[1], 2 / np.sqrt(5))

    def test_deterministic(self):
        assert np.array_equal(featurize("Foo, bar!", 64), featurize("Foo, bar!", 64))

    def test_case_and_punctuation_folding(self):
        assert np.array_equal(featurize("FOO bar", 64), featurize("foo, BAR!", 64))

    def test_fnv_reference_value(self):
        # FNV-1a 64-bit of empty input is the offset basis
        assert fnv1a64("") == 0xCBF29CE484222325


class TestTrain:
    def test_zero_epochs_forbidden(self):
        with pytest.raises(DataError):
            TrainConfig(epochs=0)

    def test_one_step_probability_increases(self):
        ds = build_dataset([0, 1], classes=["a", "b"],
                           texts=["hello world", "foo bar"])
        cfg = TrainConfig(epochs=1, learning_rate=0.5, seed=0)
        params = train(ds, cfg)
        probs = predict_proba(params, ds).rows
        assert probs[0, 0] > 0.5  # zero init predicts 0.5
        assert probs[1, 1] > 0.5

    def test_separable_data_high_accuracy(self):
        ds = make_synthetic(200, 2, separation=1.0, vocab=10, seed=3)
        params = train(ds, TrainConfig(epochs=20, learning_rate=1.0, seed=1))
        preds = np.argmax(predict_proba(params, ds).rows, axis=1)
        assert np.mean(preds == ds.labels()) >= 0.95

    def test_deterministic(self):
        ds = make_synthetic(50, 2, 0.8, 10, seed=2)
        cfg = TrainConfig(epochs=3, seed=9)
        a, b = train(ds, cfg), train(ds, cfg)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)

    def test_missing_class_rejected(self):
        ds = build_dataset([0, 0], classes=["a", "b"])
        with pytest.raises(DataError, match="'b'"):
            train(ds, TrainConfig())


class TestGradients:
    def _finite_difference(self, W, b, X, y, C, l2, idx, h=1e-5):
        def loss_at(Wp, bp):
            return loss_and_grads(Wp, bp, X, y, C, l2)[0]

        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        return (loss_at(Wp, b) - loss_at(Wm, b)) / (2 * h)

    def test_analytic_matches_central_differences(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            n, D, C = 6, 8, 3
            X = rng.normal(size=(n, D))
            y = rng.integers(0, C, size=n)
            W = rng.normal(scale=0.5, size=(C, D))
            b = rng.normal(scale=0.5, size=C)
            l2 = float(rng.uniform(0, 0.1))
            _, dW, _ = loss_and_grads(W, b, X, y, C, l2)
            for _ in range(5):
                idx = (int(rng.integers(C)), int(rng.integers(D)))
                fd = self._finite_difference(W, b, X, y, C, l2, idx)
                rel = abs(dW[idx] - fd) / max(abs(fd), 1e-8)
                assert rel < 1e-4


class TestPredictProba:
    def test_zero_params_uniform(self, two_class_ds):
        params = ModelParams(np.zeros((2, 32)), np.zeros(2))
        pm = predict_proba(params, two_class_ds)
        assert np.allclose(pm.rows, 0.5)
        assert pm.kind == "in-sample"

    def test_logit_shift_invariance(self, two_class_ds):
        rng = np.random.default_rng(0)
        W = rng.normal(size=(2, 32))
        base = predict_proba(ModelParams(W, np.zeros(2)), two_class_ds)
        shifted = predict_proba(ModelParams(W, np.full(2, 5.0)), two_class_ds)
        assert np.allclose(base.rows, shifted.rows)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_rows_stochastic(self, seed):
        rng = np.random.default_rng(seed)
        ds = make_synthetic(20, 3, 0.5, 8, seed=seed)
        params = ModelParams(rng.normal(size=(3, 16)), rng.normal(size=3))
        pm = predict_proba(params, ds)
        assert np.allclose(pm.rows.sum(axis=1), 1.0, atol=1e-9)


class TestOofPredict:
    def test_rows_come_from_unseen_models(self):
        # poisoning: making one example's text unique must not move the rows of
        # its fold mates, because their model never trains on it. Rows in the
        # other folds may move (their models do see the poisoned example).
        ds = make_synthetic(40, 2, 1.0, 5, seed=0)
        cfg = TrainConfig(epochs=2, seed=4)
        folds = stratified_folds(ds.labels(), 2, cfg.seed)
        pm = oof_predict(ds, 2, cfg)
        target = 7
        poisoned_examples = list(ds.examples)
        ex = poisoned_examples[target]
        poisoned_examples[target] = type(ex)(ex.id, "zzquux unique token", ex.label)
        poisoned = type(ds)(tuple(poisoned_examples), ds.classes)
        pm2 = oof_predict(poisoned, 2, cfg)
        mates = (folds == folds[target]) & (np.arange(len(ds)) != target)
        assert np.array_equal(pm.rows[mates], pm2.rows[mates])

    def test_sequential_equals_concurrent(self):
        ds = make_synthetic(60, 3, 0.9, 8, seed=1)
        cfg = TrainConfig(epochs=2, seed=11)
        a = oof_predict(ds, 3, cfg, n_jobs=1)
        b = oof_predict(ds, 3, cfg, n_jobs=3)
        assert np.array_equal(a.rows, b.rows)
        assert a.kind == "out-of-fold"

    def test_oof_close_to_in_sample_on_separable(self):
        ds = make_synthetic(400, 2, 1.0, 10, seed=5)
        cfg = TrainConfig(epochs=5, learning_rate=1.0, seed=3)
        oof = oof_predict(ds, 4, cfg)
        params = train(ds, cfg)
        ins = predict_proba(params, ds)
        y = ds.labels()
        acc_oof = np.mean(np.argmax(oof.rows, axis=1) == y)
        acc_in = np.mean(np.argmax(ins.rows, axis=1) == y)
        assert abs(acc_oof - acc_in) <= 0.1

    def test_small_class_rejected(self):
        ds = build_dataset([0, 0, 0, 1])
        with pytest.raises(DataError, match="fewer than"):
            oof_predict(ds, 2, TrainConfig())

    def test_validates_against_dataset(self):
        ds = make_synthetic(30, 2, 0.9, 6, seed=8)
        pm = oof_predict(ds, 2, TrainConfig(epochs=1, seed=0))
        assert np.max(validate_prob_matrix(pm, ds)) <= 1e-9


class TestRecordDynamics:
    def test_ids_align(self):
        ds = make_synthetic(20, 2, 0.9, 5, seed=0)
        log = record_dynamics(ds, TrainConfig(epochs=2, seed=0))
        assert log.ids == ds.ids
        assert log.n_epochs == 2

    def test_learning_curve_mostly_increasing(self):
        ds = make_synthetic(300, 2, 1.0, 8, seed=2)
        log = record_dynamics(ds, TrainConfig(epochs=10, learning_rate=1.0, seed=7))
        y = ds.labels()
        mean_true = [
            log.probs[e, np.arange(len(ds)), y].mean() for e in range(10)
        ]
        ups = sum(1 for a, b in zip(mean_true, mean_true[1:]) if b >= a)
        assert ups >= 8

    def test_zero_learning_rate_stays_uniform(self):
        ds = make_synthetic(15, 3, 0.9, 5, seed=1)
        log = record_dynamics(ds, TrainConfig(epochs=2, learning_rate=0.0, seed=0))
        assert np.allclose(log.probs, 1 / 3)
        assert np.array_equal(log.probs[0], log.probs[1])

    def test_requires_two_epochs(self):
        ds = make_synthetic(10, 2, 0.9, 5, seed=0)
        with pytest.raises(DataError):
            record_dynamics(ds, TrainConfig(epochs=1))


def test_dynamics_csv_roundtrip(tmp_path):
    ds = make_synthetic(12, 3, 0.8, 5, seed=6)
    log = record_dynamics(ds, TrainConfig(epochs=3, seed=1))
    path = tmp_path / "dynamics.csv"
    save_dynamics(log, ds.classes, path)
    header = path.read_text().splitlines()[0]
    assert header == "id,epoch," + ",".join(ds.classes.names)
    loaded = load_dynamics(path)
    assert loaded.ids == log.ids
    assert np.array_equal(loaded.probs, log.probs)


def test_dynamics_log_rejects_single_epoch():
    with pytest.raises(DataError):
        DynamicsLog(("a",), np.ones((1, 1, 1)))
