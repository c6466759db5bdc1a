"""Trainer tests: splitting, scaling, balancing, Adam, the loop, benchmark."""

import math

import numpy as np
import pytest

from veclstm.errors import (
    EmptyClassSet,
    NotFittedError,
    OutOfRange,
    TooFewSamples,
)
from veclstm.models import build_lstm_stack, build_veclstm
from veclstm.trainer import (
    AdamState,
    StandardScaler,
    TrainConfig,
    TrainData,
    adam_step,
    benchmark_pipelines,
    encode_labels,
    one_hot,
    random_oversample,
    train_model,
    train_test_split,
)

from _oracles import adam_scalar_recurrence, as_sorted_multiset


class TestSplit:
    def test_sizes(self):
        x = np.arange(10).reshape(-1, 1)
        y = np.arange(10)
        (xtr, ytr), (xte, yte) = train_test_split(x, y, 0.2, seed=0)
        assert len(ytr) == 8 and len(yte) == 2

    def test_seed_determinism(self):
        x = np.arange(20).reshape(-1, 1)
        y = np.arange(20)
        a = train_test_split(x, y, 0.3, seed=5)
        b = train_test_split(x, y, 0.3, seed=5)
        assert np.array_equal(a[0][1], b[0][1])
        assert np.array_equal(a[1][1], b[1][1])

    def test_union_is_original_multiset(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(37, 4))
        y = rng.integers(0, 7, 37)
        (xtr, ytr), (xte, yte) = train_test_split(x, y, 0.25, seed=1)
        assert as_sorted_multiset(np.vstack([xtr, xte])) == as_sorted_multiset(x)
        assert sorted(np.concatenate([ytr, yte]).tolist()) == sorted(y.tolist())
        assert len(ytr) + len(yte) == 37

    def test_tuple_inputs_stay_aligned(self):
        x1 = np.arange(12).reshape(-1, 1).astype(float)
        x2 = np.arange(12).reshape(-1, 1).astype(float) * 10
        y = np.arange(12)
        (xtr, ytr), _ = train_test_split((x1, x2), y, 0.25, seed=2)
        assert np.array_equal(xtr[0] * 10, xtr[1])
        assert np.array_equal(xtr[0].reshape(-1), ytr)

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            train_test_split(np.zeros((1, 1)), np.zeros(1), 0.5, seed=0)


class TestScaler:
    def test_two_point_feature(self):
        scaler = StandardScaler().fit(np.array([[1.0], [3.0]]))
        assert np.array_equal(scaler.transform(np.array([[1.0], [3.0]])),
                              [[-1.0], [1.0]])

    def test_constant_feature_maps_to_zero(self):
        scaler = StandardScaler().fit(np.full((5, 1), 4.2))
        assert np.array_equal(scaler.transform(np.full((3, 1), 4.2)),
                              np.zeros((3, 1)))

    def test_moments_after_scaling(self):
        rng = np.random.default_rng(8)
        x = rng.normal(3.0, 2.5, size=(400, 3))
        scaled = StandardScaler().fit_transform(x)
        assert np.all(np.abs(scaled.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(scaled.var(axis=0) - 1.0) < 1e-9)

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            StandardScaler().transform(np.zeros((2, 1)))

    def test_scalar_path_matches_matrix_path(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(50, 1))
        scaler = StandardScaler().fit(x)
        for v in (-1.0, 0.0, 2.5):
            assert scaler.transform_value(v) == scaler.transform(np.array([[v]]))[0, 0]


class TestOneHot:
    def test_endpoints(self):
        assert np.array_equal(one_hot(0), [1, 0, 0, 0, 0, 0, 0])
        assert np.array_equal(one_hot(6), [0, 0, 0, 0, 0, 0, 1])

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            one_hot(7)
        with pytest.raises(OutOfRange):
            one_hot(-1)

    def test_batch_encoding(self):
        mat = encode_labels(np.array([0, 6, 3]))
        assert mat.shape == (3, 7)
        assert np.array_equal(mat.argmax(axis=1), [0, 6, 3])


class TestOversample:
    def test_deficit_filled(self):
        x = np.arange(4).reshape(-1, 1).astype(float)
        y = np.array([0, 0, 0, 1])
        x2, y2 = random_oversample(x, y, seed=0)
        assert (y2 == 0).sum() == (y2 == 1).sum() == 3

    def test_balanced_input_unchanged(self):
        x = np.arange(4).reshape(-1, 1).astype(float)
        y = np.array([0, 1, 0, 1])
        x2, y2 = random_oversample(x, y, seed=0)
        assert np.array_equal(x2, x) and np.array_equal(y2, y)

    def test_duplicates_are_copies_of_originals(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(30, 3))
        y = np.concatenate([np.zeros(20, int), np.ones(7, int), np.full(3, 2)])
        x2, y2 = random_oversample(x, y, seed=4)
        counts = np.bincount(y2)
        assert np.all(counts == 20)
        # originals retained, in order
        assert np.array_equal(x2[:30], x)
        # membership: every duplicate equals some original of its class
        originals = {cls: as_sorted_multiset(x[y == cls]) for cls in (0, 1, 2)}
        for row, cls in zip(x2[30:], y2[30:]):
            key = tuple(row.tolist())
            assert key in originals[cls]

    def test_empty(self):
        with pytest.raises(EmptyClassSet):
            random_oversample(np.zeros((0, 1)), np.zeros(0, int), seed=0)


class TestAdam:
    def config(self, **kw):
        return TrainConfig(**kw)

    def test_zero_gradient_keeps_params(self):
        params = {"w": np.array([1.0, -2.0])}
        state = AdamState.create(params)
        new, _ = adam_step(params, {"w": np.zeros(2)}, state, self.config())
        assert np.array_equal(new["w"], params["w"])

    def test_first_step_magnitude_is_learning_rate(self):
        config = self.config()
        params = {"w": np.array([0.0])}
        state = AdamState.create(params)
        new, _ = adam_step(params, {"w": np.array([3.7])}, state, config)
        delta = abs(new["w"][0])
        assert abs(delta - config.learning_rate) < config.learning_rate * 1e-6
        assert new["w"][0] < 0  # moved against the gradient sign

    def test_five_steps_match_scalar_recurrence(self):
        rng = np.random.default_rng(15)
        grads = rng.normal(size=5).tolist()
        config = self.config()
        params = {"w": np.array([0.25])}
        state = AdamState.create(params)
        for g in grads:
            params, state = adam_step(params, {"w": np.array([g])}, state, config)
        expected = adam_scalar_recurrence(
            grads, config.learning_rate, config.beta1, config.beta2,
            config.epsilon, theta0=0.25)
        assert params["w"][0] == pytest.approx(expected, abs=1e-12)

    def test_no_nan_for_finite_inputs(self):
        params = {"w": np.array([1e300, -1e-300])}
        state = AdamState.create(params)
        new, _ = adam_step(params, {"w": np.array([1e3, -1e3])}, state, self.config())
        assert np.all(np.isfinite(new["w"]))


def separable_features(n=300, seed=7):
    rng = np.random.default_rng(seed)
    centers = np.array([[-2.0, -2.0], [0.0, 2.0], [2.0, 0.0]])
    labels = rng.integers(0, 3, n)
    x = centers[labels] + rng.normal(0, 0.3, size=(n, 2))
    return x.reshape(n, 1, 2), labels


class TestTrainModel:
    def test_separable_set_reaches_95_pct(self):
        x, labels = separable_features()
        data = TrainData(x_train=x, y_train=encode_labels(labels))
        config = TrainConfig(epochs=20, batch_size=32, learning_rate=0.01, seed=3)
        _, report = train_model(build_lstm_stack(2), data, config)
        assert report.epoch_accuracies[-1] >= 0.95
        assert report.epoch_losses[-1] < report.initial_loss

    def test_seed_determinism_bit_identical(self):
        x, labels = separable_features(n=120, seed=1)
        data = TrainData(x_train=x, y_train=encode_labels(labels))
        config = TrainConfig(epochs=3, batch_size=32, seed=11)
        params_a, report_a = train_model(build_lstm_stack(2), data, config)
        params_b, report_b = train_model(build_lstm_stack(2), data, config)
        assert all(np.array_equal(params_a[k], params_b[k]) for k in params_a)
        assert report_a.epoch_losses == report_b.epoch_losses

    def test_initial_loss_near_ln7_on_balanced_seven_classes(self):
        rng = np.random.default_rng(2)
        n = 700
        labels = np.repeat(np.arange(7), 100)
        x = rng.normal(size=(n, 1, 1))
        data = TrainData(x_train=x, y_train=encode_labels(labels))
        config = TrainConfig(epochs=1, seed=5)
        _, report = train_model(build_lstm_stack(1), data, config)
        assert abs(report.initial_loss - math.log(7)) < 0.1

    def test_validation_accuracy_reported(self):
        x, labels = separable_features(n=200, seed=9)
        data = TrainData(x_train=x[:150], y_train=encode_labels(labels[:150]),
                         x_val=x[150:], y_val=encode_labels(labels[150:]))
        config = TrainConfig(epochs=10, batch_size=32, learning_rate=0.01, seed=4)
        _, report = train_model(build_lstm_stack(2), data, config)
        assert report.val_accuracy is not None
        assert report.val_accuracy >= 0.9

    def test_numeric_errors_carry_epoch_batch_context(self):
        from veclstm.errors import VecLstmError
        from veclstm.models import init_model_params
        from veclstm.trainer import run_epochs

        spec = build_lstm_stack(1)
        params = init_model_params(spec, seed=0)
        y = encode_labels(np.array([0, 1, 2, 3] * 8))
        calls = {"n": 0}

        def features(idx):
            calls["n"] += 1
            out = np.zeros((idx.size, 1, 1))
            if calls["n"] == 2:
                out[0, 0, 0] = np.nan
            return out

        with pytest.raises(VecLstmError, match="epoch 0, batch 1"):
            run_epochs(spec, params, features, y,
                       TrainConfig(epochs=1, batch_size=16, seed=0))

    def test_report_schema(self):
        x, labels = separable_features(n=60, seed=5)
        data = TrainData(x_train=x, y_train=encode_labels(labels))
        config = TrainConfig(epochs=2, seed=0)
        _, report = train_model(build_lstm_stack(2), data, config)
        doc = report.to_dict()
        assert len(doc["epoch_losses"]) == 2
        assert doc["train_seconds"] >= 0
        assert doc["vectorize_seconds"] is None


class TestBenchmark:
    def make_columns(self, n=600, seed=21):
        rng = np.random.default_rng(seed)
        lat = rng.uniform(39.0, 40.0, n)
        lon = rng.uniform(116.0, 117.0, n)
        alt = rng.uniform(0.0, 100.0, n)
        labels = rng.integers(0, 7, n)
        return lat, lon, alt, labels

    def test_report_schema_and_reduction_formula(self):
        lat, lon, alt, labels = self.make_columns()
        config = TrainConfig(epochs=2, batch_size=128, seed=6)
        report = benchmark_pipelines(lat, lon, alt, labels, config)
        doc = report.to_dict()
        for key in ("t_novec", "t_vec", "t_vectorization", "reduction_pct"):
            assert key in doc
        assert doc["t_novec"] >= 0 and doc["t_vec"] >= 0
        assert doc["reduction_pct"] == pytest.approx(
            100.0 * (doc["t_novec"] - doc["t_vec"]) / doc["t_novec"], abs=1e-9)

    def test_pipelines_learn_the_same_thing(self):
        # same seed, same math: both pipelines see identical features,
        # so the loss trajectories must coincide
        lat, lon, alt, labels = self.make_columns(n=400, seed=22)
        config = TrainConfig(epochs=2, batch_size=128, seed=7)
        report = benchmark_pipelines(lat, lon, alt, labels, config,
                                     spec=build_veclstm(1))
        assert report.final_loss_novec == pytest.approx(report.final_loss_vec,
                                                        abs=1e-9)
