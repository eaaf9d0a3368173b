"""Tests for the feed-forward classifier and its training loop."""

from __future__ import annotations

import math
from datetime import date, timedelta

import numpy as np
import pytest

from newsmotion.errors import TrainingDiverged, ValidationError, ParseError
from newsmotion.features import FeatureLayout, FeatureMatrix
from newsmotion.mlp import (
    DOWN,
    UP,
    MlpModel,
    TrainConfig,
    direction_of,
    forward,
    init,
    loss_and_gradients,
    logits,
    load_model,
    predict,
    predict_batch,
    save_model,
    softmax,
    train,
)
from newsmotion.sampling import NEGATIVE, POSITIVE

DAY = date(2012, 3, 5)


def _layout(dim: int) -> FeatureLayout:
    return FeatureLayout(blocks=("ct",), k=0, n_categories=dim)


def _matrix(x: np.ndarray, labels: list[str]) -> FeatureMatrix:
    n = x.shape[0]
    return FeatureMatrix(
        layout=_layout(x.shape[1]),
        tickers=[f"T{i}" for i in range(n)],
        dates=[DAY + timedelta(days=i) for i in range(n)],
        labels=labels,
        x=x,
    )


def _separable(n: int, dim: int, seed: int) -> FeatureMatrix:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, dim))
    x[:, 0] = np.where(x[:, 0] >= 0, x[:, 0] + 0.5, x[:, 0] - 0.5)
    labels = [POSITIVE if v > 0 else NEGATIVE for v in x[:, 0]]
    return _matrix(x, labels)


def _zero_model(dims: tuple[int, ...]) -> MlpModel:
    weights = [np.zeros((dims[i + 1], dims[i])) for i in range(len(dims) - 1)]
    biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
    return MlpModel(layer_dims=dims, weights=weights, biases=biases)


class TestDirectionOf:
    def test_maps_movement_labels(self):
        assert direction_of(POSITIVE) == UP
        assert direction_of(NEGATIVE) == DOWN

    def test_unknown_label_rejected(self):
        with pytest.raises(ValidationError):
            direction_of("sideways")


class TestInit:
    def test_shapes_and_zero_biases(self):
        model = init([5, 7, 2], seed=3)
        assert model.layer_dims == (5, 7, 2)
        assert model.weights[0].shape == (7, 5)
        assert model.weights[1].shape == (2, 7)
        assert all(np.all(b == 0.0) for b in model.biases)

    def test_weights_stay_inside_the_glorot_bound(self):
        model = init([9, 6, 2], seed=4)
        for w, (fan_out, fan_in) in zip(model.weights, [(6, 9), (2, 6)]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            assert np.all(np.abs(w) <= limit)

    def test_deterministic_in_seed(self):
        a = init([4, 3, 2], seed=11)
        b = init([4, 3, 2], seed=11)
        c = init([4, 3, 2], seed=12)
        assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
        assert any(not np.array_equal(x, y) for x, y in zip(a.weights, c.weights))

    def test_bad_dims_rejected(self):
        with pytest.raises(ValidationError):
            init([5], seed=1)
        with pytest.raises(ValidationError):
            init([5, 3], seed=1)
        with pytest.raises(ValidationError):
            init([5, 0, 2], seed=1)


class TestSoftmax:
    def test_rows_sum_to_one_even_with_extreme_logits(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            z = rng.uniform(-700.0, 700.0, size=(rng.integers(1, 8), 2))
            p = softmax(z)
            assert np.all(np.abs(p.sum(axis=1) - 1.0) < 1e-12)
            assert np.all(p >= 0.0)

    def test_equal_logits_split_evenly(self):
        assert softmax(np.array([0.0, 0.0])).tolist() == [0.5, 0.5]

    def test_shift_invariance(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            z = rng.normal(size=4)
            shift = float(rng.uniform(-50.0, 50.0))
            assert np.allclose(softmax(z), softmax(z + shift), atol=1e-12)

    def test_one_and_two_dimensional_agree(self):
        z = np.array([1.5, -0.5])
        assert np.array_equal(softmax(z), softmax(z[None, :])[0])


class TestLossAndGradients:
    def test_zero_logits_give_log_two_loss(self):
        model = _zero_model((3, 2))
        loss, _, _ = loss_and_gradients(model, np.ones((4, 3)), np.array([0, 1, 0, 1]))
        assert loss == pytest.approx(math.log(2.0), abs=1e-12)

    def _numeric_check(self, dims: tuple[int, ...], l2: float, seed: int) -> float:
        rng = np.random.default_rng(seed)
        model = init(dims, seed=seed)
        for b in model.biases:
            b += rng.normal(scale=0.1, size=b.shape)
        x = rng.normal(size=(6, dims[0]))
        y = rng.integers(0, 2, size=6)
        _, grad_w, grad_b = loss_and_gradients(model, x, y, l2)
        eps = 1e-5
        worst = 0.0
        for params, grads in ((model.weights, grad_w), (model.biases, grad_b)):
            for arr, grad in zip(params, grads):
                flat = arr.ravel()
                for idx in range(flat.size):
                    original = flat[idx]
                    flat[idx] = original + eps
                    up, _, _ = loss_and_gradients(model, x, y, l2)
                    flat[idx] = original - eps
                    down, _, _ = loss_and_gradients(model, x, y, l2)
                    flat[idx] = original
                    numeric = (up - down) / (2 * eps)
                    analytic = grad.ravel()[idx]
                    scale = max(abs(numeric), abs(analytic), 1e-8)
                    worst = max(worst, abs(numeric - analytic) / scale)
        return worst

    def test_gradients_match_central_differences(self):
        assert self._numeric_check((4, 5, 2), l2=0.0, seed=31) < 1e-5

    def test_gradients_match_central_differences_with_l2(self):
        assert self._numeric_check((3, 4, 2), l2=0.05, seed=32) < 1e-5

    def test_l2_penalizes_weights_but_not_biases(self):
        model = init([3, 4, 2], seed=5)
        for b in model.biases:
            b += 1.0
        rng = np.random.default_rng(6)
        x = rng.normal(size=(5, 3))
        y = rng.integers(0, 2, size=5)
        plain, _, _ = loss_and_gradients(model, x, y, 0.0)
        penalized, _, _ = loss_and_gradients(model, x, y, 0.1)
        expected = 0.05 * sum(float(np.sum(w * w)) for w in model.weights)
        assert penalized - plain == pytest.approx(expected, abs=1e-12)

    def test_inactive_relu_unit_gets_no_gradient(self):
        model = _zero_model((1, 1, 2))
        model.weights[0][0, 0] = -1.0
        model.weights[1][:, 0] = [1.0, -1.0]
        x = np.array([[2.0], [3.0]])
        _, grad_w, _ = loss_and_gradients(model, x, np.array([0, 1]))
        assert np.all(grad_w[0] == 0.0)

    def test_bad_batches_rejected(self):
        model = _zero_model((3, 2))
        with pytest.raises(ValidationError):
            loss_and_gradients(model, np.zeros((0, 3)), np.array([], dtype=int))
        with pytest.raises(ValidationError):
            loss_and_gradients(model, np.zeros((2, 3)), np.array([0]))
        with pytest.raises(ValidationError):
            loss_and_gradients(model, np.zeros((2, 4)), np.array([0, 1]))


class TestTrain:
    def test_separable_data_reaches_zero_training_error(self):
        matrix = _separable(120, 3, seed=41)
        config = TrainConfig(
            hidden=(8,), learning_rate=0.5, batch_size=16, epochs=40, seed=2
        )
        model = train(matrix, matrix, config)
        predicted, _ = predict_batch(model, matrix.x)
        expected = [direction_of(label) for label in matrix.labels]
        assert predicted == expected

    def test_zero_epochs_returns_initial_parameters(self):
        matrix = _separable(30, 3, seed=42)
        config = TrainConfig(hidden=(4,), epochs=0, seed=9)
        model = train(matrix, matrix, config)
        fresh = init((3, 4, 2), seed=9)
        assert all(np.array_equal(w, f) for w, f in zip(model.weights, fresh.weights))
        assert model.metadata["epochs_run"] == 0
        assert model.metadata["best_epoch"] == -1

    def test_restored_model_matches_best_validation_epoch(self):
        train_m = _separable(150, 4, seed=43)
        valid_m = _separable(60, 4, seed=44)
        config = TrainConfig(
            hidden=(6,), learning_rate=0.3, batch_size=32, epochs=15, seed=3
        )
        model = train(train_m, valid_m, config)
        errors = model.metadata["validation_errors"]
        best = model.metadata["best_epoch"]
        assert errors[best] == min(errors)
        predicted, _ = predict_batch(model, valid_m.x)
        expected = [direction_of(label) for label in valid_m.labels]
        mismatches = sum(p != e for p, e in zip(predicted, expected))
        assert mismatches / len(valid_m) == errors[best]

    def test_patience_stops_after_stalled_epochs(self):
        matrix = _separable(40, 3, seed=45)
        config = TrainConfig(
            hidden=(4,), learning_rate=1e-12, epochs=50, patience=2, seed=4
        )
        model = train(matrix, matrix, config)
        assert model.metadata["epochs_run"] == 3

    def test_divergence_raises_instead_of_returning_garbage(self):
        base = _separable(60, 3, seed=46)
        matrix = _matrix(base.x * 1e150, base.labels)
        config = TrainConfig(hidden=(8,), learning_rate=10.0, epochs=10, seed=5)
        with pytest.raises(TrainingDiverged):
            with np.errstate(over="ignore", invalid="ignore"):
                train(matrix, matrix, config)

    def test_mismatched_layouts_rejected(self):
        a = _separable(20, 3, seed=47)
        b = _separable(20, 4, seed=48)
        with pytest.raises(ValidationError, match="layout"):
            train(a, b, TrainConfig(hidden=(4,), epochs=1))

    def test_empty_split_rejected(self):
        matrix = _separable(20, 3, seed=49)
        empty = _matrix(np.zeros((0, 3)), [])
        with pytest.raises(ValidationError):
            train(empty, matrix, TrainConfig(hidden=(4,), epochs=1))


class TestPredict:
    def test_tie_predicts_down_with_zero_confidence(self):
        model = _zero_model((3, 2))
        label, confidence = predict(model, np.ones(3))
        assert label == DOWN
        assert confidence == 0.0

    def test_confidence_is_probability_gap(self):
        model = init([4, 5, 2], seed=51)
        rng = np.random.default_rng(52)
        x = rng.normal(size=4)
        label, confidence = predict(model, x)
        p_up, p_down = forward(model, x)
        assert confidence == p_up - p_down
        assert label == (UP if p_up > p_down else DOWN)

    def test_batch_agrees_with_single_predictions(self):
        model = init([4, 6, 2], seed=53)
        rng = np.random.default_rng(54)
        x = rng.normal(size=(25, 4))
        labels, confidences = predict_batch(model, x)
        for i in range(len(x)):
            label, confidence = predict(model, x[i])
            assert labels[i] == label
            assert abs(confidences[i] - confidence) < 1e-12

    def test_wrong_input_dimension_rejected(self):
        model = init([4, 5, 2], seed=55)
        with pytest.raises(ValidationError):
            logits(model, np.ones(3))


class TestModelFile:
    def test_round_trip_preserves_predictions_exactly(self, tmp_path):
        matrix = _separable(80, 3, seed=61)
        config = TrainConfig(hidden=(6,), learning_rate=0.3, epochs=5, seed=6)
        model = train(matrix, matrix, config)
        path = tmp_path / "model.bin"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.layer_dims == model.layer_dims
        assert loaded.layout == model.layout
        assert loaded.metadata == model.metadata
        _, original = predict_batch(model, matrix.x)
        _, restored = predict_batch(loaded, matrix.x)
        assert np.array_equal(original, restored)

    def test_layout_free_model_round_trips(self, tmp_path):
        model = init([3, 4, 2], seed=62)
        path = tmp_path / "model.bin"
        save_model(model, path)
        assert load_model(path).layout is None

    def test_truncated_parameters_rejected(self, tmp_path):
        model = init([3, 4, 2], seed=63)
        path = tmp_path / "model.bin"
        save_model(model, path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(ParseError, match="bytes"):
            load_model(path)

    def test_garbage_header_rejected(self, tmp_path):
        path = tmp_path / "model.bin"
        path.write_bytes(b"broken\n")
        with pytest.raises(ParseError, match="header"):
            load_model(path)
