import math

import numpy as np
import pytest

from embprobe.ffn import (AdamState, FfnConfig, FfnModel, TrainingError,
                          adam_step, backward, forward, init_ffn, load_ffn,
                          loss, predict, save_ffn, train_ffn)
from embprobe.svm import Scaler


def flatten(params):
    return np.concatenate([p.ravel() for p in params])


def numeric_gradient(model, X, y, l2, h=1e-5):
    """Central finite differences over every weight and bias entry."""
    grads = []
    for arr in model.weights + model.biases:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            up = loss(model, X, y, l2)
            arr[idx] = orig - h
            down = loss(model, X, y, l2)
            arr[idx] = orig
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def random_small_net(rng, activation, hidden_layers, in_dim=6, units=7):
    sizes = [in_dim] + [units] * hidden_layers + [1]
    weights = [rng.standard_normal((a, b)) * 0.5
               for a, b in zip(sizes[:-1], sizes[1:])]
    biases = [rng.standard_normal(b) * 0.1 for b in sizes[1:]]
    return FfnModel(weights=weights, biases=biases, activation=activation)


class TestInit:
    def test_deterministic(self):
        cfg = FfnConfig(seed=11)
        m1, m2 = init_ffn(cfg), init_ffn(cfg)
        for a, b in zip(m1.weights, m2.weights):
            assert np.array_equal(a, b)

    def test_biases_zero(self):
        m = init_ffn(FfnConfig(seed=0))
        assert all(np.all(b == 0) for b in m.biases)

    def test_weight_bounds(self):
        cfg = FfnConfig(hidden_layers=3, hidden_units=32, seed=2)
        m = init_ffn(cfg)
        sizes = [768, 32, 32, 32, 1]
        for W, (fi, fo) in zip(m.weights, zip(sizes[:-1], sizes[1:])):
            limit = math.sqrt(6.0 / (fi + fo))
            assert np.all(np.abs(W) <= limit)

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            FfnConfig(hidden_layers=4)
        with pytest.raises(ValueError):
            FfnConfig(hidden_units=16)
        with pytest.raises(ValueError):
            FfnConfig(activation="gelu")


class TestForward:
    def test_zero_weights_give_half(self):
        m = init_ffn(FfnConfig(seed=0))
        for W in m.weights:
            W[:] = 0.0
        X = np.random.default_rng(0).standard_normal((10, 768))
        assert np.all(forward(m, X) == 0.5)

    def test_output_range(self):
        m = init_ffn(FfnConfig(seed=1))
        X = np.random.default_rng(1).standard_normal((1000, 768))
        p = forward(m, X)
        assert np.all((p > 0) & (p < 1))

    def test_dead_relu_path(self):
        rng = np.random.default_rng(2)
        m = random_small_net(rng, "relu", 2)
        x = rng.standard_normal((1, 6))
        # force all first-layer pre-activations negative
        m.biases[0][:] = -1e6
        p1 = forward(m, x)
        p2 = forward(m, x * 3.0 + 1.0)
        assert np.allclose(p1, p2)

    def test_dimension_mismatch(self):
        m = init_ffn(FfnConfig(seed=0))
        with pytest.raises(ValueError, match="dimension mismatch"):
            forward(m, np.zeros((2, 100)))


class TestLoss:
    def test_half_prediction_is_ln2(self):
        m = random_small_net(np.random.default_rng(3), "tanh", 2)
        for W in m.weights:
            W[:] = 0.0
        for b in m.biases:
            b[:] = 0.0
        X = np.ones((1, 6))
        assert math.isclose(loss(m, X, np.array([1.0]), l2=0.0),
                            math.log(2), rel_tol=1e-9)

    def test_l2_zero_gives_pure_bce(self):
        rng = np.random.default_rng(4)
        m = random_small_net(rng, "tanh", 2)
        X = rng.standard_normal((5, 6))
        y = np.array([0, 1, 0, 1, 1], dtype=float)
        base = loss(m, X, y, l2=0.0)
        with_pen = loss(m, X, y, l2=1e-4)
        pen = 1e-4 * sum(np.sum(W * W) for W in m.weights)
        assert math.isclose(with_pen - base, pen, rel_tol=1e-9)

    def test_doubling_weights_quadruples_penalty(self):
        rng = np.random.default_rng(5)
        m = random_small_net(rng, "tanh", 2)
        pen1 = sum(np.sum(W * W) for W in m.weights)
        for W in m.weights:
            W *= 2.0
        pen2 = sum(np.sum(W * W) for W in m.weights)
        assert math.isclose(pen2, 4 * pen1, rel_tol=1e-12)

    def test_empty_batch_rejected(self):
        m = random_small_net(np.random.default_rng(6), "tanh", 2)
        with pytest.raises(ValueError):
            loss(m, np.zeros((0, 6)), np.zeros(0), 0.0)


class TestBackward:
    @pytest.mark.parametrize("activation", ["tanh", "relu"])
    @pytest.mark.parametrize("hidden_layers", [2, 3])
    def test_matches_finite_differences(self, activation, hidden_layers):
        rng = np.random.default_rng(7)
        m = random_small_net(rng, activation, hidden_layers)
        X = rng.standard_normal((5, 6))
        y = rng.integers(0, 2, 5).astype(float)
        gw, gb = backward(m, X, y, l2=1e-4)
        num = numeric_gradient(m, X, y, l2=1e-4)
        analytic = flatten(gw + gb)
        numeric = flatten(num)
        denom = np.maximum(np.abs(numeric), 1e-8)
        rel = np.abs(analytic - numeric) / denom
        assert rel.max() < 1e-4

    def test_bias_only_output_gradient(self):
        rng = np.random.default_rng(8)
        m = random_small_net(rng, "tanh", 2)
        X = rng.standard_normal((9, 6))
        y = rng.integers(0, 2, 9).astype(float)
        _, gb = backward(m, X, y, l2=0.0)
        from embprobe.ffn import _forward_all
        p = _forward_all(m, X)[2]
        assert np.allclose(gb[-1], np.mean(p - y))

    def test_stationary_point(self):
        m = random_small_net(np.random.default_rng(9), "tanh", 2)
        for W in m.weights:
            W[:] = 0.0
        for b in m.biases:
            b[:] = 0.0
        X = np.random.default_rng(10).standard_normal((4, 6))
        y = np.full(4, 0.5)
        gw, gb = backward(m, X, y, l2=0.0)
        assert all(np.all(g == 0) for g in gw + gb)


class TestAdam:
    def test_first_step_is_signed_lr(self):
        params = [np.array([1.0])]
        grads = [np.array([0.3])]
        state = AdamState.zeros_like(params)
        new, _ = adam_step(params, grads, state, t=1, lr=0.01)
        # m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
        assert math.isclose(new[0][0], 1.0 - 0.01, rel_tol=1e-6)

    def test_zero_gradient_keeps_params(self):
        params = [np.array([2.0, -1.0])]
        state = AdamState.zeros_like(params)
        state.m[0][:] = 0.5
        new, state = adam_step(params, [np.zeros(2)], state, t=1, lr=0.1)
        # moments decay but with zero v the update denominator is eps only
        assert np.all(np.isfinite(new[0]))
        assert np.all(state.m[0] == 0.45)

    def test_pure_function(self):
        grads = [np.array([0.2, -0.4])]
        out = []
        for _ in range(2):
            params = [np.array([1.0, 2.0])]
            state = AdamState.zeros_like(params)
            new, _ = adam_step(params, grads, state, t=1, lr=0.05)
            out.append(new[0])
        assert np.array_equal(out[0], out[1])

    def test_step_index_validated(self):
        params = [np.zeros(1)]
        with pytest.raises(ValueError):
            adam_step(params, params, AdamState.zeros_like(params), t=0, lr=0.1)

    def test_first_step_decreases_loss_on_toy(self):
        # full-batch step on normalized separable toy data
        rng = np.random.default_rng(11)
        for lr in (1e-4, 1e-3, 1e-2, 1e-1):
            m = random_small_net(rng, "tanh", 2)
            X = np.vstack([rng.normal(1, 0.1, (10, 6)),
                           rng.normal(-1, 0.1, (10, 6))])
            y = np.array([1.0] * 10 + [0.0] * 10)
            before = loss(m, X, y, l2=0.0)
            gw, gb = backward(m, X, y, l2=0.0)
            params = m.weights + m.biases
            new, _ = adam_step(params, gw + gb,
                               AdamState.zeros_like(params), t=1, lr=lr)
            m.weights = new[:len(m.weights)]
            m.biases = new[len(m.weights):]
            assert loss(m, X, y, l2=0.0) < before


class TestTrain:
    def separable(self, n=10):
        rng = np.random.default_rng(12)
        X = np.vstack([rng.normal(2, 0.5, (n, 8)), rng.normal(-2, 0.5, (n, 8))])
        y = np.array([1] * n + [0] * n)
        return X, y

    def test_separable_reaches_full_accuracy(self):
        X, y = self.separable()
        cfg = FfnConfig(hidden_units=32, max_epochs=200, seed=0)
        model, log = train_ffn((X, y), cfg)
        assert len(log) <= 200
        assert np.array_equal(predict(model, X), y)

    def test_deterministic_training(self):
        X, y = self.separable()
        cfg = FfnConfig(hidden_units=32, seed=5)
        m1, log1 = train_ffn((X, y), cfg)
        m2, log2 = train_ffn((X, y), cfg)
        assert log1 == log2
        for a, b in zip(m1.weights, m2.weights):
            assert np.array_equal(a, b)

    def test_empty_rejected(self):
        with pytest.raises(TrainingError):
            train_ffn((np.zeros((0, 8)), np.zeros(0)), FfnConfig())

    def test_single_class_rejected(self):
        X = np.random.default_rng(13).standard_normal((10, 8))
        with pytest.raises(TrainingError, match="single-class"):
            train_ffn((X, np.ones(10)), FfnConfig())

    def test_serialization_round_trip(self, tmp_path):
        X, y = self.separable()
        cfg = FfnConfig(hidden_units=32, seed=1)
        model, _ = train_ffn((X, y), cfg)
        p = tmp_path / "m.json"
        save_ffn(model, p)
        back = load_ffn(p)
        Xt = np.random.default_rng(14).standard_normal((5, 8))
        assert np.array_equal(forward(back, Xt), forward(model, Xt))
