"""Layer-level tests: hand-computed oracles plus finite-difference checks.

Each backward pass is verified in isolation against central differences on
a scalar probe loss, so a failure points at one layer rather than at the
whole model graph.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from helpsys import nnet
from helpsys.nnet import (
    AdagradState,
    Conv1DLayer,
    DenseLayer,
    LSTMCellParams,
    adagrad_update,
    bilstm_backward,
    bilstm_forward,
    conv1d_backward,
    conv1d_forward,
    cross_entropy,
    dense_softmax,
    dense_softmax_ce_backward,
    grad_check,
    lstm_step,
    relu,
    run_lstm,
    run_lstm_backward,
    sigmoid,
    softmax,
    xavier_uniform,
)


def fd_grad(loss_fn, arr, step=1e-6):
    """Central-difference gradient of loss_fn with respect to arr, in place."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + step
        hi = loss_fn()
        arr[idx] = orig - step
        lo = loss_fn()
        arr[idx] = orig
        grad[idx] = (hi - lo) / (2 * step)
        it.iternext()
    return grad


def assert_close_to_fd(analytic, numeric, tol=1e-5):
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-4)
    rel = np.abs(analytic - numeric) / denom
    assert float(rel.max()) < tol, f"max rel err {float(rel.max()):.3e}"


class TestActivations:
    def test_relu(self):
        x = np.array([-2.0, -0.0, 0.5, 3.0])
        assert np.array_equal(relu(x), np.array([0.0, 0.0, 0.5, 3.0]))

    def test_sigmoid_values(self):
        assert sigmoid(np.array([0.0]))[0] == 0.5
        assert abs(sigmoid(np.array([1.0]))[0] - 1 / (1 + math.exp(-1))) < 1e-15

    def test_sigmoid_stable_at_extremes(self):
        out = sigmoid(np.array([-1000.0, 1000.0]))
        assert np.all(np.isfinite(out))
        assert out[0] >= 0.0 and out[1] <= 1.0

    def test_softmax_hand_value(self):
        # logits (ln 3, 0) put exactly 3x the mass on the first class
        probs = softmax(np.array([math.log(3.0), 0.0]))
        assert np.allclose(probs, [0.75, 0.25], atol=1e-15)

    def test_softmax_shift_invariant(self):
        v = np.array([1.0, 2.0, 3.0])
        assert np.allclose(softmax(v), softmax(v + 500.0), atol=1e-15)
        assert np.all(np.isfinite(softmax(np.array([1e4, -1e4]))))

    def test_cross_entropy_hand_value(self):
        assert abs(cross_entropy(np.array([0.75, 0.25]), 1) - math.log(4.0)) < 1e-15

    def test_cross_entropy_clamped(self):
        assert math.isfinite(cross_entropy(np.array([1.0, 0.0]), 1))

    def test_xavier_bounds(self):
        rng = np.random.default_rng(0)
        arr = xavier_uniform(rng, (50, 40), fan_in=40, fan_out=50)
        limit = math.sqrt(6.0 / 90.0)
        assert float(np.max(np.abs(arr))) <= limit


class TestConv:
    def test_hand_oracle(self):
        # one width-2 sum filter over [1 2 3 4]: conv = [3 5 7],
        # pool(width 2, stride 2) keeps one window [3 5] -> max 5
        layer = Conv1DLayer(
            filters=np.ones((1, 1, 2)), bias=np.zeros(1), pool_width=2, pool_stride=2
        )
        Q = np.array([[1.0, 2.0, 3.0, 4.0]])
        pooled, _ = conv1d_forward(Q, layer)
        assert pooled.shape == (1, 1)
        assert pooled[0, 0] == 5.0

    def test_relu_clamps_negative_responses(self):
        layer = Conv1DLayer(
            filters=-np.ones((1, 1, 1)), bias=np.zeros(1), pool_width=1, pool_stride=1
        )
        Q = np.array([[1.0, 2.0]])
        pooled, _ = conv1d_forward(Q, layer)
        assert np.array_equal(pooled, np.zeros((1, 2)))

    def test_bias_applied_before_relu(self):
        layer = Conv1DLayer(
            filters=np.ones((1, 1, 1)), bias=np.array([-1.5]), pool_width=1, pool_stride=1
        )
        pooled, _ = conv1d_forward(np.array([[1.0, 2.0]]), layer)
        assert np.allclose(pooled, [[0.0, 0.5]])

    def test_pool_tie_routes_gradient_to_first_max(self):
        layer = Conv1DLayer(
            filters=np.ones((1, 1, 1)), bias=np.zeros(1), pool_width=3, pool_stride=1
        )
        Q = np.array([[1.0, 1.0, 1.0]])
        pooled, cache = conv1d_forward(Q, layer)
        assert pooled.shape == (1, 1)
        dQ, _ = conv1d_backward(np.ones((1, 1)), cache, layer)
        assert np.array_equal(dQ, np.array([[1.0, 0.0, 0.0]]))

    def test_out_steps_formula(self):
        layer = Conv1DLayer(
            filters=np.zeros((2, 3, 3)), bias=np.zeros(2), pool_width=2, pool_stride=2
        )
        # l=15, m=3 -> conv 13; (13 - 2)//2 + 1 = 6
        assert layer.out_steps(15) == 6

    def test_out_steps_errors(self):
        layer = Conv1DLayer(
            filters=np.zeros((1, 2, 5)), bias=np.zeros(1), pool_width=4, pool_stride=1
        )
        with pytest.raises(ValueError, match="filter longer"):
            layer.out_steps(4)
        with pytest.raises(ValueError, match="pool window"):
            layer.out_steps(7)

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        layer = Conv1DLayer.create(
            embed_dim=4, filter_len=3, n_filters=3, pool_width=2, pool_stride=2, rng=rng
        )
        Q = rng.normal(size=(4, 9))
        probe = rng.normal(size=(3, layer.out_steps(9)))

        def loss():
            pooled, _ = conv1d_forward(Q, layer)
            return float((pooled * probe).sum())

        pooled, cache = conv1d_forward(Q, layer)
        dQ, grads = conv1d_backward(probe, cache, layer)
        assert_close_to_fd(dQ, fd_grad(loss, Q))
        assert_close_to_fd(grads["filters"], fd_grad(loss, layer.filters))
        assert_close_to_fd(grads["bias"], fd_grad(loss, layer.bias))

    def test_dimension_mismatch(self):
        layer = Conv1DLayer(
            filters=np.zeros((1, 3, 2)), bias=np.zeros(1), pool_width=1, pool_stride=1
        )
        with pytest.raises(ValueError, match="dimension"):
            conv1d_forward(np.zeros((2, 5)), layer)


class TestLSTM:
    def test_zero_parameter_step_oracle(self):
        # all-zero parameters: every gate sits at 0.5 and g at 0, so
        # c = 0.5 * c_prev and h = 0.5 * tanh(c)
        params = LSTMCellParams(W=np.zeros((4, 2)), U=np.zeros((4, 1)), b=np.zeros(4))
        h, c, _ = lstm_step(np.array([3.0, -1.0]), np.zeros(1), np.array([1.0]), params)
        assert abs(c[0] - 0.5) < 1e-15
        assert abs(h[0] - 0.5 * math.tanh(0.5)) < 1e-15

    def test_create_opens_forget_gate(self):
        rng = np.random.default_rng(0)
        params = LSTMCellParams.create(3, 4, rng)
        assert np.array_equal(params.b[4:8], np.ones(4))
        assert np.array_equal(params.b[:4], np.zeros(4))
        assert np.array_equal(params.b[8:], np.zeros(8))

    def test_cell_state_growth_bounded(self):
        # |c_t| <= |c_{t-1}| + 1 because f, i <=1 and |g| <= 1
        rng = np.random.default_rng(4)
        params = LSTMCellParams.create(3, 5, rng)
        h = np.zeros(5)
        c = np.zeros(5)
        prev_bound = 0.0
        for _ in range(30):
            h, c, _ = lstm_step(rng.normal(size=3), h, c, params)
            bound = float(np.max(np.abs(c)))
            assert bound <= prev_bound + 1.0 + 1e-12
            prev_bound = bound

    def test_hidden_state_bounded_by_one(self):
        rng = np.random.default_rng(5)
        params = LSTMCellParams.create(2, 3, rng)
        h, _ = run_lstm(rng.normal(size=(2, 40)) * 5.0, params)
        assert float(np.max(np.abs(h))) < 1.0

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        params = LSTMCellParams.create(3, 4, rng)
        seq = rng.normal(size=(3, 5))
        probe = rng.normal(size=4)

        def loss():
            h, _ = run_lstm(seq, params)
            return float(h @ probe)

        h, caches = run_lstm(seq, params)
        dseq, grads = run_lstm_backward(probe, caches, params)
        assert_close_to_fd(dseq, fd_grad(loss, seq))
        for name in ("W", "U", "b"):
            arr = getattr(params, name)
            assert_close_to_fd(grads[name], fd_grad(loss, arr))

    def test_empty_sequence_rejected(self):
        rng = np.random.default_rng(0)
        params = LSTMCellParams.create(2, 2, rng)
        with pytest.raises(ValueError):
            run_lstm(np.zeros((2, 0)), params)

    def test_create_validation(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            LSTMCellParams.create(0, 2, rng)


class TestBiLSTM:
    def test_palindrome_halves_agree(self):
        # a time-palindromic sequence read with shared parameters gives
        # identical forward and backward final states
        rng = np.random.default_rng(8)
        params = LSTMCellParams.create(3, 4, rng)
        half = rng.normal(size=(3, 2))
        seq = np.concatenate([half, half[:, ::-1]], axis=1)
        vec, _ = bilstm_forward(seq, params, params)
        assert np.array_equal(vec[:4], vec[4:])

    def test_output_is_concat_of_directional_passes(self):
        rng = np.random.default_rng(9)
        fwd = LSTMCellParams.create(3, 4, rng)
        bwd = LSTMCellParams.create(3, 4, rng)
        seq = rng.normal(size=(3, 6))
        vec, _ = bilstm_forward(seq, fwd, bwd)
        h_f, _ = run_lstm(seq, fwd)
        h_b, _ = run_lstm(seq[:, ::-1], bwd)
        assert np.array_equal(vec, np.concatenate([h_f, h_b]))

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(31)
        fwd = LSTMCellParams.create(2, 3, rng)
        bwd = LSTMCellParams.create(2, 3, rng)
        seq = rng.normal(size=(2, 4))
        probe = rng.normal(size=6)

        def loss():
            vec, _ = bilstm_forward(seq, fwd, bwd)
            return float(vec @ probe)

        vec, cache = bilstm_forward(seq, fwd, bwd)
        dseq, grads_fwd, grads_bwd = bilstm_backward(probe, cache, fwd, bwd)
        assert_close_to_fd(dseq, fd_grad(loss, seq))
        for name in ("W", "U", "b"):
            assert_close_to_fd(grads_fwd[name], fd_grad(loss, getattr(fwd, name)))
            assert_close_to_fd(grads_bwd[name], fd_grad(loss, getattr(bwd, name)))


class TestDenseSoftmax:
    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(2)
        layer = DenseLayer.create(5, 2, rng)
        probs, _ = dense_softmax(rng.normal(size=5), layer)
        assert abs(float(probs.sum()) - 1.0) < 1e-12
        assert np.all(probs > 0)

    def test_fused_backward_matches_finite_differences(self):
        rng = np.random.default_rng(41)
        layer = DenseLayer.create(5, 2, rng)
        x = rng.normal(size=5)
        label = 1

        def loss():
            probs, _ = dense_softmax(x, layer)
            return cross_entropy(probs, label)

        probs, cache = dense_softmax(x, layer)
        dx, grads = dense_softmax_ce_backward(cache, label, layer)
        assert_close_to_fd(dx, fd_grad(loss, x))
        assert_close_to_fd(grads["W"], fd_grad(loss, layer.W))
        assert_close_to_fd(grads["b"], fd_grad(loss, layer.b))

    def test_backward_linear_in_dloss(self):
        rng = np.random.default_rng(42)
        layer = DenseLayer.create(4, 2, rng)
        _, cache = dense_softmax(rng.normal(size=4), layer)
        dx1, g1 = dense_softmax_ce_backward(cache, 0, layer, dloss=1.0)
        dx2, g2 = dense_softmax_ce_backward(cache, 0, layer, dloss=2.0)
        assert np.allclose(dx2, 2.0 * dx1, atol=1e-15)
        assert np.allclose(g2["W"], 2.0 * g1["W"], atol=1e-15)

    def test_zero_dloss_zero_gradients(self):
        rng = np.random.default_rng(43)
        layer = DenseLayer.create(4, 2, rng)
        _, cache = dense_softmax(rng.normal(size=4), layer)
        dx, grads = dense_softmax_ce_backward(cache, 0, layer, dloss=0.0)
        assert not dx.any()
        assert not grads["W"].any()
        assert not grads["b"].any()


class TestAdagrad:
    def test_first_update_oracle(self):
        params = {"w": np.array([0.0])}
        state = AdagradState(params, lr=0.1)
        adagrad_update(params, {"w": np.array([1.0])}, state)
        # G=1 -> step = 0.1 * 1 / (1 + eps)
        assert abs(params["w"][0] + 0.1 / (1.0 + 1e-8)) < 1e-15

    def test_second_update_accumulates(self):
        params = {"w": np.array([0.0])}
        state = AdagradState(params, lr=0.1)
        adagrad_update(params, {"w": np.array([1.0])}, state)
        adagrad_update(params, {"w": np.array([1.0])}, state)
        expected = -0.1 / (1.0 + 1e-8) - 0.1 / (math.sqrt(2.0) + 1e-8)
        assert abs(params["w"][0] - expected) < 1e-15

    def test_first_step_magnitude_insensitive_to_scale(self):
        # G == g*g on the first step, so the move is ~lr * sign(g)
        for scale in (1e-3, 1.0, 1e3):
            params = {"w": np.array([0.0])}
            state = AdagradState(params, lr=0.1)
            adagrad_update(params, {"w": np.array([scale])}, state)
            assert abs(abs(params["w"][0]) - 0.1) < 1e-4

    def test_shape_mismatch_rejected(self):
        params = {"w": np.zeros(3)}
        state = AdagradState(params)
        with pytest.raises(ValueError, match="shape mismatch"):
            adagrad_update(params, {"w": np.zeros(4)}, state)

    def test_lr_validation(self):
        with pytest.raises(ValueError):
            AdagradState({"w": np.zeros(1)}, lr=0.0)


class _QuadraticModel:
    """Tiny model with a closed-form gradient, for exercising grad_check."""

    def __init__(self, corrupt=False):
        self._params = {"w": np.array([0.3, -0.7, 1.1])}
        self.corrupt = corrupt

    def parameters(self):
        return self._params

    def loss(self, sample):
        w = self._params["w"]
        return float(np.sum(sample * w * w))

    def loss_and_grads(self, sample):
        w = self._params["w"]
        factor = 4.0 if self.corrupt else 2.0
        return self.loss(sample), {"w": factor * sample * w}


class TestGradCheck:
    def test_accepts_correct_gradient(self):
        report = grad_check(_QuadraticModel(), np.array([1.0, 2.0, 3.0]))
        assert report["w"] < 1e-8

    def test_flags_corrupted_gradient(self):
        report = grad_check(_QuadraticModel(corrupt=True), np.array([1.0, 2.0, 3.0]))
        assert report["w"] > 0.3
