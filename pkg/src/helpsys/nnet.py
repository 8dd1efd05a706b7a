"""Minimal numpy neural network kit: 1-D convolution, LSTM, dense softmax.

Everything is float64 and per-sample; layers return a cache from their
forward pass that the matching backward pass consumes to produce exact
analytic gradients. The finite-difference checker at the bottom is the
referee for every gradient in the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "relu",
    "sigmoid",
    "xavier_uniform",
    "Conv1DLayer",
    "conv1d_forward",
    "conv1d_backward",
    "LSTMCellParams",
    "lstm_step",
    "lstm_step_backward",
    "run_lstm",
    "run_lstm_backward",
    "bilstm_forward",
    "bilstm_backward",
    "DenseLayer",
    "softmax",
    "dense_softmax",
    "dense_softmax_ce_backward",
    "cross_entropy",
    "AdagradState",
    "adagrad_update",
    "grad_check",
]


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split positive/negative branches so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def xavier_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# convolution + temporal max pooling


@dataclass
class Conv1DLayer:
    """F filters of width m over the embedding axis, then windowed max pooling."""

    filters: np.ndarray  # (F, d, m)
    bias: np.ndarray  # (F,)
    pool_width: int
    pool_stride: int

    @classmethod
    def create(
        cls,
        embed_dim: int,
        filter_len: int,
        n_filters: int,
        pool_width: int,
        pool_stride: int,
        rng: np.random.Generator,
    ) -> "Conv1DLayer":
        if min(embed_dim, filter_len, n_filters, pool_width, pool_stride) < 1:
            raise ValueError("conv dimensions must all be >= 1")
        fan_in = embed_dim * filter_len
        filters = xavier_uniform(rng, (n_filters, embed_dim, filter_len), fan_in, n_filters)
        return cls(filters=filters, bias=np.zeros(n_filters), pool_width=pool_width, pool_stride=pool_stride)

    @property
    def n_filters(self) -> int:
        return int(self.filters.shape[0])

    @property
    def filter_len(self) -> int:
        return int(self.filters.shape[2])

    def out_steps(self, seq_len: int) -> int:
        """Pooled sequence length for an input of seq_len columns."""
        conv_len = seq_len - self.filter_len + 1
        if conv_len < 1:
            raise ValueError("filter longer than sequence")
        if self.pool_width > conv_len:
            raise ValueError("pool window longer than convolved sequence")
        return (conv_len - self.pool_width) // self.pool_stride + 1


def conv1d_forward(Q: np.ndarray, layer: Conv1DLayer) -> tuple[np.ndarray, tuple]:
    """Valid convolution + ReLU + windowed max pooling over time.

    Q has shape (d, l); the output has shape (F, T') where
    T' = floor((l - m + 1 - pool_width) / pool_stride) + 1.
    """
    d, seq_len = Q.shape
    if d != layer.filters.shape[1]:
        raise ValueError("embedding dimension mismatch")
    steps = layer.out_steps(seq_len)
    windows = sliding_window_view(Q, layer.filter_len, axis=1)  # (d, L, m)
    pre = np.einsum("fdm,dtm->ft", layer.filters, windows) + layer.bias[:, None]
    act = relu(pre)
    pooled_windows = sliding_window_view(act, layer.pool_width, axis=1)[:, :: layer.pool_stride, :]
    pooled_windows = pooled_windows[:, :steps, :]
    arg_in_window = pooled_windows.argmax(axis=2)  # first max wins on ties
    offsets = np.arange(steps) * layer.pool_stride
    argmax = arg_in_window + offsets[None, :]
    rows = np.arange(layer.n_filters)[:, None]
    pooled = act[rows, argmax]
    cache = (Q, pre, argmax)
    return pooled, cache


def conv1d_backward(dout: np.ndarray, cache: tuple, layer: Conv1DLayer) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Gradients of a scalar loss wrt Q, the filters, and the bias."""
    Q, pre, argmax = cache
    n_filters, conv_len = pre.shape
    m = layer.filter_len
    dact = np.zeros_like(pre)
    rows = np.arange(n_filters)[:, None]
    np.add.at(dact, (np.broadcast_to(rows, argmax.shape), argmax), dout)
    dpre = dact * (pre > 0)
    dbias = dpre.sum(axis=1)
    windows = sliding_window_view(Q, m, axis=1)
    dfilters = np.einsum("ft,dtm->fdm", dpre, windows)
    dwindows = np.einsum("ft,fdm->dtm", dpre, layer.filters)
    dQ = np.zeros_like(Q)
    for j in range(m):
        dQ[:, j : j + conv_len] += dwindows[:, :, j]
    return dQ, {"filters": dfilters, "bias": dbias}


# ---------------------------------------------------------------------------
# LSTM


@dataclass
class LSTMCellParams:
    """Stacked gate parameters in i, f, g, o block order."""

    W: np.ndarray  # (4h, in_dim)
    U: np.ndarray  # (4h, h)
    b: np.ndarray  # (4h,)

    @property
    def hidden(self) -> int:
        return int(self.U.shape[1])

    @classmethod
    def create(cls, in_dim: int, hidden: int, rng: np.random.Generator) -> "LSTMCellParams":
        if in_dim < 1 or hidden < 1:
            raise ValueError("in_dim and hidden must be >= 1")
        W = xavier_uniform(rng, (4 * hidden, in_dim), in_dim, hidden)
        U = xavier_uniform(rng, (4 * hidden, hidden), hidden, hidden)
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0  # forget gate starts open
        return cls(W=W, U=U, b=b)


def lstm_step(
    x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, params: LSTMCellParams
) -> tuple[np.ndarray, np.ndarray, tuple]:
    """One cell update: c = f*c_prev + i*g, h = o*tanh(c)."""
    n = params.hidden
    z = params.W @ x + params.U @ h_prev + params.b
    i = sigmoid(z[:n])
    f = sigmoid(z[n : 2 * n])
    g = np.tanh(z[2 * n : 3 * n])
    o = sigmoid(z[3 * n :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    cache = (x, h_prev, c_prev, i, f, g, o, c)
    return h, c, cache


def lstm_step_backward(
    dh: np.ndarray, dc: np.ndarray, cache: tuple, params: LSTMCellParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Backward through one step, given gradients for this step's h and c."""
    x, h_prev, c_prev, i, f, g, o, c = cache
    tc = np.tanh(c)
    do = dh * tc
    dc_total = dc + dh * o * (1.0 - tc * tc)
    df = dc_total * c_prev
    di = dc_total * g
    dg = dc_total * i
    dz = np.concatenate(
        [
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ]
    )
    grads = {"W": np.outer(dz, x), "U": np.outer(dz, h_prev), "b": dz}
    dx = params.W.T @ dz
    dh_prev = params.U.T @ dz
    dc_prev = dc_total * f
    return dx, dh_prev, dc_prev, grads


def run_lstm(seq: np.ndarray, params: LSTMCellParams) -> tuple[np.ndarray, list[tuple]]:
    """Consume the columns of seq (in_dim, T) left to right; return final h."""
    _, steps = seq.shape
    if steps < 1:
        raise ValueError("empty sequence")
    n = params.hidden
    h = np.zeros(n)
    c = np.zeros(n)
    caches = []
    for t in range(steps):
        h, c, cache = lstm_step(seq[:, t], h, c, params)
        caches.append(cache)
    return h, caches


def run_lstm_backward(
    dh_final: np.ndarray, caches: list[tuple], params: LSTMCellParams
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Backward through time; returns gradient for the input sequence."""
    steps = len(caches)
    in_dim = caches[0][0].shape[0]
    dseq = np.zeros((in_dim, steps))
    grads = {"W": np.zeros_like(params.W), "U": np.zeros_like(params.U), "b": np.zeros_like(params.b)}
    dh = dh_final.copy()
    dc = np.zeros(params.hidden)
    for t in range(steps - 1, -1, -1):
        dx, dh, dc, step_grads = lstm_step_backward(dh, dc, caches[t], params)
        dseq[:, t] = dx
        for name in grads:
            grads[name] += step_grads[name]
    return dseq, grads


def bilstm_forward(
    seq: np.ndarray, fwd: LSTMCellParams, bwd: LSTMCellParams
) -> tuple[np.ndarray, tuple]:
    """Concatenate the final hidden states of a forward and a reversed pass."""
    h_fwd, caches_fwd = run_lstm(seq, fwd)
    h_bwd, caches_bwd = run_lstm(seq[:, ::-1], bwd)
    cache = (caches_fwd, caches_bwd, seq.shape)
    return np.concatenate([h_fwd, h_bwd]), cache


def bilstm_backward(
    dvec: np.ndarray, cache: tuple, fwd: LSTMCellParams, bwd: LSTMCellParams
) -> tuple[np.ndarray, dict[str, np.ndarray], dict[str, np.ndarray]]:
    caches_fwd, caches_bwd, _ = cache
    n = fwd.hidden
    dseq_fwd, grads_fwd = run_lstm_backward(dvec[:n], caches_fwd, fwd)
    dseq_bwd, grads_bwd = run_lstm_backward(dvec[n:], caches_bwd, bwd)
    dseq = dseq_fwd + dseq_bwd[:, ::-1]
    return dseq, grads_fwd, grads_bwd


# ---------------------------------------------------------------------------
# dense softmax head and loss


@dataclass
class DenseLayer:
    W: np.ndarray  # (classes, in_dim)
    b: np.ndarray  # (classes,)

    @classmethod
    def create(cls, in_dim: int, n_classes: int, rng: np.random.Generator) -> "DenseLayer":
        W = xavier_uniform(rng, (n_classes, in_dim), in_dim, n_classes)
        return cls(W=W, b=np.zeros(n_classes))


def softmax(v: np.ndarray) -> np.ndarray:
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


def dense_softmax(x: np.ndarray, layer: DenseLayer) -> tuple[np.ndarray, tuple]:
    probs = softmax(layer.W @ x + layer.b)
    return probs, (x, probs)


def dense_softmax_ce_backward(
    cache: tuple, label: int, layer: DenseLayer, dloss: float = 1.0
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Fused gradient of cross_entropy(dense_softmax(x), label) times dloss."""
    x, probs = cache
    dlogits = probs.copy()
    dlogits[label] -= 1.0
    dlogits *= dloss
    grads = {"W": np.outer(dlogits, x), "b": dlogits}
    dx = layer.W.T @ dlogits
    return dx, grads


def cross_entropy(probs: np.ndarray, label: int) -> float:
    """Negative log-likelihood, clamped at 1e-12 to stay finite."""
    return float(-np.log(max(float(probs[label]), 1e-12)))


# ---------------------------------------------------------------------------
# Adagrad


class AdagradState:
    """Per-parameter squared-gradient accumulators."""

    def __init__(self, params: dict[str, np.ndarray], lr: float = 0.001, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.lr = lr
        self.eps = eps
        self.accumulators = {name: np.zeros_like(arr) for name, arr in params.items()}


def adagrad_update(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdagradState) -> None:
    """In place: G += g*g, then theta -= lr * g / (sqrt(G) + eps)."""
    for name, theta in params.items():
        g = grads[name]
        acc = state.accumulators[name]
        if g.shape != theta.shape or acc.shape != theta.shape:
            raise ValueError(f"shape mismatch for parameter {name!r}")
        acc += g * g
        theta -= state.lr * g / (np.sqrt(acc) + state.eps)


# ---------------------------------------------------------------------------
# gradient checking


class DifferentiableModel(Protocol):
    def parameters(self) -> dict[str, np.ndarray]: ...

    def loss(self, sample) -> float: ...

    def loss_and_grads(self, sample) -> tuple[float, dict[str, np.ndarray]]: ...


GRAD_CHECK_FLOOR = 1e-6


def grad_check(model: DifferentiableModel, sample, step: float = 1e-5) -> dict[str, float]:
    """Max relative error per parameter tensor between analytic and central
    finite-difference gradients.

    relative error = |a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR) per coordinate.
    The floor matters: central differences on an O(1) loss in float64 carry
    ~1e-11 of absolute roundoff at this step, so gradient entries below the
    floor can only be compared absolutely, at the method's own resolution.
    parameters() must return live arrays so perturbations reach loss().
    """
    _, analytic = model.loss_and_grads(sample)
    report: dict[str, float] = {}
    for name, theta in model.parameters().items():
        grad = analytic[name]
        worst = 0.0
        flat = theta.reshape(-1)
        grad_flat = np.asarray(grad).reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + step
            loss_plus = model.loss(sample)
            flat[idx] = original - step
            loss_minus = model.loss(sample)
            flat[idx] = original
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            a = float(grad_flat[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), GRAD_CHECK_FLOOR)
            if err > worst:
                worst = err
        report[name] = worst
    return report
