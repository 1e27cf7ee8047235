"""Plain-numpy networks: a ReLU MLP, a stacked LSTM, and Adagrad.

Forward passes accept single samples or batches.  Gradients are exact
reverse-mode derivatives of the squared error (mean squared error over a
batch) and are validated against central finite differences in the tests.
All math is float64 and deterministic given a seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

MLP_DIMS = (64, 64, 128, 128, 64, 1)
LSTM_HIDDEN = (64, 32, 32)
ADAGRAD_EPS = 1e-8
MLP_LR = 0.001
LSTM_LR = 0.05


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape: tuple[int, ...]) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# MLP

@dataclass
class MlpParams:
    """Fully connected stack; weights[l] has shape (d_l, d_{l+1}).

    Hidden layers are rectified, the final layer is linear.
    """

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must pair up")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError("inconsistent layer shapes")
        for a, b in zip(self.weights[:-1], self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValueError("layer dimension mismatch")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])

    def params_list(self) -> List[np.ndarray]:
        out: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


def init_mlp(dims: Sequence[int] = MLP_DIMS, seed: int = 0) -> MlpParams:
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        weights.append(glorot_uniform(rng, d_in, d_out, (d_in, d_out)))
        biases.append(np.zeros(d_out))
    return MlpParams(weights, biases)


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values in input")


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray | float:
    """Network output; scalar for a single sample, (B,) for a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x.reshape(1, -1) if single else x
    if h.shape[1] != params.dims[0]:
        raise ValueError(f"expected input dim {params.dims[0]}, got {h.shape[1]}")
    _check_finite(h)
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if l != last:
            h = np.maximum(h, 0.0)
    out = h[:, 0]
    return float(out[0]) if single else out


def mlp_gradient(params: MlpParams, x: np.ndarray, target: np.ndarray | float
                 ) -> tuple[float, List[np.ndarray]]:
    """Loss and gradients of the (mean) squared error at (x, target).

    Returns (loss, grads) with grads ordered like params_list().
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x.reshape(1, -1) if single else x
    _check_finite(h)
    y = np.atleast_1d(np.asarray(target, dtype=float))
    if y.shape[0] != h.shape[0]:
        raise ValueError("target batch size mismatch")
    last = len(params.weights) - 1
    acts = [h]  # post-activation per layer, acts[0] is the input
    pre: List[np.ndarray] = []
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = acts[-1] @ w + b
        pre.append(z)
        acts.append(np.maximum(z, 0.0) if l != last else z)
    out = acts[-1][:, 0]
    err = out - y
    batch = h.shape[0]
    loss = float(np.mean(err ** 2))
    delta = (2.0 * err / batch)[:, None]  # d loss / d out
    grads: List[np.ndarray] = [np.empty(0)] * (2 * len(params.weights))
    for l in range(last, -1, -1):
        grads[2 * l] = acts[l].T @ delta
        grads[2 * l + 1] = delta.sum(axis=0)
        if l > 0:
            delta = delta @ params.weights[l].T
            delta = delta * (pre[l - 1] > 0.0)
    return loss, grads


# ---------------------------------------------------------------------------
# LSTM

@dataclass
class LstmCell:
    """One recurrent layer.  Gate blocks are stacked [input, forget,
    candidate, output] along the last axis of wx/wh/b."""

    wx: np.ndarray  # (d_in, 4H)
    wh: np.ndarray  # (H, 4H)
    b: np.ndarray   # (4H,)

    def __post_init__(self) -> None:
        h = self.wh.shape[0]
        if self.wh.shape != (h, 4 * h):
            raise ValueError("recurrent weights must be (H, 4H)")
        if self.wx.shape[1] != 4 * h or self.b.shape != (4 * h,):
            raise ValueError("inconsistent cell shapes")

    @property
    def hidden(self) -> int:
        return self.wh.shape[0]


@dataclass
class LstmParams:
    """Stacked LSTM with a linear scalar head on the last hidden state.

    head_b is a 1-element array so the optimizer can update it in place.
    """

    cells: List[LstmCell]
    head_w: np.ndarray  # (H_last,)
    head_b: np.ndarray  # (1,)

    def __post_init__(self) -> None:
        if not self.cells:
            raise ValueError("need at least one recurrent layer")
        for lower, upper in zip(self.cells[:-1], self.cells[1:]):
            if upper.wx.shape[0] != lower.hidden:
                raise ValueError("stacked layer dimension mismatch")
        if self.head_w.shape != (self.cells[-1].hidden,):
            raise ValueError("head width mismatch")
        self.head_b = np.atleast_1d(np.asarray(self.head_b, dtype=float))
        if self.head_b.shape != (1,):
            raise ValueError("head bias must be a single value")

    @property
    def input_dim(self) -> int:
        return self.cells[0].wx.shape[0]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(c.hidden for c in self.cells)

    def params_list(self) -> List[np.ndarray]:
        out: List[np.ndarray] = []
        for c in self.cells:
            out.extend([c.wx, c.wh, c.b])
        out.append(self.head_w)
        out.append(self.head_b)
        return out

    def head_bias(self) -> float:
        return float(self.head_b[0])


def init_lstm(input_dim: int, hidden: Sequence[int] = LSTM_HIDDEN,
              seed: int = 0) -> LstmParams:
    rng = np.random.default_rng(seed)
    cells = []
    d = input_dim
    for h in hidden:
        wx = glorot_uniform(rng, d, h, (d, 4 * h))
        wh = glorot_uniform(rng, h, h, (h, 4 * h))
        cells.append(LstmCell(wx, wh, np.zeros(4 * h)))
        d = h
    head_w = glorot_uniform(rng, d, 1, (d,))
    return LstmParams(cells, head_w, np.zeros(1))


def _lstm_forward_cached(params: LstmParams, seq: np.ndarray):
    """Run the stack over a (B, T, D) batch, keeping per-step gate caches."""
    b, t, d = seq.shape
    if d != params.input_dim:
        raise ValueError(f"expected input dim {params.input_dim}, got {d}")
    _check_finite(seq)
    layer_in = [seq[:, k, :] for k in range(t)]
    caches = []
    for cell in params.cells:
        hdim = cell.hidden
        h = np.zeros((b, hdim))
        c = np.zeros((b, hdim))
        steps = []
        outs = []
        for x in layer_in:
            z = x @ cell.wx + h @ cell.wh + cell.b
            i = _sigmoid(z[:, :hdim])
            f = _sigmoid(z[:, hdim:2 * hdim])
            g = np.tanh(z[:, 2 * hdim:3 * hdim])
            o = _sigmoid(z[:, 3 * hdim:])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            steps.append((x, h, c, i, f, g, o, c_new, tc))
            h, c = h_new, c_new
            outs.append(h)
        caches.append(steps)
        layer_in = outs
    final_h = layer_in[-1]
    out = final_h @ params.head_w + params.head_bias()
    return out, final_h, caches


def lstm_forward(params: LstmParams, seq: np.ndarray) -> np.ndarray | float:
    """Head output; scalar for one (T, D) window, (B,) for a (B, T, D) batch."""
    seq = np.asarray(seq, dtype=float)
    single = seq.ndim == 2
    if single:
        seq = seq[None, :, :]
    if seq.ndim != 3 or seq.shape[1] < 1:
        raise ValueError("sequence must be (T, D) or (B, T, D) with T >= 1")
    out, _, _ = _lstm_forward_cached(params, seq)
    return float(out[0]) if single else out


def lstm_gradient(params: LstmParams, seq: np.ndarray, target: np.ndarray | float
                  ) -> tuple[float, List[np.ndarray]]:
    """Loss and full-BPTT gradients of the (mean) squared error.

    Grad order matches params_list(): per cell wx, wh, b, then head_w and
    the head bias (as a 1-element array).
    """
    seq = np.asarray(seq, dtype=float)
    single = seq.ndim == 2
    if single:
        seq = seq[None, :, :]
    if seq.ndim != 3 or seq.shape[1] < 1:
        raise ValueError("sequence must be (T, D) or (B, T, D) with T >= 1")
    y = np.atleast_1d(np.asarray(target, dtype=float))
    if y.shape[0] != seq.shape[0]:
        raise ValueError("target batch size mismatch")

    out, final_h, caches = _lstm_forward_cached(params, seq)
    b, t, _ = seq.shape
    err = out - y
    loss = float(np.mean(err ** 2))
    dout = (2.0 * err / b)[:, None]

    g_head_w = (final_h * dout).sum(axis=0)
    g_head_b = np.array([float(dout.sum())])

    # dh per time step flowing into the top layer: only the last step feeds
    # the head; lower layers receive dx streams from the layer above.
    dh_stream = [np.zeros((b, params.cells[-1].hidden)) for _ in range(t)]
    dh_stream[-1] = dout * params.head_w

    grads_cells: List[List[np.ndarray]] = []
    for li in range(len(params.cells) - 1, -1, -1):
        cell = params.cells[li]
        hdim = cell.hidden
        steps = caches[li]
        g_wx = np.zeros_like(cell.wx)
        g_wh = np.zeros_like(cell.wh)
        g_b = np.zeros_like(cell.b)
        dh_next = np.zeros((b, hdim))
        dc_next = np.zeros((b, hdim))
        dx_stream = [np.zeros((b, cell.wx.shape[0])) for _ in range(t)]
        for k in range(t - 1, -1, -1):
            x, h_prev, c_prev, i, f, g, o, c_new, tc = steps[k]
            dh = dh_stream[k] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc ** 2) + dc_next
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            dz = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g ** 2),
                do * o * (1.0 - o),
            ], axis=1)
            g_wx += x.T @ dz
            g_wh += h_prev.T @ dz
            g_b += dz.sum(axis=0)
            dx_stream[k] = dz @ cell.wx.T
            dh_next = dz @ cell.wh.T
        grads_cells.append([g_wx, g_wh, g_b])
        dh_stream = dx_stream
    grads_cells.reverse()

    grads: List[np.ndarray] = []
    for triple in grads_cells:
        grads.extend(triple)
    grads.append(g_head_w)
    grads.append(g_head_b)
    return loss, grads


# ---------------------------------------------------------------------------
# Optimizer

@dataclass
class AdagradState:
    """Per-parameter squared-gradient accumulators."""

    accumulators: List[np.ndarray]
    lr: float
    eps: float = ADAGRAD_EPS

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float) -> "AdagradState":
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        return cls([np.zeros_like(p) for p in params], lr)

    def update(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        """In-place step: p -= lr * g / (sqrt(accum) + eps)."""
        if len(params) != len(self.accumulators) or len(grads) != len(self.accumulators):
            raise ValueError("parameter/gradient count mismatch")
        for p, g, a in zip(params, grads, self.accumulators):
            if p.shape != g.shape:
                raise ValueError("gradient shape mismatch")
            a += g * g
            p -= self.lr * g / (np.sqrt(a) + self.eps)
