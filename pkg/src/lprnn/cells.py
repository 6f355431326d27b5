"""Low-pass recurrent cells with exact backpropagation through time.

The lpRNN update is::

    y_t = alpha * y_{t-1} + (1 - alpha) * act(W_rec y_{t-1} + W_in x_t + b)

and the lpLSTM is a standard LSTM whose output passes through the same
first-order filter. ``alpha = 0`` recovers the SimpleRNN / plain LSTM and
``alpha = 1`` freezes the output at its initial value.

Sequences are time-major. Every forward/backward accepts either a single
sequence ``(T, n)`` or a batch ``(T, B, n)``; outputs match the input rank.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import _backend
from .errors import DomainError, ShapeError
from .numerics import (ACTIVATIONS, STREAM_ALPHA, STREAM_GRADCHECK, STREAM_INIT,
                       check_alpha, seeded_rng, sigmoid)

Gradients = Dict[str, np.ndarray]

_ACT_CODES = {"identity": 0, "tanh": 1, "relu": 2, "sigmoid": 3}
LSTM_GATES = ("f", "i", "o", "c")


def act_code(kind: str) -> int:
    try:
        return _ACT_CODES[kind]
    except KeyError:
        raise DomainError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}") from None


# ---------------------------------------------------------------------------
# parameters and initialisation

@dataclass
class AlphaConfig:
    """How retention ratios are drawn.

    ``log_uniform_tau``: time constants tau ~ LogUniform[tau_min, tau_max] steps
    and ``alpha = exp(-1/tau)``. ``constant``: every unit gets ``value``.
    ``uniform``: alpha ~ U[low, high].
    """
    kind: str = "log_uniform_tau"
    tau_min: float = 1.0
    tau_max: float = 200.0
    value: float = 0.0
    low: float = 0.0
    high: float = 1.0

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "log_uniform_tau":
            if not 0 < self.tau_min <= self.tau_max:
                raise DomainError("need 0 < tau_min <= tau_max")
            tau = np.exp(rng.uniform(math.log(self.tau_min), math.log(self.tau_max), n))
            return np.exp(-1.0 / tau)
        if self.kind == "constant":
            return check_alpha(np.full(n, float(self.value)))
        if self.kind == "uniform":
            return check_alpha(rng.uniform(self.low, self.high, n))
        raise DomainError(f"unknown alpha kind {self.kind!r}")


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_out, fan_in))


def scaled_gaussian(rng: np.random.Generator, n: int, gain: float = 1.0) -> np.ndarray:
    """Gaussian ``n x n`` kernel with entry std ``gain/sqrt(n)`` (radius ~ gain)."""
    return rng.standard_normal((n, n)) * (gain / math.sqrt(n))


@dataclass
class LpRnnParams:
    w_in: np.ndarray
    w_rec: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    activation: str = "relu"
    # trainable-alpha mode: alpha = sigmoid(alpha_logit)
    alpha_logit: Optional[np.ndarray] = None

    def __post_init__(self):
        self.w_in = np.asarray(self.w_in, dtype=np.float64)
        self.w_rec = np.asarray(self.w_rec, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.alpha = check_alpha(self.alpha)
        act_code(self.activation)
        h = self.w_rec.shape[0]
        if self.w_rec.shape != (h, h) or self.w_in.ndim != 2 or self.w_in.shape[0] != h:
            raise ShapeError(f"inconsistent kernels: w_in {self.w_in.shape}, w_rec {self.w_rec.shape}")
        if self.b.shape != (h,) or self.alpha.shape != (h,):
            raise ShapeError("b and alpha must have one entry per hidden unit")
        if self.alpha_logit is not None:
            self.alpha_logit = np.asarray(self.alpha_logit, dtype=np.float64)

    @property
    def hidden(self) -> int:
        return self.w_rec.shape[0]

    @property
    def n_input(self) -> int:
        return self.w_in.shape[1]

    @property
    def trains_alpha(self) -> bool:
        return self.alpha_logit is not None

    def effective_alpha(self) -> np.ndarray:
        if self.alpha_logit is not None:
            return sigmoid(self.alpha_logit)
        return self.alpha

    def trainable(self) -> Dict[str, np.ndarray]:
        out = {"w_in": self.w_in, "w_rec": self.w_rec, "b": self.b}
        if self.alpha_logit is not None:
            out["alpha_logit"] = self.alpha_logit
        return out

    def copy(self) -> "LpRnnParams":
        return LpRnnParams(self.w_in.copy(), self.w_rec.copy(), self.b.copy(), self.alpha.copy(),
                           self.activation,
                           None if self.alpha_logit is None else self.alpha_logit.copy())


@dataclass
class LpLstmParams:
    w_f: np.ndarray
    w_i: np.ndarray
    w_o: np.ndarray
    w_c: np.ndarray
    w_rec_f: np.ndarray
    w_rec_i: np.ndarray
    w_rec_o: np.ndarray
    w_rec_c: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray
    alpha: np.ndarray
    state_activation: str = "relu"
    output_activation: str = "relu"
    alpha_logit: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in self._array_names():
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        self.alpha = check_alpha(self.alpha)
        act_code(self.state_activation)
        act_code(self.output_activation)
        h = self.alpha.shape[0]
        n_in = self.w_f.shape[1] if self.w_f.ndim == 2 else -1
        for g in LSTM_GATES:
            if getattr(self, f"w_{g}").shape != (h, n_in):
                raise ShapeError(f"w_{g} must be ({h}, {n_in})")
            if getattr(self, f"w_rec_{g}").shape != (h, h):
                raise ShapeError(f"w_rec_{g} must be ({h}, {h})")
            if getattr(self, f"b_{g}").shape != (h,):
                raise ShapeError(f"b_{g} must be ({h},)")
        if self.alpha_logit is not None:
            self.alpha_logit = np.asarray(self.alpha_logit, dtype=np.float64)

    @staticmethod
    def _array_names():
        return ([f"w_{g}" for g in LSTM_GATES] + [f"w_rec_{g}" for g in LSTM_GATES]
                + [f"b_{g}" for g in LSTM_GATES] + ["alpha"])

    @property
    def hidden(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_input(self) -> int:
        return self.w_f.shape[1]

    @property
    def trains_alpha(self) -> bool:
        return self.alpha_logit is not None

    def effective_alpha(self) -> np.ndarray:
        if self.alpha_logit is not None:
            return sigmoid(self.alpha_logit)
        return self.alpha

    def stacked(self):
        wx = np.concatenate([getattr(self, f"w_{g}") for g in LSTM_GATES], axis=0)
        wh = np.concatenate([getattr(self, f"w_rec_{g}") for g in LSTM_GATES], axis=0)
        b = np.concatenate([getattr(self, f"b_{g}") for g in LSTM_GATES])
        return wx, wh, b

    def trainable(self) -> Dict[str, np.ndarray]:
        out = {name: getattr(self, name) for name in self._array_names() if name != "alpha"}
        if self.alpha_logit is not None:
            out["alpha_logit"] = self.alpha_logit
        return out

    def copy(self) -> "LpLstmParams":
        kw = {name: getattr(self, name).copy() for name in self._array_names()}
        return LpLstmParams(**kw, state_activation=self.state_activation,
                            output_activation=self.output_activation,
                            alpha_logit=None if self.alpha_logit is None else self.alpha_logit.copy())


@dataclass
class DenseParams:
    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise ShapeError(f"dense w {self.w.shape} / b {self.b.shape} mismatch")

    def trainable(self) -> Dict[str, np.ndarray]:
        return {"w": self.w, "b": self.b}

    def copy(self) -> "DenseParams":
        return DenseParams(self.w.copy(), self.b.copy())


def init_lprnn(n_input: int, n_hidden: int, seed: int, activation: str = "relu",
               alpha: Optional[AlphaConfig] = None, recurrent_gain: float = 1.0,
               train_alpha: bool = False) -> LpRnnParams:
    """Glorot-uniform input kernel, scaled-Gaussian recurrent kernel, zero bias."""
    alpha = alpha or AlphaConfig()
    rng = seeded_rng(seed, STREAM_INIT)
    w_in = glorot_uniform(rng, n_hidden, n_input)
    w_rec = scaled_gaussian(rng, n_hidden, recurrent_gain)
    a = alpha.sample(n_hidden, seeded_rng(seed, STREAM_ALPHA))
    logit = None
    if train_alpha:
        clipped = np.clip(a, 1e-6, 1 - 1e-6)
        logit = np.log(clipped / (1.0 - clipped))
        a = sigmoid(logit)
    return LpRnnParams(w_in, w_rec, np.zeros(n_hidden), a, activation, logit)


def init_lplstm(n_input: int, n_hidden: int, seed: int, alpha: Optional[AlphaConfig] = None,
                state_activation: str = "relu", output_activation: str = "relu",
                recurrent_gain: float = 1.0, forget_bias: float = 1.0,
                train_alpha: bool = False) -> LpLstmParams:
    alpha = alpha or AlphaConfig()
    rng = seeded_rng(seed, STREAM_INIT)
    kw = {}
    for g in LSTM_GATES:
        kw[f"w_{g}"] = glorot_uniform(rng, n_hidden, n_input)
    for g in LSTM_GATES:
        kw[f"w_rec_{g}"] = scaled_gaussian(rng, n_hidden, recurrent_gain)
    for g in LSTM_GATES:
        kw[f"b_{g}"] = np.zeros(n_hidden)
    kw["b_f"] += forget_bias
    a = alpha.sample(n_hidden, seeded_rng(seed, STREAM_ALPHA))
    logit = None
    if train_alpha:
        clipped = np.clip(a, 1e-6, 1 - 1e-6)
        logit = np.log(clipped / (1.0 - clipped))
        a = sigmoid(logit)
    return LpLstmParams(**kw, alpha=a, state_activation=state_activation,
                        output_activation=output_activation, alpha_logit=logit)


def init_dense(n_in: int, n_out: int, seed: int, stream: int = STREAM_INIT + 16) -> DenseParams:
    rng = seeded_rng(seed, stream)
    return DenseParams(glorot_uniform(rng, n_out, n_in), np.zeros(n_out))


# ---------------------------------------------------------------------------
# traces

@dataclass
class ForwardTrace:
    """Per-step values cached by a forward pass for exact BPTT.

    ``states`` maps names to arrays; sequences of states include the initial
    state at index 0, so their leading length is ``T + 1``.
    """
    kind: str
    x: np.ndarray
    states: Dict[str, np.ndarray] = field(default_factory=dict)
    alpha: Optional[np.ndarray] = None
    squeeze: bool = False

    def __len__(self) -> int:
        return self.x.shape[0]


def _batched(x_seq, n_input: int):
    x = np.asarray(x_seq, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[:, None, :]
    if x.ndim != 3 or x.shape[2] != n_input:
        raise ShapeError(f"expected input (T, [B,] {n_input}), got {np.shape(x_seq)}")
    return np.ascontiguousarray(x), squeeze


def _initial(state, batch: int, hidden: int, name: str) -> np.ndarray:
    if state is None:
        return np.zeros((batch, hidden))
    s = np.asarray(state, dtype=np.float64)
    if s.shape == (hidden,):
        s = np.broadcast_to(s, (batch, hidden))
    if s.shape != (batch, hidden):
        raise ShapeError(f"{name} must be ({hidden},) or ({batch}, {hidden}), got {s.shape}")
    return np.ascontiguousarray(s)


def _unbatch(arr: np.ndarray, squeeze: bool) -> np.ndarray:
    return arr[:, 0, :] if squeeze else arr


def _dy_batched(dy, trace: ForwardTrace, hidden: int) -> np.ndarray:
    dy = np.asarray(dy, dtype=np.float64)
    if trace.squeeze and dy.ndim == 2:
        dy = dy[:, None, :]
    expected = (trace.x.shape[0], trace.x.shape[1], hidden)
    if dy.shape != expected:
        raise ShapeError(f"upstream gradient must have shape {expected}, got {dy.shape}")
    return np.ascontiguousarray(dy)


# ---------------------------------------------------------------------------
# lpRNN

def lprnn_forward(params: LpRnnParams, x_seq, y0=None):
    """Run the lpRNN over ``x_seq``; returns ``(y_seq, trace)``."""
    x, squeeze = _batched(x_seq, params.n_input)
    y0 = _initial(y0, x.shape[1], params.hidden, "y0")
    alpha = np.ascontiguousarray(check_alpha(params.effective_alpha()))
    y, s = _backend.kernels.rnn_forward(
        x, np.ascontiguousarray(params.w_in), np.ascontiguousarray(params.w_rec),
        np.ascontiguousarray(params.b), alpha, y0, act_code(params.activation))
    trace = ForwardTrace("lprnn", x, {"y": y, "s": s}, alpha, squeeze)
    return _unbatch(y[1:], squeeze), trace


def lprnn_backward(params: LpRnnParams, trace: ForwardTrace, dL_dy_seq,
                   return_inputs: bool = False):
    """Exact gradients of the loss with respect to the trainable parameters.

    ``dL_dy_seq`` holds the direct loss gradient on each output ``y_t``. With
    ``return_inputs`` also returns ``(dL/dx_seq, dL/dy0)``.
    """
    if trace.kind != "lprnn":
        raise ShapeError(f"trace of kind {trace.kind!r} passed to lprnn_backward")
    if trace.x.shape[2] != params.n_input or trace.states["y"].shape[2] != params.hidden:
        raise ShapeError("trace does not match params")
    dy = _dy_batched(dL_dy_seq, trace, params.hidden)
    dw_in, dw_rec, db, dalpha, dx, dy0 = _backend.kernels.rnn_backward(
        trace.x, trace.states["y"], trace.states["s"], np.ascontiguousarray(params.w_in),
        np.ascontiguousarray(params.w_rec), trace.alpha, act_code(params.activation), dy)
    grads = {"w_in": dw_in, "w_rec": dw_rec, "b": db}
    if params.alpha_logit is not None:
        grads["alpha_logit"] = dalpha * trace.alpha * (1.0 - trace.alpha)
    if return_inputs:
        dy0_out = dy0[0] if trace.squeeze else dy0
        return grads, _unbatch(dx, trace.squeeze), dy0_out
    return grads


def simple_rnn_params(w_in, w_rec, b, activation: str = "tanh") -> LpRnnParams:
    """SimpleRNN expressed as an lpRNN with all retention ratios at zero."""
    w_rec = np.asarray(w_rec, dtype=np.float64)
    return LpRnnParams(w_in, w_rec, b, np.zeros(w_rec.shape[0]), activation)


# ---------------------------------------------------------------------------
# lpLSTM

def lplstm_forward(params: LpLstmParams, x_seq, h0=None, c0=None):
    """Run the lpLSTM over ``x_seq``; returns ``(h_seq, trace)``."""
    x, squeeze = _batched(x_seq, params.n_input)
    batch = x.shape[1]
    h0 = _initial(h0, batch, params.hidden, "h0")
    c0 = _initial(c0, batch, params.hidden, "c0")
    wx, wh, b = params.stacked()
    alpha = np.ascontiguousarray(check_alpha(params.effective_alpha()))
    h, c, gates, m = _backend.kernels.lstm_forward(
        x, wx, wh, b, alpha, h0, c0,
        act_code(params.state_activation), act_code(params.output_activation))
    trace = ForwardTrace("lplstm", x, {"h": h, "c": c, "gates": gates, "m": m}, alpha, squeeze)
    return _unbatch(h[1:], squeeze), trace


def lplstm_backward(params: LpLstmParams, trace: ForwardTrace, dL_dh_seq,
                    return_inputs: bool = False):
    if trace.kind != "lplstm":
        raise ShapeError(f"trace of kind {trace.kind!r} passed to lplstm_backward")
    if trace.x.shape[2] != params.n_input or trace.states["h"].shape[2] != params.hidden:
        raise ShapeError("trace does not match params")
    dh = _dy_batched(dL_dh_seq, trace, params.hidden)
    wx, wh, _ = params.stacked()
    dwx, dwh, db, dalpha, dx, dh0, dc0 = _backend.kernels.lstm_backward(
        trace.x, trace.states["h"], trace.states["c"], trace.states["gates"], trace.states["m"],
        wx, wh, trace.alpha, act_code(params.state_activation),
        act_code(params.output_activation), dh)
    h = params.hidden
    grads = {}
    for k, g in enumerate(LSTM_GATES):
        grads[f"w_{g}"] = dwx[k * h:(k + 1) * h]
        grads[f"w_rec_{g}"] = dwh[k * h:(k + 1) * h]
        grads[f"b_{g}"] = db[k * h:(k + 1) * h]
    if params.alpha_logit is not None:
        grads["alpha_logit"] = dalpha * trace.alpha * (1.0 - trace.alpha)
    if return_inputs:
        if trace.squeeze:
            return grads, dx[:, 0, :], dh0[0], dc0[0]
        return grads, dx, dh0, dc0
    return grads


# ---------------------------------------------------------------------------
# readout and losses

def dense_forward(params: DenseParams, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != params.w.shape[1]:
        raise ShapeError(f"dense expects {params.w.shape[1]} features, got {h.shape[-1]}")
    return h @ params.w.T + params.b


def dense_backward(params: DenseParams, h, d_out):
    """Returns ``(grads, dL/dh)``."""
    h = np.asarray(h, dtype=np.float64)
    d_out = np.asarray(d_out, dtype=np.float64)
    hf = h.reshape(-1, h.shape[-1])
    gf = d_out.reshape(-1, d_out.shape[-1])
    grads = {"w": gf.T @ hf, "b": gf.sum(axis=0)}
    return grads, d_out @ params.w


def mse_loss(pred, target):
    """Mean squared error over all entries; returns ``(loss, dL/dpred)``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    n = max(diff.size, 1)
    return float(np.sum(diff * diff) / n), 2.0 * diff / n


def log_softmax(logits):
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def softmax_xent(logits, targets, mask=None):
    """Mean cross-entropy over (optionally masked) positions.

    ``logits`` is ``(..., K)``, ``targets`` integer classes of shape ``(...)``.
    Returns ``(loss, dL/dlogits)``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets)
    k = logits.shape[-1]
    if targets.shape != logits.shape[:-1]:
        raise ShapeError(f"targets {targets.shape} do not match logits {logits.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= k):
        raise DomainError(f"class index out of range [0, {k})")
    w = np.ones(targets.shape) if mask is None else np.asarray(mask, dtype=np.float64)
    n = float(w.sum())
    if n <= 0:
        return 0.0, np.zeros_like(logits)
    lsm = log_softmax(logits)
    picked = np.take_along_axis(lsm, targets[..., None].astype(np.intp), axis=-1)[..., 0]
    loss = float(-np.sum(picked * w) / n)
    grad = np.exp(lsm)
    np.put_along_axis(grad, targets[..., None].astype(np.intp),
                      np.take_along_axis(grad, targets[..., None].astype(np.intp), axis=-1) - 1.0,
                      axis=-1)
    grad *= (w / n)[..., None]
    return loss, grad


# ---------------------------------------------------------------------------
# gradient checking

CELL_KINDS = ("simple_rnn", "lprnn", "lstm", "lplstm", "dense_softmax")


def _relative_error(a: np.ndarray, n: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-12)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def _finite_difference(loss_fn, arrays: Dict[str, np.ndarray], epsilon: float):
    """Central differences; ``loss_fn`` returns the loss or its per-term parts."""
    num = {}
    for name, arr in arrays.items():
        g = np.empty_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + epsilon
            lp = loss_fn()
            flat[k] = old - epsilon
            lm = loss_fn()
            flat[k] = old
            # per-term differences first: avoids cancellation in the totals
            gflat[k] = math.fsum(np.ravel(lp - lm)) / (2.0 * epsilon)
        num[name] = g
    return num


def gradient_check(cell_kind: str, sizes: Optional[dict] = None, seed: int = 0,
                   epsilon: float = 1e-5, activation: Optional[str] = None,
                   train_alpha: bool = False, return_details: bool = False):
    """Worst relative error between BPTT and central finite differences.

    The instance is random: Gaussian inputs, a random linear functional of the
    whole output sequence as loss (cross-entropy for ``dense_softmax``), and
    retention ratios from the default log-uniform-tau sampler (zero for the
    ``simple_rnn``/``lstm`` kinds). Input and initial-state gradients are
    checked alongside the parameter gradients.
    """
    if not 0 < epsilon <= 1e-3:
        raise DomainError("epsilon must lie in (0, 1e-3]")
    if cell_kind not in CELL_KINDS:
        raise DomainError(f"unknown cell kind {cell_kind!r}")
    sizes = dict(sizes or {})
    hidden = int(sizes.get("hidden", 8))
    n_in = int(sizes.get("input", 3))
    steps = int(sizes.get("length", 12))
    batch = int(sizes.get("batch", 2))
    rng = seeded_rng(seed, STREAM_GRADCHECK)
    x = rng.standard_normal((steps, batch, n_in))
    zero_alpha = AlphaConfig(kind="constant", value=0.0)
    alpha_cfg = AlphaConfig(tau_max=20.0)

    if cell_kind in ("simple_rnn", "lprnn"):
        params = init_lprnn(n_in, hidden, seed, activation or "tanh",
                            zero_alpha if cell_kind == "simple_rnn" else alpha_cfg,
                            train_alpha=train_alpha and cell_kind == "lprnn")
        params.b[:] = rng.normal(0.0, 0.3, hidden)
        y0 = rng.normal(0.0, 0.5, (batch, hidden))
        proj = rng.standard_normal((steps, batch, hidden))
        state = {"x": x, "y0": y0}

        def loss_fn():
            y, _ = lprnn_forward(params, state["x"], state["y0"])
            return proj * y

        _, trace = lprnn_forward(params, x, y0)
        grads, dx, dy0 = lprnn_backward(params, trace, proj, return_inputs=True)
        analytic = dict(grads, x=dx, y0=dy0)
        arrays = dict(params.trainable(), x=state["x"], y0=state["y0"])
    elif cell_kind in ("lstm", "lplstm"):
        act = activation or "tanh"
        params = init_lplstm(n_in, hidden, seed,
                             zero_alpha if cell_kind == "lstm" else alpha_cfg,
                             state_activation=act, output_activation=act,
                             train_alpha=train_alpha and cell_kind == "lplstm")
        for g in LSTM_GATES:
            getattr(params, f"b_{g}")[:] += rng.normal(0.0, 0.3, hidden)
        h0 = rng.normal(0.0, 0.5, (batch, hidden))
        c0 = rng.normal(0.0, 0.5, (batch, hidden))
        proj = rng.standard_normal((steps, batch, hidden))
        state = {"x": x, "h0": h0, "c0": c0}

        def loss_fn():
            h, _ = lplstm_forward(params, state["x"], state["h0"], state["c0"])
            return proj * h

        _, trace = lplstm_forward(params, x, h0, c0)
        grads, dx, dh0, dc0 = lplstm_backward(params, trace, proj, return_inputs=True)
        analytic = dict(grads, x=dx, h0=dh0, c0=dc0)
        arrays = dict(params.trainable(), **state)
    else:
        n_classes = int(sizes.get("classes", 5))
        dense = init_dense(hidden, n_classes, seed)
        dense.b[:] = rng.normal(0.0, 0.3, n_classes)
        h = rng.standard_normal((steps, batch, hidden))
        targets = rng.integers(0, n_classes, (steps, batch))
        mask = (rng.random((steps, batch)) < 0.8).astype(np.float64)
        mask[0, 0] = 1.0
        state = {"h": h}

        def loss_fn():
            logits = dense_forward(dense, state["h"])
            return -np.take_along_axis(log_softmax(logits), targets[..., None], axis=-1)[..., 0] \
                * mask / mask.sum()

        _, dlogits = softmax_xent(dense_forward(dense, h), targets, mask)
        grads, dh = dense_backward(dense, h, dlogits)
        analytic = dict(grads, h=dh)
        arrays = dict(dense.trainable(), h=state["h"])

    numeric = _finite_difference(loss_fn, arrays, epsilon)
    errors = {k: _relative_error(analytic[k], numeric[k]) for k in numeric}
    worst = max(errors.values())
    if return_details:
        return worst, errors
    return worst
