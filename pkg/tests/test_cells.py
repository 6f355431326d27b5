import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lprnn.cells import (AlphaConfig, DenseParams, LpRnnParams, dense_backward, dense_forward,
                         gradient_check, init_dense, init_lplstm, init_lprnn, lplstm_backward,
                         lplstm_forward, lprnn_backward, lprnn_forward, mse_loss,
                         simple_rnn_params, softmax_xent)
from lprnn.errors import DomainError, ShapeError
from lprnn.numerics import lowpass_signal

from reference import lp_lstm, simple_rnn

ZERO = AlphaConfig(kind="constant", value=0.0)
ONE = AlphaConfig(kind="constant", value=1.0)


def _inputs(seed, t=7, n_in=3, hidden=5):
    r = np.random.default_rng(seed)
    return r.standard_normal((t, n_in)), r.normal(0, 0.5, hidden)


def test_alpha_zero_is_simple_rnn():
    x, y0 = _inputs(0)
    p = init_lprnn(3, 5, seed=0, activation="tanh", alpha=ZERO)
    y, _ = lprnn_forward(p, x, y0)
    assert np.max(np.abs(y - simple_rnn(p.w_in, p.w_rec, p.b, x, y0))) <= 1e-12


def test_alpha_one_freezes_output_and_gradients():
    x, y0 = _inputs(1)
    p = init_lprnn(3, 5, seed=1, activation="relu", alpha=ONE)
    y, trace = lprnn_forward(p, x, y0)
    assert np.array_equal(y, np.tile(y0, (7, 1)))
    grads = lprnn_backward(p, trace, np.ones_like(y))
    assert all(not np.any(g) for g in grads.values())


def test_scalar_closed_form():
    p = LpRnnParams([[1.0]], [[0.0]], [0.0], [0.5], "relu")
    y, _ = lprnn_forward(p, np.ones((10, 1)), [0.0])
    assert np.allclose(y[:, 0], 1 - 0.5 ** np.arange(1, 11), atol=1e-15)


def test_identity_activation_is_filtered_preactivation():
    # with w_rec = 0 the pre-activation stream does not depend on the state
    r = np.random.default_rng(2)
    w_in = r.standard_normal((4, 2))
    b = r.standard_normal(4)
    alpha = r.uniform(0, 1, 4)
    x = r.standard_normal((15, 2))
    p = LpRnnParams(w_in, np.zeros((4, 4)), b, alpha, "identity")
    y, _ = lprnn_forward(p, x)
    assert np.allclose(y, lowpass_signal(x @ w_in.T + b, alpha), atol=1e-13)


def test_forward_is_deterministic():
    x, y0 = _inputs(3)
    p = init_lprnn(3, 5, seed=3)
    y1, t1 = lprnn_forward(p, x, y0)
    y2, t2 = lprnn_forward(p, x, y0)
    assert np.array_equal(y1, y2)
    assert all(np.array_equal(t1.states[k], t2.states[k]) for k in t1.states)
    assert len(t1) == 7


def test_batch_matches_single():
    r = np.random.default_rng(4)
    p = init_lprnn(3, 5, seed=4, activation="tanh")
    xb = r.standard_normal((6, 4, 3))
    yb, _ = lprnn_forward(p, xb)
    for j in range(4):
        ys, _ = lprnn_forward(p, xb[:, j])
        assert np.allclose(yb[:, j], ys, atol=1e-14)


def test_shape_and_domain_errors():
    with pytest.raises(DomainError):
        LpRnnParams(np.ones((2, 1)), np.eye(2), np.zeros(2), [0.5, 1.5])
    with pytest.raises(ShapeError):
        LpRnnParams(np.ones((2, 1)), np.eye(3), np.zeros(2), [0.5, 0.5])
    p = init_lprnn(3, 5, seed=0)
    with pytest.raises(ShapeError):
        lprnn_forward(p, np.ones((4, 2)))
    _, trace = lprnn_forward(p, np.ones((4, 3)))
    with pytest.raises(ShapeError):
        lprnn_backward(p, trace, np.ones((3, 5)))
    lstm = init_lplstm(3, 5, seed=0)
    with pytest.raises(ShapeError):
        lplstm_backward(lstm, trace, np.ones((4, 5)))


def test_zero_upstream_gives_zero_gradients():
    x, y0 = _inputs(5)
    p = init_lprnn(3, 5, seed=5)
    _, trace = lprnn_forward(p, x, y0)
    assert all(not np.any(g) for g in lprnn_backward(p, trace, np.zeros((7, 5))).values())
    q = init_lplstm(3, 5, seed=5)
    _, tr = lplstm_forward(q, x)
    assert all(not np.any(g) for g in lplstm_backward(q, tr, np.zeros((7, 5))).values())


@pytest.mark.parametrize("act", ["relu", "tanh"])
def test_lplstm_matches_reference(act):
    r = np.random.default_rng(3)
    p = init_lplstm(2, 4, seed=3, state_activation=act, output_activation=act)
    for name in ("b_f", "b_i", "b_o", "b_c"):
        getattr(p, name)[:] += r.normal(0, 0.3, 4)
    x = r.standard_normal((10, 2))
    h0, c0 = r.normal(0, 0.5, 4), r.normal(0, 0.5, 4)
    h, _ = lplstm_forward(p, x, h0, c0)
    assert np.max(np.abs(h - lp_lstm(p, x, h0, c0))) <= 1e-12


def test_lplstm_zero_kernels():
    p = init_lplstm(2, 3, seed=0, forget_bias=0.0)
    for name in p.trainable():
        getattr(p, name)[:] = 0.0
    h, trace = lplstm_forward(p, np.ones((5, 2)))
    assert not np.any(h)
    gates = trace.states["gates"]
    assert np.allclose(gates[:, 0, :9], 0.5)


def test_lplstm_alpha_zero_is_unfiltered():
    r = np.random.default_rng(6)
    p = init_lplstm(2, 3, seed=6, alpha=ZERO, state_activation="tanh", output_activation="tanh")
    x = r.standard_normal((6, 2))
    h, trace = lplstm_forward(p, x)
    c = trace.states["c"][1:, 0]
    o = trace.states["gates"][:, 0, 6:9]
    assert np.allclose(h, o * np.tanh(c), atol=1e-15)


@pytest.mark.parametrize("kind,sizes", [
    ("simple_rnn", {"hidden": 8, "length": 12}),
    ("lprnn", {"hidden": 8, "length": 12}),
    ("lstm", {"hidden": 6, "length": 10}),
    ("lplstm", {"hidden": 6, "length": 10}),
    ("dense_softmax", {"hidden": 8, "length": 12}),
])
def test_gradient_check(kind, sizes):
    assert gradient_check(kind, sizes, seed=7) <= 1e-6


@pytest.mark.parametrize("kind", ["lprnn", "lplstm"])
def test_gradient_check_relu_and_trainable_alpha(kind):
    assert gradient_check(kind, {"hidden": 4, "length": 6}, seed=2, activation="relu") <= 1e-6
    # near-zero gradient entries make the relative metric noisier here, hence 1e-5
    assert gradient_check(kind, {"hidden": 4, "length": 6}, seed=2, train_alpha=True) <= 1e-5


def test_gradient_check_rejects_bad_epsilon():
    with pytest.raises(DomainError):
        gradient_check("lprnn", epsilon=0.1)


def test_losses():
    loss, grad = softmax_xent(np.zeros((3, 4)), np.array([0, 1, 3]))
    assert loss == pytest.approx(math.log(4))
    assert np.allclose(grad.sum(axis=-1), 0)
    with pytest.raises(DomainError):
        softmax_xent(np.zeros((2, 3)), np.array([0, 3]))
    assert mse_loss(np.array([1.5, 2.0]), np.array([1.5, 2.0]))[0] == 0.0
    loss, grad = mse_loss(np.array([1.0]), np.array([0.0]))
    assert loss == 1.0 and np.array_equal(grad, [2.0])


def test_softmax_is_stable():
    loss, grad = softmax_xent(np.array([[1e4, 0.0, -1e4]]), np.array([0]))
    assert loss == pytest.approx(0.0) and np.all(np.isfinite(grad))


def test_dense_round_trip_shapes():
    d = init_dense(4, 3, seed=0)
    h = np.random.default_rng(0).standard_normal((5, 2, 4))
    out = dense_forward(d, h)
    assert out.shape == (5, 2, 3)
    grads, dh = dense_backward(d, h, np.ones_like(out))
    assert grads["w"].shape == (3, 4) and dh.shape == h.shape
    with pytest.raises(ShapeError):
        DenseParams(np.ones((3, 4)), np.ones(4))


def test_alpha_sampler_range():
    a = AlphaConfig().sample(1000, np.random.default_rng(0))
    assert np.all(a >= math.exp(-1.0) - 1e-15) and np.all(a <= math.exp(-1 / 200.0))
    tau = -1 / np.log(a)
    # log-uniform: about half the mass below the geometric mean of [1, 200]
    assert abs(np.mean(tau < math.sqrt(200.0)) - 0.5) < 0.06


@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 8))
def test_simple_rnn_equivalence_property(seed, hidden, steps):
    r = np.random.default_rng(seed)
    w_in, w_rec = r.standard_normal((hidden, 2)), r.standard_normal((hidden, hidden))
    b, y0 = r.standard_normal(hidden), r.standard_normal(hidden)
    x = r.standard_normal((steps, 2))
    y, _ = lprnn_forward(simple_rnn_params(w_in, w_rec, b, "tanh"), x, y0)
    assert np.max(np.abs(y - simple_rnn(w_in, w_rec, b, x, y0))) <= 1e-12
