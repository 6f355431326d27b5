"""The compiled kernels agree with the pure-Python kernels."""
import numpy as np
import pytest

from lprnn import _backend
from lprnn._pykernels import ACT_IDENTITY, ACT_RELU, ACT_SIGMOID, ACT_TANH

py = _backend.python_kernels
cy = _backend.compiled_kernels

pytestmark = pytest.mark.skipif(cy is None, reason="compiled kernels not built")

ACTS = [ACT_IDENTITY, ACT_TANH, ACT_RELU, ACT_SIGMOID]
TOL = 1e-12


def _close(a, b, tol=TOL):
    if a is None or b is None:
        assert a is None and b is None
        return
    if np.isscalar(a) or np.ndim(a) == 0:
        assert abs(float(a) - float(b)) <= tol * max(1.0, abs(float(a)))
        return
    a, b = np.asarray(a), np.asarray(b)
    assert a.shape == b.shape
    np.testing.assert_allclose(a, b, rtol=tol, atol=tol)


def _rnn_problem(rng, steps=9, batch=3, n_in=2, hidden=5):
    x = rng.normal(size=(steps, batch, n_in))
    w_in = rng.normal(size=(hidden, n_in)) * 0.5
    w_rec = rng.normal(size=(hidden, hidden)) * 0.3
    b = rng.normal(size=hidden) * 0.1
    alpha = rng.uniform(0, 1, size=hidden)
    y0 = rng.normal(size=(batch, hidden)) * 0.1
    return x, w_in, w_rec, b, alpha, y0


def test_active_backend_name():
    assert _backend.NAME in ("python", "cython")


def test_lowpass_agrees(rng):
    x = rng.normal(size=(40, 6))
    alpha = rng.uniform(0, 1, size=6)
    y0 = rng.normal(size=6)
    _close(py.lowpass(x, alpha, y0), cy.lowpass(x, alpha, y0))


@pytest.mark.parametrize("act", ACTS)
def test_rnn_forward_backward_agree(rng, act):
    x, w_in, w_rec, b, alpha, y0 = _rnn_problem(rng)
    fp = py.rnn_forward(x, w_in, w_rec, b, alpha, y0, act)
    fc = cy.rnn_forward(x, w_in, w_rec, b, alpha, y0, act)
    for a, c in zip(fp, fc):
        _close(a, c)
    y, s = fp
    dy = rng.normal(size=y[1:].shape)
    bp = py.rnn_backward(x, y, s, w_in, w_rec, alpha, act, dy)
    bc = cy.rnn_backward(x, y, s, w_in, w_rec, alpha, act, dy)
    for a, c in zip(bp, bc):
        _close(a, c)


@pytest.mark.parametrize("acts", [(ACT_TANH, ACT_TANH), (ACT_RELU, ACT_IDENTITY)])
def test_lstm_forward_backward_agree(rng, acts):
    steps, batch, n_in, hidden = 7, 2, 3, 4
    x = rng.normal(size=(steps, batch, n_in))
    wx = rng.normal(size=(4 * hidden, n_in)) * 0.4
    wh = rng.normal(size=(4 * hidden, hidden)) * 0.4
    b = rng.normal(size=4 * hidden) * 0.1
    alpha = rng.uniform(0, 1, size=hidden)
    h0 = rng.normal(size=(batch, hidden)) * 0.1
    c0 = rng.normal(size=(batch, hidden)) * 0.1
    fp = py.lstm_forward(x, wx, wh, b, alpha, h0, c0, *acts)
    fc = cy.lstm_forward(x, wx, wh, b, alpha, h0, c0, *acts)
    for a, c in zip(fp, fc):
        _close(a, c)
    h, c, gates, m = fp
    dh = rng.normal(size=h[1:].shape)
    bp = py.lstm_backward(x, h, c, gates, m, wx, wh, alpha, *acts, dh)
    bc = cy.lstm_backward(x, h, c, gates, m, wx, wh, alpha, *acts, dh)
    for a, c2 in zip(bp, bc):
        _close(a, c2)


@pytest.mark.parametrize("bipolar", [True, False])
def test_ds_encode_agrees(rng, bipolar):
    drive = np.sin(np.linspace(0, 6, 2000)) * 0.9 + rng.normal(size=2000) * 0.05
    beta = float(np.exp(-1 / 640))
    out_p = py.ds_encode(drive, 0.01, beta, 64, bipolar, 0.0, 0.0)
    out_c = cy.ds_encode(drive, 0.01, beta, 64, bipolar, 0.0, 0.0)
    np.testing.assert_array_equal(out_p[1], out_c[1])
    for i in (0, 2, 3, 4, 5):
        _close(out_p[i], out_c[i], 1e-10)


@pytest.mark.parametrize("hold", [True, False])
def test_snn_simulate_agrees(rng, hold):
    hidden, steps, osr = 6, 60, 16
    x = np.sin(np.arange(steps) * 0.2)[:, None]
    w_in = rng.normal(size=(hidden, 1))
    w_rec = rng.normal(size=(hidden, hidden)) * 0.2
    b = rng.normal(size=hidden) * 0.1
    beta = np.exp(-1 / (rng.uniform(2, 20, size=hidden) * osr))
    theta = np.full(hidden, 0.02)
    args = (x, w_in, w_rec, b, ACT_TANH, beta, theta, osr, True, np.zeros(hidden), hold, True)
    out_p = py.snn_simulate(*args)
    out_c = cy.snn_simulate(*args)
    for i in (1, 2, 3, 5):
        np.testing.assert_array_equal(out_p[i], out_c[i])
    _close(out_p[0], out_c[0], 1e-10)
    _close(out_p[4], out_c[4], 1e-10)


def test_model_training_identical_across_backends():
    from lprnn.training import (CurriculumConfig, ModelConfig, OptimizerConfig, SequenceModel,
                                curriculum_run, make_problem)

    def run(name):
        previous = _backend.NAME
        _backend.use(name)
        try:
            problem = make_problem("addition")
            model = SequenceModel.build(ModelConfig(cell="lprnn", hidden=8, activation="relu"),
                                        problem.n_input, problem.n_output, problem.output, 3)
            cur = CurriculumConfig(initial_length=5, max_length=5, train_samples_per_stage=64,
                                   test_samples_per_stage=32, max_epochs_per_stage=2)
            return curriculum_run(model, problem, cur, OptimizerConfig(), 3).metrics()
        finally:
            _backend.use(previous)

    a, c = run("python"), run("cython")
    assert a["stage_epochs"] == c["stage_epochs"]
    np.testing.assert_allclose(a["stage_metrics"], c["stage_metrics"], rtol=1e-9)
