import numpy as np
import pytest

from lprnn.cells import AlphaConfig
from lprnn.errors import DomainError, SolverError
from lprnn.esn import (esn_init, esn_states, readout, ridge_readout, sign_accuracy,
                       train_readout)
from lprnn.numerics import seeded_rng, spectral_radius
from lprnn.tasks import gen_esn_pattern


def test_init_radius_and_determinism():
    p = esn_init(seed=3)
    assert spectral_radius(p.w_rec) == pytest.approx(0.95, abs=1e-6)
    q = esn_init(seed=3)
    assert p.reservoir_checksum() == q.reservoir_checksum()
    assert esn_init(seed=4).reservoir_checksum() != p.reservoir_checksum()
    with pytest.raises(DomainError):
        esn_init(rho_target=0.0)


def test_states_follow_lprnn_examples():
    p = esn_init(n_hidden=4, seed=0, alpha_config=AlphaConfig(kind="constant", value=1.0))
    y0 = np.array([0.1, -0.2, 0.3, 0.0])
    assert np.array_equal(esn_states(p, np.ones((6, 1)), y0), np.tile(y0, (6, 1)))


def test_ridge_examples():
    s = np.random.default_rng(0).standard_normal((300, 6))
    w, b = ridge_readout(s, np.zeros(300), lam=1e-3)
    assert not np.any(w) and not np.any(b)
    w, b = ridge_readout(s, s[:, 2], lam=1e-8)
    want = np.zeros((1, 6))
    want[0, 2] = 1.0
    assert np.allclose(w, want, atol=1e-4) and abs(b[0]) < 1e-4
    with pytest.raises(SolverError):
        ridge_readout(np.ones((10, 3)), np.ones(10), lam=0.0)


def test_sgd_readout_fits_a_linear_map():
    r = np.random.default_rng(1)
    s = r.standard_normal((400, 3))
    y = s @ np.array([0.5, -1.0, 0.25]) + 0.1
    p = esn_init(n_hidden=3, seed=0)
    train_readout(p, s, y, method="sgd", epochs=100)
    assert np.allclose(p.w_out[0], [0.5, -1.0, 0.25], atol=1e-2)
    assert p.b_out[0] == pytest.approx(0.1, abs=1e-2)


@pytest.mark.parametrize("method", ["ridge", "sgd"])
def test_pattern_readout_and_fixed_reservoir(method):
    p = esn_init(seed=0)
    before = p.reservoir_checksum()
    sig = gen_esn_pattern(3000, seeded_rng(0, 2))
    states = esn_states(p, sig.x[:, None])
    train_readout(p, states[100:], sig.label_trace[100:], method=method)
    assert p.reservoir_checksum() == before
    acc = sign_accuracy(readout(p, states)[100:, 0], sig.label_trace[100:])
    assert acc >= 0.95


def test_echo_state_fading():
    p = esn_init(seed=2)
    x = gen_esn_pattern(1000, seeded_rng(2, 2)).x[:, None]
    r = np.random.default_rng(5)
    gap = np.linalg.norm(esn_states(p, x, r.uniform(-1, 1, 50))
                         - esn_states(p, x, r.uniform(-1, 1, 50)), axis=1)
    assert gap[-1] < 1e-6


def test_sign_accuracy_requires_labels():
    with pytest.raises(DomainError):
        sign_accuracy(np.ones(3), np.zeros(3))
    assert sign_accuracy(np.array([1.0, -2.0, 3.0]), np.array([1.0, 1.0, 0.0])) == 0.5
