import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lprnn.analysis import (EigenPair, eigen_shift, eigen_table, jacobian_power_factor,
                            memory_horizon, planted_spectrum, rotation_block, shifted_jacobian,
                            verify_shared_eigenvectors)
from lprnn.errors import DomainError, PreconditionError, ShapeError
from lprnn.numerics import spectral_radius


def test_eigen_shift_examples():
    for a in (0.0, 0.25, 0.9, 1.0):
        assert eigen_shift(1.0, a) == 1.0
    assert eigen_shift(0.0, 0.3) == pytest.approx(0.3)
    assert eigen_shift(-0.5, 0.8) == pytest.approx(0.7)
    with pytest.raises(DomainError):
        eigen_shift(0.5, 1.2)


def test_power_factor_examples():
    w = np.random.default_rng(0).standard_normal((4, 4))
    assert np.array_equal(jacobian_power_factor(w, 0.3, 0), np.eye(4))
    assert np.allclose(jacobian_power_factor(w, 1.0, 5), np.eye(4))
    assert jacobian_power_factor(np.array([[2.0]]), 0.5, 3)[0, 0] == pytest.approx(3.375)
    with pytest.raises(ShapeError):
        jacobian_power_factor(np.ones((2, 3)), 0.5, 2)


@given(st.integers(0, 12), st.integers(0, 12), st.floats(0, 1))
def test_power_factor_composes(l1, l2, alpha):
    w = np.random.default_rng(l1 * 13 + l2).standard_normal((5, 5)) / math.sqrt(5)
    lhs = jacobian_power_factor(w, alpha, l1 + l2)
    rhs = jacobian_power_factor(w, alpha, l1) @ jacobian_power_factor(w, alpha, l2)
    assert np.allclose(lhs, rhs, atol=1e-9, rtol=0)


def test_planted_spectrum_seed5():
    ps = planted_spectrum(20, seed=5)
    assert verify_shared_eigenvectors(ps.w, ps.pairs(), 0.6) <= 1e-10


def test_verify_alpha_extremes():
    ps = planted_spectrum(8, seed=1)
    m0 = shifted_jacobian(ps.w, 0.0)
    assert np.array_equal(m0, ps.w.T)
    for pair in ps.pairs():
        assert eigen_shift(pair.value, 0.0) == pair.value
        assert eigen_shift(pair.value, 1.0) == 1.0
    assert verify_shared_eigenvectors(ps.w, ps.pairs(), 1.0) <= 1e-12


def test_verify_rejects_non_eigenpairs():
    ps = planted_spectrum(6, seed=2)
    bogus = EigenPair(0.123, np.ones(6))
    with pytest.raises(PreconditionError):
        verify_shared_eigenvectors(ps.w, [bogus], 0.5)


def test_rotation_block_complex_shift():
    r, phi, alpha = 1.2, 0.9, 0.4
    w = rotation_block(r, phi)
    lam = r * complex(math.cos(phi), math.sin(phi))
    got = np.linalg.eigvals(shifted_jacobian(w, alpha))
    want = eigen_shift(lam, alpha)
    assert min(abs(g - want) for g in got) <= 1e-12
    assert min(abs(g - want.conjugate()) for g in got) <= 1e-12


def test_memory_horizon_examples():
    assert memory_horizon(0.5, 0.5) == 1
    assert memory_horizon(0.5, 1e-3) == 10
    assert memory_horizon(0.99, 0.01) == 459
    for bad in (0.0, 1.0):
        with pytest.raises(DomainError):
            memory_horizon(bad, 0.1)


@given(st.floats(0.01, 0.999), st.floats(1e-6, 0.99))
def test_memory_horizon_is_minimal(alpha, eps):
    t = memory_horizon(alpha, eps)
    assert alpha ** t <= eps
    assert t == 1 or alpha ** (t - 1) > eps


@given(st.integers(0, 500), st.floats(0.01, 0.99))
def test_radius_triangle_bound(seed, alpha):
    w = np.random.default_rng(seed).standard_normal((10, 10)) / math.sqrt(10)
    rho = spectral_radius(w)
    shifted = np.max(np.abs(np.linalg.eigvals(shifted_jacobian(w, alpha))))
    assert shifted <= (1 - alpha) * rho + alpha + 1e-8


def test_eigen_table_rows():
    rows = eigen_table(5, seed=3, alphas=[0.0, 0.5])
    assert len(rows) == 10
    assert all(r.residual <= 1e-10 for r in rows)
    assert all(r.shifted == pytest.approx((1 - r.alpha) * r.lam + r.alpha) for r in rows)
