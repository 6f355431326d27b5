"""Spectral effect of the retention ratio on the linearised recurrence.

Linearising the lpRNN around its state gives the one-step Jacobian
``(1 - a) W^T + a I``. Every eigenvector of ``W^T`` is also an eigenvector of
that matrix, with eigenvalue moved from ``lam`` to ``(1 - a) lam + a``, i.e.
pulled toward 1. The helpers below check this on matrices with planted
spectra and report how long a leaky unit remembers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Union

import numpy as np

from .errors import DomainError, PreconditionError, ShapeError
from .numerics import as_matrix, seeded_rng

Scalar = Union[float, complex]


def _check_scalar_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0 or not math.isfinite(alpha):
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def eigen_shift(lam: Scalar, alpha: float) -> Scalar:
    """Eigenvalue of ``(1 - alpha) W^T + alpha I`` given eigenvalue ``lam`` of ``W^T``."""
    alpha = _check_scalar_alpha(alpha)
    return (1.0 - alpha) * lam + alpha


def shifted_jacobian(w_rec, alpha: float) -> np.ndarray:
    w = as_matrix(w_rec, "w_rec")
    if w.shape[0] != w.shape[1]:
        raise ShapeError(f"w_rec must be square, got {w.shape}")
    alpha = _check_scalar_alpha(alpha)
    return (1.0 - alpha) * w.T + alpha * np.eye(w.shape[0])


def jacobian_power_factor(w_rec, alpha: float, l: int) -> np.ndarray:
    """``((1 - alpha) W^T + alpha I) ** l`` by repeated squaring."""
    if l < 0:
        raise DomainError("power l must be >= 0")
    base = shifted_jacobian(w_rec, alpha)
    result = np.eye(base.shape[0])
    l = int(l)
    while l:
        if l & 1:
            result = result @ base
        l >>= 1
        if l:
            base = base @ base
    return result


@dataclass(frozen=True)
class EigenPair:
    value: Scalar
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector)
        if v.ndim != 1:
            raise ShapeError("eigenvector must be 1-D")
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise DomainError("eigenvector must be nonzero")
        object.__setattr__(self, "vector", v / norm)

    def residual(self, m: np.ndarray) -> float:
        return float(np.linalg.norm(m @ self.vector - self.value * self.vector))


def verify_shared_eigenvectors(w, pairs: Iterable[EigenPair], alpha: float,
                               input_tol: float = 1e-8) -> float:
    """Worst residual of the shifted eigen-relation over ``pairs``.

    ``pairs`` must be eigenpairs of ``w^T``; a pair whose own residual exceeds
    ``input_tol`` raises ``PreconditionError``.
    """
    w = as_matrix(w, "w")
    if w.shape[0] != w.shape[1]:
        raise ShapeError(f"w must be square, got {w.shape}")
    wt = w.T
    shifted = shifted_jacobian(w, alpha)
    worst = 0.0
    for k, pair in enumerate(pairs):
        if pair.vector.shape[0] != w.shape[0]:
            raise ShapeError(f"pair {k} has length {pair.vector.shape[0]}, expected {w.shape[0]}")
        r_in = pair.residual(wt)
        if r_in > input_tol:
            raise PreconditionError(f"pair {k} is not an eigenpair of w^T (residual {r_in:.3e})")
        target = eigen_shift(pair.value, alpha)
        worst = max(worst, float(np.linalg.norm(shifted @ pair.vector - target * pair.vector)))
    return worst


@dataclass
class PlantedSpectrum:
    """``w`` built so that ``w^T = V diag(values) V^{-1}``."""
    w: np.ndarray
    values: np.ndarray
    vectors: np.ndarray     # columns are eigenvectors of w^T

    def pairs(self) -> List[EigenPair]:
        return [EigenPair(float(lam), self.vectors[:, k]) for k, lam in enumerate(self.values)]


def planted_spectrum(n: int, seed: int, radius: float = 1.5, cond_limit: float = 1e3) -> PlantedSpectrum:
    """Random diagonalisable matrix with a known real spectrum in ``[-radius, radius]``.

    Eigenvectors are redrawn until ``V`` is reasonably conditioned so the
    construction itself stays accurate.
    """
    rng = seeded_rng(seed, 7)
    values = rng.uniform(-radius, radius, n)
    for _ in range(100):
        v = rng.standard_normal((n, n))
        v /= np.linalg.norm(v, axis=0)
        if np.linalg.cond(v) < cond_limit:
            break
    wt = v @ np.diag(values) @ np.linalg.inv(v)
    return PlantedSpectrum(np.ascontiguousarray(wt.T), values, v)


def rotation_block(r: float, phi: float) -> np.ndarray:
    """2x2 real block with eigenvalues ``r exp(+-i phi)``."""
    c, s = math.cos(phi), math.sin(phi)
    return r * np.array([[c, -s], [s, c]])


def memory_horizon(alpha: float, epsilon: float) -> int:
    """Smallest ``t`` with ``alpha ** t <= epsilon``."""
    alpha = float(alpha)
    epsilon = float(epsilon)
    if not 0.0 < alpha < 1.0:
        raise DomainError("memory horizon needs alpha in (0, 1)")
    if not 0.0 < epsilon < 1.0:
        raise DomainError("epsilon must lie in (0, 1)")
    t = max(1, math.ceil(math.log(epsilon) / math.log(alpha)))
    # guard the ceil against rounding on either side
    while t > 1 and alpha ** (t - 1) <= epsilon:
        t -= 1
    while alpha ** t > epsilon:
        t += 1
    return t


@dataclass
class EigenRow:
    lam: float
    alpha: float
    shifted: float
    residual: float


def eigen_table(n: int, seed: int, alphas: Sequence[float]) -> List[EigenRow]:
    """Rows of (lambda, alpha, shifted lambda, residual) for one planted matrix."""
    ps = planted_spectrum(n, seed)
    rows = []
    for alpha in alphas:
        m = shifted_jacobian(ps.w, alpha)
        for pair in ps.pairs():
            shifted = eigen_shift(pair.value, alpha)
            v = pair.vector
            res = float(np.linalg.norm(m @ v - shifted * v))
            rows.append(EigenRow(float(pair.value), float(alpha), float(shifted), res))
    return rows
