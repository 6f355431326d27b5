"""Dense numeric helpers used by every other module.

Matrices and vectors are plain ``float64`` numpy arrays (row-major). Batched
sequence tensors are time-major: ``(T, batch, features)``.
"""
from __future__ import annotations

import math
import warnings
from typing import Mapping, NamedTuple

import numpy as np

from . import _backend
from .errors import ConvergenceWarning, DegenerateInputError, DomainError, ShapeError

ACTIVATIONS = ("tanh", "relu", "sigmoid", "identity")

# Independent RNG streams; every consumer draws from its own stream id.
STREAM_INIT = 0
STREAM_ALPHA = 1
STREAM_TASK = 2
STREAM_SHUFFLE = 3
STREAM_GRADCHECK = 4


def seeded_rng(seed: int, stream: int = 0, *sub: int) -> np.random.Generator:
    """Counter-based generator for ``(seed, stream, *sub)``.

    Philox keyed by a SeedSequence spawned on ``(stream, *sub)``; distinct keys
    give statistically independent sequences. ``sub`` lets one stream fan out,
    e.g. one generator per curriculum stage.
    """
    key = (int(stream),) + tuple(int(k) for k in sub)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def as_vector(a, name: str = "vector") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def hadamard(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard operands differ: {a.shape} vs {b.shape}")
    return a * b


def sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def activate(v, kind: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if kind == "tanh":
        return np.tanh(v)
    if kind == "relu":
        return np.maximum(v, 0.0)
    if kind == "sigmoid":
        return sigmoid(v)
    if kind == "identity":
        return v.copy()
    raise DomainError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def activate_grad(z, kind: str, out=None) -> np.ndarray:
    """Derivative of ``activate(z, kind)`` with respect to ``z``.

    ``out`` may carry the already-computed activation to avoid recomputing it.
    The relu derivative at exactly zero is taken as 0.
    """
    z = np.asarray(z, dtype=np.float64)
    if kind == "tanh":
        t = np.tanh(z) if out is None else out
        return 1.0 - t * t
    if kind == "relu":
        return (z > 0).astype(np.float64)
    if kind == "sigmoid":
        s = sigmoid(z) if out is None else out
        return s * (1.0 - s)
    if kind == "identity":
        return np.ones_like(z)
    raise DomainError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


class SpectralRadius(NamedTuple):
    value: float
    converged: bool
    iterations: int


def _ritz_radius(q: np.ndarray, w: np.ndarray) -> float:
    h = q.T @ (w @ q)
    return float(np.max(np.abs(np.linalg.eigvals(h))))


def spectral_radius_info(w, max_iters: int = 20000, tol: float = 1e-13,
                         block: int = 2, seed: int = 0) -> SpectralRadius:
    """Estimate ``max |lambda|`` of a square matrix by subspace power iteration.

    A ``block``-column orthonormal basis is repeatedly multiplied by ``w`` and
    re-orthonormalised; the radius estimate is the largest modulus among the
    eigenvalues of the small Rayleigh matrix ``Q^T W Q``. With ``block=2`` a
    dominant complex-conjugate pair is resolved exactly by the 2x2 subproblem,
    where plain power iteration would oscillate.

    Convergence means two successive estimates differ by less than
    ``tol * max(1, estimate)``; otherwise the last estimate is returned with
    ``converged=False``.
    """
    w = as_matrix(w, "w")
    n, m = w.shape
    if n != m:
        raise ShapeError(f"spectral radius needs a square matrix, got {w.shape}")
    if max_iters < 1:
        raise DomainError("max_iters must be >= 1")
    if n == 0:
        raise ShapeError("empty matrix")
    if not np.all(np.isfinite(w)):
        raise DomainError("matrix has non-finite entries")
    k = min(block, n)
    if n <= k:
        val = float(np.max(np.abs(np.linalg.eigvals(w))))
        return SpectralRadius(val, True, 1)
    q, _ = np.linalg.qr(seeded_rng(seed, 0).standard_normal((n, k)))
    prev = _ritz_radius(q, w)
    for it in range(1, max_iters + 1):
        z = w @ q
        if not np.any(z):
            return SpectralRadius(0.0, True, it)
        q, _ = np.linalg.qr(z)
        est = _ritz_radius(q, w)
        if abs(est - prev) < tol * max(1.0, est):
            return SpectralRadius(est, True, it)
        prev = est
    return SpectralRadius(prev, False, max_iters)


def spectral_radius(w, max_iters: int = 20000, tol: float = 1e-13) -> float:
    info = spectral_radius_info(w, max_iters=max_iters, tol=tol)
    if not info.converged:
        warnings.warn(f"spectral radius did not converge in {max_iters} iterations",
                      ConvergenceWarning, stacklevel=2)
    return info.value


def scale_to_spectral_radius(w, target: float) -> np.ndarray:
    if not target > 0:
        raise DomainError(f"target spectral radius must be positive, got {target}")
    w = as_matrix(w, "w")
    rho = spectral_radius(w)
    if rho < 1e-12:
        raise DegenerateInputError("matrix has a (numerically) zero spectrum")
    return w * (target / rho)


def check_alpha(alpha, name: str = "alpha") -> np.ndarray:
    alpha = np.asarray(alpha, dtype=np.float64)
    if not np.all(np.isfinite(alpha)) or np.any(alpha < 0.0) or np.any(alpha > 1.0):
        raise DomainError(f"{name} entries must lie in [0, 1]")
    return alpha


def lowpass_signal(x, alpha, y0=None) -> np.ndarray:
    """First-order filter ``y_t = alpha*y_{t-1} + (1-alpha)*x_t`` per channel.

    ``x`` has shape ``(T, n)`` (a 1-D ``x`` is treated as one channel);
    ``alpha`` broadcasts to ``(n,)``.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.ndim != 2:
        raise ShapeError(f"x must be (T, n), got {x.shape}")
    n = x.shape[1]
    alpha = np.broadcast_to(check_alpha(alpha), (n,)).astype(np.float64)
    y0 = np.zeros(n) if y0 is None else np.broadcast_to(
        np.asarray(y0, dtype=np.float64), (n,)).astype(np.float64)
    y = _backend.kernels.lowpass(np.ascontiguousarray(x), np.ascontiguousarray(alpha),
                                 np.ascontiguousarray(y0))
    return y[:, 0] if squeeze else y


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))


def clip_global_norm(grads: Mapping[str, np.ndarray], max_norm: float):
    """Rescale all gradients jointly so their global L2 norm is ``<= max_norm``.

    Returns ``(clipped, scale)``; ``scale`` is 1.0 when no clipping occurred.
    """
    if not max_norm > 0:
        raise DomainError("max_norm must be positive")
    g = global_norm(grads)
    if not math.isfinite(g):
        return dict(grads), float("nan")
    if g <= max_norm:
        return dict(grads), 1.0
    scale = max_norm / g
    return {k: v * scale for k, v in grads.items()}, scale
