"""Echo-state network: an lpRNN whose kernels stay at their random init.

Only the linear readout is trained. The recurrent kernel is rescaled to a
target spectral radius below 1 so that the reservoir forgets its initial
state.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .cells import AlphaConfig, LpRnnParams, lprnn_forward, mse_loss
from .errors import DomainError, ShapeError, SolverError
from .numerics import STREAM_ALPHA, STREAM_INIT, STREAM_SHUFFLE, scale_to_spectral_radius, seeded_rng
from .training import Optimizer, OptimizerConfig

DEFAULT_WASHOUT = 100
# reservoir time constants stay below 50 steps so the echo state fades in ~1000 steps
ESN_ALPHA = AlphaConfig(tau_max=50.0)


@dataclass
class EsnParams:
    w_in: np.ndarray
    w_rec: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    activation: str = "tanh"
    rho_target: float = 0.95

    @property
    def hidden(self) -> int:
        return self.w_rec.shape[0]

    def as_lprnn(self) -> LpRnnParams:
        return LpRnnParams(self.w_in, self.w_rec, self.b, self.alpha, self.activation)

    def reservoir_checksum(self) -> str:
        """Digest of the fixed part (kernels, bias, retention ratios)."""
        h = hashlib.sha256()
        for a in (self.w_in, self.w_rec, self.b, self.alpha):
            h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
        return h.hexdigest()


def esn_init(n_hidden: int = 50, n_input: int = 1, rho_target: float = 0.95,
             alpha_config: Optional[AlphaConfig] = None, seed: int = 0,
             input_scale: float = 1.0, bias_scale: float = 0.5, activation: str = "tanh",
             n_output: int = 1) -> EsnParams:
    """Gaussian reservoir rescaled to spectral radius ``rho_target``; zero readout."""
    if n_hidden < 1 or n_input < 1:
        raise DomainError("n_hidden and n_input must be >= 1")
    if not 0.0 < rho_target <= 1.0:
        raise DomainError("rho_target must lie in (0, 1]")
    rng = seeded_rng(seed, STREAM_INIT)
    w_in = rng.standard_normal((n_hidden, n_input)) * input_scale
    w_rec = scale_to_spectral_radius(rng.standard_normal((n_hidden, n_hidden)), rho_target)
    b = rng.standard_normal(n_hidden) * bias_scale
    alpha = (alpha_config or ESN_ALPHA).sample(n_hidden, seeded_rng(seed, STREAM_ALPHA))
    return EsnParams(w_in, w_rec, b, alpha, np.zeros((n_output, n_hidden)), np.zeros(n_output),
                     activation, float(rho_target))


def esn_states(params: EsnParams, x_seq, y0=None) -> np.ndarray:
    y, _ = lprnn_forward(params.as_lprnn(), x_seq, y0)
    return y


def readout(params: EsnParams, states: np.ndarray) -> np.ndarray:
    return states @ params.w_out.T + params.b_out


def _as_targets(states: np.ndarray, targets) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    if states.ndim != 2 or targets.shape[0] != states.shape[0]:
        raise ShapeError(f"states {states.shape} and targets {targets.shape} are not aligned")
    return targets


def ridge_readout(states, targets, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """Solve ``(A^T A + lam I) w = A^T y`` with ``A = [states, 1]``."""
    states = np.asarray(states, dtype=np.float64)
    y = _as_targets(states, targets)
    if lam < 0:
        raise DomainError("ridge lambda must be >= 0")
    a = np.hstack([states, np.ones((states.shape[0], 1))])
    gram = a.T @ a + lam * np.eye(a.shape[1])
    if lam == 0 and np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise SolverError("normal equations are singular; use lam > 0")
    try:
        w = np.linalg.solve(gram, a.T @ y)
    except np.linalg.LinAlgError as exc:
        raise SolverError(str(exc)) from exc
    return np.ascontiguousarray(w[:-1].T), w[-1].copy()


def sgd_readout(states, targets, optimizer: Optional[OptimizerConfig] = None, epochs: int = 1000,
                batch_size: int = 32, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Minibatch gradient descent on the mean squared readout error."""
    states = np.asarray(states, dtype=np.float64)
    y = _as_targets(states, targets)
    opt = Optimizer(optimizer or OptimizerConfig(learning_rate=0.05))
    params = {"w": np.zeros((y.shape[1], states.shape[1])), "b": np.zeros(y.shape[1])}
    rng = seeded_rng(seed, STREAM_SHUFFLE)
    n = states.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for k in range(0, n, batch_size):
            idx = order[k:k + batch_size]
            s = states[idx]
            _, g = mse_loss(s @ params["w"].T + params["b"], y[idx])
            # mse_loss averages over outputs too; rescale to a per-sample mean
            g = g * y.shape[1]
            opt.step(params, {"w": g.T @ s, "b": g.sum(axis=0)})
    return params["w"], params["b"]


def train_readout(params: EsnParams, states, targets, method: str = "sgd", lam: float = 1e-2,
                  optimizer: Optional[OptimizerConfig] = None, epochs: int = 1000,
                  seed: int = 0) -> EsnParams:
    """Fit the linear readout in place (kernels untouched); returns ``params``."""
    if method == "ridge":
        w, b = ridge_readout(states, targets, lam)
    elif method == "sgd":
        w, b = sgd_readout(states, targets, optimizer, epochs, seed=seed)
    else:
        raise DomainError(f"unknown readout method {method!r}")
    params.w_out = w
    params.b_out = b
    return params


def sign_accuracy(output: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of nonzero-label steps where ``sign(output)`` matches the label."""
    output = np.asarray(output).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    m = labels != 0
    if not np.any(m):
        raise DomainError("no labelled steps")
    return float(np.mean(np.sign(output[m]) == np.sign(labels[m])))
