"""Delta-sigma spiking neurons and the lpRNN to SNN mapping.

Each neuron integrates its drive ``d`` on a fine grid of ``oversampling``
substeps per RNN step (``dt = 1/oversampling``). Whenever the integrator
reaches ``+theta`` (or ``-theta`` in bipolar mode) it emits a spike and
subtracts ``theta``. Several crossings may fall inside one substep; all are
emitted, each at its exact crossing time, so the integrator stays bounded by
``theta + |d| dt`` for any drive.

The decoder is a leaky integrator of the spike train:
``r <- beta r + (1 - beta) q theta oversampling`` with ``q`` the signed spike
count of the substep and ``beta = exp(-1/(tau_mem oversampling))``. A spike
rate ``f`` per substep therefore decodes to ``f theta oversampling`` at DC,
and over one RNN step the decoder retains ``beta ** oversampling =
exp(-1/tau_mem)``, which is the lpRNN retention ratio ``alpha``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

import numpy as np

from . import _backend
from .cells import LpRnnParams, act_code
from .errors import DivergenceError, DomainError, MappingError, ShapeError
from .esn import EsnParams
from .numerics import lowpass_signal


@dataclass(frozen=True)
class DsNeuronConfig:
    theta: float = 0.01
    tau_mem: float = 10.0          # RNN steps
    oversampling: int = 64
    bipolar: bool = True

    def __post_init__(self):
        if not self.theta > 0 or not math.isfinite(self.theta):
            raise DomainError("theta must be positive")
        if int(self.oversampling) != self.oversampling or self.oversampling < 1:
            raise DomainError("oversampling must be an integer >= 1")
        if not self.tau_mem > 0:
            raise DomainError("tau_mem must be positive")

    @property
    def dt(self) -> float:
        return 1.0 / self.oversampling

    @property
    def beta(self) -> float:
        """Per-substep decoder retention."""
        return math.exp(-1.0 / (self.tau_mem * self.oversampling))

    @property
    def alpha_equiv(self) -> float:
        """Decoder retention over one RNN step."""
        return math.exp(-1.0 / self.tau_mem)

    @property
    def quantum(self) -> float:
        """Decoded DC value of one spike per substep."""
        return self.theta * self.oversampling


@dataclass
class DsNeuronState:
    u: float = 0.0          # integrator
    r: float = 0.0          # decoder / feedback filter
    last: int = 0           # signed spike count of the latest substep


@dataclass(frozen=True)
class SpikeTrain:
    """Signed spike events; ``times`` are in substeps (event in substep k has k < time <= k+1)."""
    times: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        if self.times.shape != self.signs.shape:
            raise ShapeError("times and signs must have equal length")

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def substeps(self) -> np.ndarray:
        return np.ceil(self.times).astype(np.int64) - 1

    def counts(self, n_substeps: int) -> np.ndarray:
        out = np.zeros(n_substeps, dtype=np.int64)
        np.add.at(out, self.substeps, self.signs)
        return out


def spike_train_from_counts(counts: np.ndarray, u_pre: np.ndarray, drive: np.ndarray,
                            theta: float, dt: float) -> SpikeTrain:
    """Exact crossing times of a piecewise-constant drive.

    Within substep ``k`` the integrator rises linearly from
    ``u_pre[k] - drive[k] dt``; its ``j``-th level crossing happens at fraction
    ``(sign j theta - u_start) / (drive dt)`` of the substep.
    """
    ks = np.flatnonzero(counts)
    times = []
    signs = []
    for k in ks:
        n = int(counts[k])
        sgn = 1 if n > 0 else -1
        slope = drive[k] * dt
        u_start = u_pre[k] - slope
        j = np.arange(1, abs(n) + 1)
        frac = (sgn * j * theta - u_start) / slope
        frac = np.clip(frac, np.nextafter(0.0, 1.0), 1.0)
        times.append(k + frac)
        signs.append(np.full(abs(n), sgn, dtype=np.int8))
    if not times:
        return SpikeTrain(np.zeros(0), np.zeros(0, dtype=np.int8))
    return SpikeTrain(np.concatenate(times), np.concatenate(signs))


def ds_encode_step(state: DsNeuronState, drive: float,
                   config: DsNeuronConfig) -> Tuple[DsNeuronState, int]:
    """Advance one substep; returns the new state and the signed spike count."""
    d = float(drive)
    if not math.isfinite(d):
        raise DomainError("drive must be finite")
    r_out, counts, _, u, r, _ = _backend.python_kernels.ds_encode(
        np.array([d]), config.theta, config.beta, config.oversampling, config.bipolar,
        state.u, state.r)
    q = int(counts[0])
    return DsNeuronState(u, r, q), q


@dataclass
class EncodeResult:
    decoded: np.ndarray         # decoder value after every substep
    counts: np.ndarray          # signed spikes per substep
    spikes: SpikeTrain
    state: DsNeuronState
    max_excess: float           # max of |u| - (theta + |drive| dt); <= 0 when bounded


def ds_encode(drive, config: DsNeuronConfig, state: Optional[DsNeuronState] = None) -> EncodeResult:
    """Encode a substep-rate drive series with one neuron."""
    drive = np.ascontiguousarray(np.asarray(drive, dtype=np.float64).reshape(-1))
    if not np.all(np.isfinite(drive)):
        raise DomainError("drive must be finite")
    state = state or DsNeuronState()
    r_out, counts, u_pre, u, r, excess = _backend.kernels.ds_encode(
        drive, config.theta, config.beta, config.oversampling, config.bipolar, state.u, state.r)
    last = int(counts[-1]) if counts.size else state.last
    train = spike_train_from_counts(counts, u_pre, drive, config.theta, config.dt)
    return EncodeResult(r_out, counts, train, DsNeuronState(u, r, last), float(excess))


# ---------------------------------------------------------------------------
# network mapping

def _weights_checksum(w_in, w_rec, b) -> str:
    h = hashlib.sha256()
    for a in (w_in, w_rec, b):
        h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return h.hexdigest()


@dataclass
class SnnNetwork:
    w_in: np.ndarray
    w_rec: np.ndarray
    b: np.ndarray
    activation: str
    tau_mem: np.ndarray         # per unit, RNN steps
    theta: np.ndarray           # per unit
    oversampling: int = 64
    bipolar: bool = True
    # drive held over each RNN step (True) or re-evaluated every substep
    hold: bool = True

    @property
    def hidden(self) -> int:
        return self.w_rec.shape[0]

    @property
    def beta(self) -> np.ndarray:
        return np.exp(-1.0 / (self.tau_mem * self.oversampling))

    @property
    def alpha_equiv(self) -> np.ndarray:
        return np.exp(-1.0 / self.tau_mem)

    def checksum(self) -> str:
        return _weights_checksum(self.w_in, self.w_rec, self.b)

    def with_theta(self, theta: float) -> "SnnNetwork":
        return replace(self, theta=np.full(self.hidden, float(theta)))


def tau_from_alpha(alpha) -> np.ndarray:
    """Time constant (RNN steps) with ``alpha = exp(-1/tau)``."""
    a = np.asarray(alpha, dtype=np.float64)
    if np.any(~np.isfinite(a)) or np.any(a <= 0.0) or np.any(a >= 1.0):
        raise MappingError("every alpha must lie strictly inside (0, 1) to have a finite time constant")
    return -1.0 / np.log(a)


def map_to_snn(source: Union[LpRnnParams, EsnParams], config: DsNeuronConfig = DsNeuronConfig(),
               hold: bool = True) -> SnnNetwork:
    """Copy the weights and turn each retention ratio into a decoder time constant.

    ``config.tau_mem`` is ignored; the per-unit value comes from the source.
    """
    if isinstance(source, EsnParams):
        source = source.as_lprnn()
    if source.trains_alpha:
        alpha = source.effective_alpha()
    else:
        alpha = source.alpha
    tau = tau_from_alpha(alpha)
    h = source.hidden
    return SnnNetwork(source.w_in.copy(), source.w_rec.copy(), source.b.copy(), source.activation,
                      tau, np.full(h, float(config.theta)), int(config.oversampling),
                      bool(config.bipolar), bool(hold))


@dataclass
class SnnRun:
    decoded: np.ndarray         # (T, H) decoder state at the end of each RNN step
    counts_pos: np.ndarray      # (H,)
    counts_neg: np.ndarray      # (H,)
    step_spikes: np.ndarray     # (T,) total spikes per RNN step
    max_excess: float
    raster: Optional[np.ndarray] = None     # (T*oversampling, H) signed counts

    @property
    def bounded(self) -> bool:
        return self.max_excess <= BOUND_TOL


# rounding slack for the bounded-integrator check
BOUND_TOL = 1e-9


def simulate_snn(net: SnnNetwork, x_seq, n_steps: Optional[int] = None, r0=None,
                 record: bool = False, check_bounds: bool = True) -> SnnRun:
    """Run the spiking network on an RNN-rate input (zero-order hold to substeps)."""
    x = np.asarray(x_seq, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] != net.w_in.shape[1]:
        raise ShapeError(f"input must be (T, {net.w_in.shape[1]}), got {np.shape(x_seq)}")
    if n_steps is not None:
        if n_steps > x.shape[0]:
            raise ShapeError("n_steps exceeds the input length")
        x = x[:n_steps]
    if not np.all(np.isfinite(x)):
        raise DomainError("input must be finite")
    r0 = np.zeros(net.hidden) if r0 is None else np.asarray(r0, dtype=np.float64)
    out = _backend.kernels.snn_simulate(
        np.ascontiguousarray(x), np.ascontiguousarray(net.w_in), np.ascontiguousarray(net.w_rec),
        np.ascontiguousarray(net.b), act_code(net.activation), np.ascontiguousarray(net.beta),
        np.ascontiguousarray(net.theta), int(net.oversampling), bool(net.bipolar),
        np.ascontiguousarray(r0), bool(net.hold), bool(record))
    run = SnnRun(*out)
    if not np.all(np.isfinite(run.decoded)):
        bad = int(np.argmax(~np.all(np.isfinite(run.decoded), axis=1)))
        raise DivergenceError(f"non-finite decoded state at RNN step {bad}")
    if check_bounds and not run.bounded:
        raise DivergenceError(f"integrator exceeded its bound by {run.max_excess:.3e}")
    return run


def nmse(reference, test) -> float:
    """``sum (ref - test)^2 / sum (ref - mean ref)^2``; means are per channel."""
    ref = np.asarray(reference, dtype=np.float64)
    tst = np.asarray(test, dtype=np.float64)
    if ref.shape != tst.shape:
        raise ShapeError(f"reference {ref.shape} vs test {tst.shape}")
    var = float(np.sum((ref - ref.mean(axis=0)) ** 2))
    if var == 0.0:
        raise DomainError("reference has zero variance")
    return float(np.sum((ref - tst) ** 2) / var)


@dataclass
class SpikeReport:
    per_unit_pos: np.ndarray
    per_unit_neg: np.ndarray
    spikes_per_step: float
    total: int

    @property
    def per_unit(self) -> np.ndarray:
        return self.per_unit_pos + self.per_unit_neg


def spike_count_report(run: SnnRun) -> SpikeReport:
    steps = max(int(run.step_spikes.shape[0]), 1)
    total = int(run.counts_pos.sum() + run.counts_neg.sum())
    return SpikeReport(run.counts_pos.copy(), run.counts_neg.copy(), total / steps, total)


def highband_residual_check(reference, test, alpha_smooth: float = 0.8) -> Tuple[float, float]:
    """NMSE before and after low-pass smoothing both series with ``alpha_smooth``."""
    ref = np.asarray(reference, dtype=np.float64)
    tst = np.asarray(test, dtype=np.float64)
    raw = nmse(ref, tst)
    ref2 = ref if ref.ndim > 1 else ref[:, None]
    tst2 = tst if tst.ndim > 1 else tst[:, None]
    sref = lowpass_signal(ref2, alpha_smooth, ref2[0])
    stst = lowpass_signal(tst2, alpha_smooth, tst2[0])
    return raw, nmse(sref, stst)
