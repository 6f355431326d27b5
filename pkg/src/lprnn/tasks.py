"""Seeded generators for the synthetic memory tasks.

Addition: two input streams, uniform values and a 0/1 marker stream; the
target is the sum of the values at the marked steps.

Copy: ``s`` data symbols, ``t_blanks`` blanks, one trigger, then ``s - 1``
padding blanks. The target is blank for the first ``s + t_blanks`` steps and
the data symbols afterwards, so the first symbol is due on the trigger step.

ESN pattern: alternating sinusoidal bursts at two frequencies, with a +1/-1
label on the burst plateaus and 0 on the ramps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError


@dataclass
class AdditionSample:
    x: np.ndarray           # (length, 2): values, markers
    target: float
    length: int
    marker_count: int

    @property
    def marker_positions(self) -> np.ndarray:
        return np.flatnonzero(self.x[:, 1])


@dataclass
class AdditionBatch:
    x: np.ndarray           # (length, n, 2)
    target: np.ndarray      # (n,)


def _open_unit(rng: np.random.Generator, shape) -> np.ndarray:
    # uniform on the open interval (0, 1)
    v = rng.random(shape)
    while np.any(v == 0.0):
        v[v == 0.0] = rng.random(int(np.count_nonzero(v == 0.0)))
    return v


def _check_addition(length: int, marker_count: int) -> None:
    if marker_count < 2:
        raise DomainError("marker_count must be >= 2")
    if length < 2 * marker_count:
        raise DomainError(f"length {length} too short for {marker_count} markers")


def _marker_positions(length: int, marker_count: int, n: int, rng: np.random.Generator):
    if marker_count == 2:
        half = length // 2
        first = rng.integers(0, half, n)
        second = rng.integers(half, length, n)
        return np.stack([first, second], axis=1)
    pos = np.empty((n, marker_count), dtype=np.int64)
    for k in range(n):
        pos[k] = np.sort(rng.choice(length, marker_count, replace=False))
    return pos


def gen_addition_batch(n: int, length: int, rng: np.random.Generator,
                       marker_count: int = 2) -> AdditionBatch:
    """``n`` addition samples stacked time-major."""
    _check_addition(length, marker_count)
    values = _open_unit(rng, (n, length))
    pos = _marker_positions(length, marker_count, n, rng)
    markers = np.zeros((n, length))
    np.put_along_axis(markers, pos, 1.0, axis=1)
    target = np.sum(values * markers, axis=1)
    x = np.stack([values, markers], axis=-1).transpose(1, 0, 2)
    return AdditionBatch(np.ascontiguousarray(x), target)


def gen_addition(length: int, marker_count: int, rng: np.random.Generator) -> AdditionSample:
    batch = gen_addition_batch(1, length, rng, marker_count)
    return AdditionSample(batch.x[:, 0, :].copy(), float(batch.target[0]), length, marker_count)


# ---------------------------------------------------------------------------
# copy task

@dataclass
class CopySample:
    x: np.ndarray           # (length, k + 2) one-hot
    target: np.ndarray      # (length,) class indices
    s: int
    t_blanks: int
    k: int

    @property
    def blank(self) -> int:
        return self.k

    @property
    def trigger(self) -> int:
        return self.k + 1

    @property
    def length(self) -> int:
        return self.target.shape[0]

    @property
    def data(self) -> np.ndarray:
        return self.target[-self.s:]


@dataclass
class CopyBatch:
    x: np.ndarray           # (L, n, k + 2), zero-padded past each sample's end
    target: np.ndarray      # (L, n) class indices, blank in the padding
    mask: np.ndarray        # (L, n) 1.0 on valid steps
    s: np.ndarray           # (n,)


def copy_length(s: int, t_blanks: int) -> int:
    return 2 * s + t_blanks


def copy_input_classes(data, t_blanks: int, k: int) -> np.ndarray:
    s = len(data)
    blank, trigger = k, k + 1
    return np.concatenate([np.asarray(data, dtype=np.int64), np.full(t_blanks, blank),
                           [trigger], np.full(s - 1, blank)]).astype(np.int64)


def copy_target_classes(data, t_blanks: int, k: int) -> np.ndarray:
    s = len(data)
    return np.concatenate([np.full(s + t_blanks, k), np.asarray(data, dtype=np.int64)]).astype(np.int64)


def one_hot(classes, n_classes: int) -> np.ndarray:
    classes = np.asarray(classes, dtype=np.int64)
    out = np.zeros(classes.shape + (n_classes,))
    np.put_along_axis(out, classes[..., None], 1.0, axis=-1)
    return out


def decode(x: np.ndarray) -> np.ndarray:
    """Class indices of a one-hot sequence."""
    x = np.asarray(x)
    if x.ndim < 1:
        raise ShapeError("expected a one-hot array")
    return np.argmax(x, axis=-1)


def _check_copy(s_max: int, t_blanks: int, k: int) -> None:
    if k < 2 or s_max < 1 or t_blanks < 1:
        raise DomainError("copy task needs k >= 2, s_max >= 1, t_blanks >= 1")


def gen_copy(s_max: int, t_blanks: int, k: int, rng: np.random.Generator,
             s: int | None = None) -> CopySample:
    _check_copy(s_max, t_blanks, k)
    if s is None:
        s = int(rng.integers(1, s_max + 1))
    elif not 1 <= s <= s_max:
        raise DomainError("s must lie in [1, s_max]")
    data = rng.integers(0, k, s)
    return CopySample(one_hot(copy_input_classes(data, t_blanks, k), k + 2),
                      copy_target_classes(data, t_blanks, k), s, t_blanks, k)


def gen_copy_batch(n: int, s_max: int, t_blanks: int, k: int,
                   rng: np.random.Generator) -> CopyBatch:
    """``n`` copy samples, post-padded to the longest and masked."""
    _check_copy(s_max, t_blanks, k)
    s = rng.integers(1, s_max + 1, n)
    data = rng.integers(0, k, (n, s_max))
    length = copy_length(int(s.max()), t_blanks)
    x = np.zeros((length, n, k + 2))
    target = np.full((length, n), k, dtype=np.int64)
    mask = np.zeros((length, n))
    for j in range(n):
        sj = int(s[j])
        d = data[j, :sj]
        cls = copy_input_classes(d, t_blanks, k)
        x[np.arange(cls.size), j, cls] = 1.0
        target[:cls.size, j] = copy_target_classes(d, t_blanks, k)
        mask[:cls.size, j] = 1.0
    return CopyBatch(x, target, mask, s)


def blank_baseline_accuracy(s, t_blanks: int) -> float:
    """Categorical accuracy of a predictor that always emits blank.

    ``s`` may be one value or an array of per-sample symbol counts; accuracy
    pools all valid steps.
    """
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    lengths = 2 * s + t_blanks
    return float(np.sum(lengths - s) / np.sum(lengths))


def expected_blank_baseline(s_max: int, t_blanks: int) -> float:
    """Pooled blank-predictor accuracy with ``s`` uniform on ``[1, s_max]`` (large-n limit)."""
    s = np.arange(1, s_max + 1, dtype=np.float64)
    return float(np.sum(s + t_blanks) / np.sum(2 * s + t_blanks))


# ---------------------------------------------------------------------------
# ESN burst pattern

@dataclass
class EsnPatternSignal:
    x: np.ndarray            # (n_steps,)
    label_trace: np.ndarray  # (n_steps,) +1 burst A plateau, -1 burst B plateau, 0 ramps


FREQ_A = 0.02
FREQ_B = 0.05
RAMP = 10


def gen_esn_pattern(n_steps: int, rng: np.random.Generator, min_burst: int = 50,
                    max_burst: int = 100, ramp: int = RAMP) -> EsnPatternSignal:
    """Alternating A/B sinusoid bursts with raised-cosine on/off ramps."""
    if n_steps < 200:
        raise DomainError("n_steps must be >= 200")
    if not 2 * ramp < min_burst <= max_burst:
        raise DomainError("burst lengths must exceed two ramps")
    x = np.zeros(n_steps)
    label = np.zeros(n_steps)
    cls = int(rng.integers(0, 2))
    t0 = 0
    up = 0.5 - 0.5 * np.cos(np.pi * (np.arange(ramp) + 0.5) / ramp)
    while t0 < n_steps:
        n = int(rng.integers(min_burst, max_burst + 1))
        freq = FREQ_A if cls == 0 else FREQ_B
        phase = rng.uniform(0.0, 2 * math.pi)
        env = np.ones(n)
        env[:ramp] = up
        env[n - ramp:] = up[::-1]
        t = np.arange(n)
        seg = env * np.sin(2 * math.pi * freq * t + phase)
        lab = np.zeros(n)
        lab[ramp:n - ramp] = 1.0 if cls == 0 else -1.0
        stop = min(n, n_steps - t0)
        x[t0:t0 + stop] = seg[:stop]
        label[t0:t0 + stop] = lab[:stop]
        t0 += n
        cls = 1 - cls
    return EsnPatternSignal(x, label)
