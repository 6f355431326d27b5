"""Optimisers, sequence models and the curriculum-learning loop.

A ``SequenceModel`` is one recurrent cell plus a dense readout, either on the
final state (``output="last"``, addition task) or on every step
(``output="all"``, copy task). A curriculum trains it on progressively longer
sequences, regenerating fresh data for every stage and carrying parameters
over from one stage to the next.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .cells import (AlphaConfig, DenseParams, LpLstmParams, LpRnnParams, dense_backward,
                    dense_forward, init_dense, init_lplstm, init_lprnn, lplstm_backward,
                    lplstm_forward, lprnn_backward, lprnn_forward, mse_loss, softmax_xent)
from .errors import DivergenceError, DomainError, ShapeError
from .numerics import STREAM_SHUFFLE, STREAM_TASK, clip_global_norm, seeded_rng
from .tasks import blank_baseline_accuracy, gen_addition_batch, gen_copy_batch

RNN_KINDS = ("simple_rnn", "lprnn")
LSTM_KINDS = ("lstm", "lplstm")
MODEL_KINDS = RNN_KINDS + LSTM_KINDS


def default_learning_rate(cell: str) -> float:
    return 0.005 if cell in LSTM_KINDS else 0.01


def default_clip(cell: str) -> float:
    return 1.0 if cell in LSTM_KINDS else 1000.0


def default_activation(cell: str) -> str:
    return "tanh" if cell in LSTM_KINDS else "relu"


# ---------------------------------------------------------------------------
# configuration

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class AlphaSection(_Strict):
    kind: Literal["log_uniform_tau", "constant", "uniform"] = "log_uniform_tau"
    tau_min: float = Field(1.0, gt=0)
    tau_max: float = Field(200.0, gt=0)
    value: float = Field(0.0, ge=0, le=1)
    low: float = Field(0.0, ge=0, le=1)
    high: float = Field(1.0, ge=0, le=1)

    def build(self) -> AlphaConfig:
        return AlphaConfig(**self.model_dump())


class ModelConfig(_Strict):
    cell: Literal["simple_rnn", "lprnn", "lstm", "lplstm"] = "lprnn"
    hidden: int = Field(128, ge=1)
    activation: Optional[Literal["tanh", "relu", "sigmoid", "identity"]] = None
    alpha: AlphaSection = AlphaSection()
    recurrent_gain: float = Field(1.0, gt=0)
    forget_bias: float = 1.0

    def resolved_activation(self) -> str:
        return self.activation or default_activation(self.cell)


class OptimizerConfig(_Strict):
    kind: Literal["sgd", "adam"] = "sgd"
    learning_rate: float = Field(0.01, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    clip_norm: float = Field(1000.0, gt=0)

    @classmethod
    def for_cell(cls, cell: str, **overrides) -> "OptimizerConfig":
        kw = {"learning_rate": default_learning_rate(cell), "clip_norm": default_clip(cell)}
        kw.update(overrides)
        return cls(**kw)


class CurriculumConfig(_Strict):
    initial_length: int = Field(10, ge=1)
    max_length: int = Field(100, ge=1)
    advance_metric: Literal["mse", "categorical_accuracy"] = "mse"
    advance_threshold: float = 0.001
    growth: Literal["multiplicative", "additive"] = "multiplicative"
    growth_factor: float = Field(1.5, gt=1.0)
    growth_step: int = Field(10, ge=1)
    train_samples_per_stage: int = Field(10000, ge=1)
    test_samples_per_stage: int = Field(1000, ge=1)
    batch_size: int = Field(32, ge=1)
    max_epochs_per_stage: int = Field(100, ge=1)
    evals_per_epoch: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _consistent(self):
        if self.max_length < self.initial_length:
            raise ValueError("max_length must be >= initial_length")
        if self.advance_metric == "categorical_accuracy" and not 0 < self.advance_threshold <= 1:
            raise ValueError("accuracy threshold must lie in (0, 1]")
        if self.advance_metric == "mse" and not self.advance_threshold > 0:
            raise ValueError("mse threshold must be positive")
        return self

    def lengths(self) -> List[int]:
        """Stage lengths: grow until ``max_length``; the last stage is exactly ``max_length``."""
        out = [self.initial_length]
        while out[-1] < self.max_length:
            if self.growth == "multiplicative":
                nxt = math.ceil(out[-1] * self.growth_factor)
            else:
                nxt = out[-1] + self.growth_step
            out.append(min(nxt, self.max_length))
        return out

    def passes(self, metric: float) -> bool:
        if not math.isfinite(metric):
            return False
        if self.advance_metric == "mse":
            return metric < self.advance_threshold
        return metric >= self.advance_threshold


# ---------------------------------------------------------------------------
# optimisers

def _check_same_shapes(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
    for name, g in grads.items():
        if name not in params:
            raise ShapeError(f"gradient for unknown parameter {name!r}")
        if np.shape(g) != np.shape(params[name]):
            raise ShapeError(f"{name}: gradient {np.shape(g)} vs parameter {np.shape(params[name])}")


def sgd_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], lr: float):
    """In-place ``p -= lr * g``; returns ``params``."""
    _check_same_shapes(params, grads)
    for name, g in grads.items():
        params[name] -= lr * g
    return params


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
              state: Optional[AdamState], config: OptimizerConfig):
    """One bias-corrected Adam update, in place. Returns ``(params, state)``."""
    _check_same_shapes(params, grads)
    state = state or AdamState()
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, g in grads.items():
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        elif m.shape != np.shape(g):
            raise ShapeError(f"{name}: optimiser state {m.shape} vs gradient {np.shape(g)}")
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params[name] -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)
    return params, state


class Optimizer:
    """Clip-then-step wrapper holding any optimiser state."""

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.adam: Optional[AdamState] = None

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> float:
        grads, scale = clip_global_norm(grads, self.config.clip_norm)
        if self.config.kind == "sgd":
            sgd_step(params, grads, self.config.learning_rate)
        else:
            _, self.adam = adam_step(params, grads, self.adam, self.config)
        return scale


# ---------------------------------------------------------------------------
# model

class SequenceModel:
    def __init__(self, cell_kind: str, cell: LpRnnParams | LpLstmParams, readout: DenseParams,
                 output: str = "last"):
        if cell_kind not in MODEL_KINDS:
            raise DomainError(f"unknown cell kind {cell_kind!r}")
        if output not in ("last", "all"):
            raise DomainError("output must be 'last' or 'all'")
        self.cell_kind = cell_kind
        self.cell = cell
        self.readout = readout
        self.output = output

    @classmethod
    def build(cls, config: ModelConfig, n_input: int, n_output: int, output: str,
              seed: int) -> "SequenceModel":
        act = config.resolved_activation()
        if config.cell in RNN_KINDS:
            alpha = config.alpha.build() if config.cell == "lprnn" else AlphaConfig("constant", value=0.0)
            cell = init_lprnn(n_input, config.hidden, seed, act, alpha, config.recurrent_gain)
        else:
            alpha = config.alpha.build() if config.cell == "lplstm" else AlphaConfig("constant", value=0.0)
            cell = init_lplstm(n_input, config.hidden, seed, alpha, act, act,
                               config.recurrent_gain, config.forget_bias)
        return cls(config.cell, cell, init_dense(config.hidden, n_output, seed), output)

    @property
    def is_lstm(self) -> bool:
        return self.cell_kind in LSTM_KINDS

    def parameters(self) -> Dict[str, np.ndarray]:
        """Trainable arrays (live views) keyed ``cell.<name>`` / ``readout.<name>``."""
        out = {f"cell.{k}": v for k, v in self.cell.trainable().items()}
        out.update({f"readout.{k}": v for k, v in self.readout.trainable().items()})
        return out

    def forward(self, x: np.ndarray):
        if self.is_lstm:
            h, trace = lplstm_forward(self.cell, x)
        else:
            h, trace = lprnn_forward(self.cell, x)
        feats = h[-1] if self.output == "last" else h
        return dense_forward(self.readout, feats), (h, trace)

    def backward(self, cache, d_out: np.ndarray) -> Dict[str, np.ndarray]:
        h, trace = cache
        feats = h[-1] if self.output == "last" else h
        rgrads, d_feats = dense_backward(self.readout, feats, d_out)
        if self.output == "last":
            dh = np.zeros_like(h)
            dh[-1] = d_feats
        else:
            dh = d_feats
        if self.is_lstm:
            cgrads = lplstm_backward(self.cell, trace, dh)
        else:
            cgrads = lprnn_backward(self.cell, trace, dh)
        grads = {f"cell.{k}": v for k, v in cgrads.items()}
        grads.update({f"readout.{k}": v for k, v in rgrads.items()})
        return grads


# ---------------------------------------------------------------------------
# tasks as training problems

@dataclass
class Dataset:
    x: np.ndarray                   # (L, N, features)
    target: np.ndarray              # addition: (N,); copy: (L, N)
    mask: Optional[np.ndarray] = None
    s: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.x.shape[1]

    def take(self, idx: np.ndarray) -> "Dataset":
        if self.mask is None:
            return Dataset(self.x[:, idx], self.target[idx])
        mask = self.mask[:, idx]
        # drop trailing all-padding steps; padding is at the end and causal
        steps = int(np.max(np.nonzero(mask.any(axis=1))[0])) + 1
        return Dataset(np.ascontiguousarray(self.x[:steps, idx]),
                       self.target[:steps, idx], mask[:steps], self.s[idx])


class AdditionProblem:
    """Regress the marked sum from the final state; metric is test mse."""
    metric = "mse"
    output = "last"
    n_input = 2
    n_output = 1

    def __init__(self, marker_count: int = 2):
        self.marker_count = marker_count

    def generate(self, length: int, n: int, rng: np.random.Generator) -> Dataset:
        b = gen_addition_batch(n, length, rng, self.marker_count)
        return Dataset(b.x, b.target)

    def loss_grad(self, out: np.ndarray, batch: Dataset):
        loss, grad = mse_loss(out[:, 0], batch.target)
        return loss, grad[:, None]

    def score(self, out: np.ndarray, batch: Dataset) -> float:
        return float(np.mean((out[:, 0] - batch.target) ** 2))

    def baseline(self, test: Dataset) -> float:
        """mse of the constant predictor 1 (the expected sum)."""
        return float(np.mean((test.target - 1.0) ** 2))


class CopyProblem:
    """Per-step classification over K symbols plus blank; metric is masked accuracy.

    The curriculum length is the number of blanks ``t_blanks``.
    """
    metric = "categorical_accuracy"
    output = "all"

    def __init__(self, k: int = 8, s_max: int = 5):
        self.k = k
        self.s_max = s_max
        self.n_input = k + 2
        self.n_output = k + 1

    def generate(self, length: int, n: int, rng: np.random.Generator) -> Dataset:
        b = gen_copy_batch(n, self.s_max, length, self.k, rng)
        return Dataset(b.x, b.target, b.mask, b.s)

    def loss_grad(self, out: np.ndarray, batch: Dataset):
        return softmax_xent(out, batch.target, batch.mask)

    def score(self, out: np.ndarray, batch: Dataset) -> float:
        hit = (np.argmax(out, axis=-1) == batch.target) * batch.mask
        return float(hit.sum() / batch.mask.sum())

    def baseline(self, test: Dataset) -> float:
        """Accuracy of a predictor that always emits blank, on this test set."""
        return blank_baseline_accuracy(test.s, test.x.shape[0] - 2 * int(test.s.max()))


def make_problem(task: str, **kw):
    if task == "addition":
        return AdditionProblem(**kw)
    if task == "copy":
        return CopyProblem(**kw)
    raise DomainError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# stage and curriculum loops

REPORT_FIELDS = ("stage", "length", "epoch", "train_loss", "test_metric", "baseline",
                 "advanced", "clip_mean", "clip_fraction", "wall_time")


@dataclass
class StageResult:
    stage: int
    length: int
    rows: List[dict]
    passed: bool
    diverged: bool
    epochs: int
    metric: float
    baseline: float


@dataclass
class TrainReport:
    rows: List[dict]
    stages: List[StageResult]
    completed: bool
    diverged: bool

    @property
    def final_length(self) -> int:
        return self.stages[-1].length if self.stages else 0

    @property
    def max_length_passed(self) -> int:
        passed = [s.length for s in self.stages if s.passed]
        return max(passed) if passed else 0

    def metrics(self) -> dict:
        """Deterministic summary (no wall times)."""
        return {
            "completed": self.completed,
            "diverged": self.diverged,
            "stages_run": len(self.stages),
            "max_length_passed": self.max_length_passed,
            "final_length": self.final_length,
            "final_metric": self.stages[-1].metric if self.stages else float("nan"),
            "stage_metrics": [s.metric for s in self.stages],
            "stage_epochs": [s.epochs for s in self.stages],
            "stage_baselines": [s.baseline for s in self.stages],
        }


def evaluate(model: SequenceModel, problem, data: Dataset, batch_size: int = 500) -> float:
    """Metric over ``data`` pooled across evaluation chunks."""
    n = data.size
    if problem.metric == "mse":
        sq = 0.0
        for k in range(0, n, batch_size):
            b = data.take(np.arange(k, min(n, k + batch_size)))
            out, _ = model.forward(b.x)
            sq += float(np.sum((out[:, 0] - b.target) ** 2))
        return sq / n
    hits = 0.0
    total = 0.0
    for k in range(0, n, batch_size):
        b = data.take(np.arange(k, min(n, k + batch_size)))
        out, _ = model.forward(b.x)
        hits += float(((np.argmax(out, axis=-1) == b.target) * b.mask).sum())
        total += float(b.mask.sum())
    return hits / total


def train_stage(model: SequenceModel, problem, length: int, optimizer: Optimizer,
                curriculum: CurriculumConfig, seed: int, stage: int) -> StageResult:
    """Train on fresh data at ``length`` until the advance rule fires or epochs run out."""
    train = problem.generate(length, curriculum.train_samples_per_stage,
                             seeded_rng(seed, STREAM_TASK, stage, 0))
    test = problem.generate(length, curriculum.test_samples_per_stage,
                            seeded_rng(seed, STREAM_TASK, stage, 1))
    shuffle = seeded_rng(seed, STREAM_SHUFFLE, stage)
    baseline = problem.baseline(test)
    params = model.parameters()
    bs = curriculum.batch_size
    n = train.size
    n_batches = math.ceil(n / bs)
    checkpoints = sorted({math.ceil(n_batches * (j + 1) / curriculum.evals_per_epoch)
                          for j in range(curriculum.evals_per_epoch)})
    rows: List[dict] = []
    t0 = time.perf_counter()
    metric = float("nan")
    for epoch in range(1, curriculum.max_epochs_per_stage + 1):
        order = shuffle.permutation(n)
        losses: List[float] = []
        scales: List[float] = []
        for bi in range(n_batches):
            batch = train.take(order[bi * bs:(bi + 1) * bs])
            out, cache = model.forward(batch.x)
            loss, d_out = problem.loss_grad(out, batch)
            if not math.isfinite(loss):
                rows.append(_row(stage, length, epoch, loss, float("nan"), baseline, False,
                                 scales, t0))
                return StageResult(stage, length, rows, False, True, epoch, float("nan"), baseline)
            losses.append(loss)
            scales.append(optimizer.step(params, model.backward(cache, d_out)))
            if bi + 1 in checkpoints:
                metric = evaluate(model, problem, test)
                passed = curriculum.passes(metric)
                last = bi + 1 == n_batches
                if passed or last:
                    frac = epoch - 1 + (bi + 1) / n_batches
                    rows.append(_row(stage, length, round(frac, 6), math.fsum(losses) / len(losses),
                                     metric, baseline, passed, scales, t0))
                if passed:
                    return StageResult(stage, length, rows, True, False, epoch, metric, baseline)
    return StageResult(stage, length, rows, False, False, curriculum.max_epochs_per_stage,
                       metric, baseline)


def _row(stage, length, epoch, loss, metric, baseline, advanced, scales, t0) -> dict:
    sc = np.asarray(scales) if scales else np.ones(1)
    return {"stage": stage, "length": length, "epoch": epoch, "train_loss": loss,
            "test_metric": metric, "baseline": baseline, "advanced": int(advanced),
            "clip_mean": float(np.mean(sc)), "clip_fraction": float(np.mean(sc < 1.0)),
            "wall_time": round(time.perf_counter() - t0, 3)}


def curriculum_run(model: SequenceModel, problem, curriculum: CurriculumConfig,
                   optimizer: OptimizerConfig, seed: int,
                   on_stage_end: Optional[Callable[[StageResult, SequenceModel], None]] = None,
                   max_stages: Optional[int] = None) -> TrainReport:
    """Run stages in order; stop after the last length or at the first failed stage."""
    opt = Optimizer(optimizer)
    stages: List[StageResult] = []
    rows: List[dict] = []
    lengths = curriculum.lengths()
    if max_stages is not None:
        lengths = lengths[:max_stages]
    for stage, length in enumerate(lengths):
        result = train_stage(model, problem, length, opt, curriculum, seed, stage)
        stages.append(result)
        rows.extend(result.rows)
        if on_stage_end is not None:
            on_stage_end(result, model)
        if not result.passed:
            break
    completed = bool(stages) and stages[-1].passed and stages[-1].length == curriculum.max_length
    diverged = any(s.diverged for s in stages)
    return TrainReport(rows, stages, completed, diverged)


def raise_if_diverged(report: TrainReport) -> None:
    if report.diverged:
        bad = next(s for s in report.stages if s.diverged)
        raise DivergenceError(f"non-finite loss at stage {bad.stage} (length {bad.length})")
