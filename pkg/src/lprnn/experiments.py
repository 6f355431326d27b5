"""Experiment runners behind ``lprnn run``.

Each runner takes a resolved ``ExperimentConfig`` and returns a ``RunResult``:
deterministic metrics, CSV tables and objects to checkpoint. File I/O is left
to the caller.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import _backend
from .analysis import eigen_table, planted_spectrum, shifted_jacobian
from .cells import LpRnnParams, gradient_check
from .checkpoint import load_checkpoint
from .config import ExperimentConfig
from .errors import ConfigError
from .esn import EsnParams, esn_init, esn_states, readout, sign_accuracy, train_readout
from .numerics import STREAM_TASK, seeded_rng, spectral_radius
from .snn import (DsNeuronConfig, highband_residual_check, map_to_snn, simulate_snn,
                  spike_count_report)
from .tasks import gen_esn_pattern
from .training import (OptimizerConfig, SequenceModel, TrainReport, curriculum_run, make_problem)


@dataclass
class Table:
    fields: Sequence[str]
    rows: List[dict]


@dataclass
class RunResult:
    metrics: dict
    tables: Dict[str, Table] = field(default_factory=dict)
    checkpoints: Dict[str, tuple] = field(default_factory=dict)     # name -> (object, meta)
    timing: dict = field(default_factory=dict)
    diverged: bool = False


CheckpointHook = Callable[[str, object, dict], None]


# ---------------------------------------------------------------------------
# curricula

def _problem(cfg: ExperimentConfig):
    t = cfg.task
    if cfg.experiment == "addition":
        return make_problem("addition", marker_count=t.marker_count)
    return make_problem("copy", k=t.k, s_max=t.s_max)


def _run_curriculum(cfg: ExperimentConfig, model_cfg, tag: str, max_stages: Optional[int],
                    hook: Optional[CheckpointHook]) -> TrainReport:
    problem = _problem(cfg)
    model = SequenceModel.build(model_cfg, problem.n_input, problem.n_output, problem.output,
                                cfg.seed)
    optimizer = cfg.optimizer
    if tag == "control":
        # the control keeps the protocol but gets the defaults of its own cell kind
        optimizer = OptimizerConfig.for_cell(model_cfg.cell, kind=cfg.optimizer.kind)

    def on_stage_end(result, m):
        # non-finite weights are not worth keeping and cannot be written as strict JSON
        if hook is not None and not result.diverged:
            meta = {"stage": result.stage, "length": result.length, "passed": result.passed,
                    "metric": result.metric, "seed": cfg.seed, "model": tag}
            hook(f"{tag}_stage{result.stage:02d}", m, meta)

    return curriculum_run(model, problem, cfg.curriculum, optimizer, cfg.seed, on_stage_end,
                          max_stages)


def run_curriculum_experiment(cfg: ExperimentConfig, max_stages: Optional[int] = None,
                              hook: Optional[CheckpointHook] = None) -> RunResult:
    t0 = time.perf_counter()
    runs = [("main", cfg.model)]
    if cfg.control is not None:
        runs.append(("control", cfg.control))
    metrics: dict = {"lengths": cfg.curriculum.lengths()}
    rows: List[dict] = []
    timing = {}
    diverged = False
    for tag, model_cfg in runs:
        t1 = time.perf_counter()
        report = _run_curriculum(cfg, model_cfg, tag, max_stages, hook)
        timing[tag] = round(time.perf_counter() - t1, 3)
        m = report.metrics()
        m["cell"] = model_cfg.cell
        m["clip_norm"] = (cfg.optimizer.clip_norm if tag == "main"
                          else OptimizerConfig.for_cell(model_cfg.cell).clip_norm)
        metrics[tag] = m
        rows.extend(dict(r, model=tag) for r in report.rows)
        diverged = diverged or (tag == "main" and report.diverged)
    timing["total"] = round(time.perf_counter() - t0, 3)
    fields = ("model",) + tuple(k for k in rows[0] if k != "model") if rows else ("model",)
    return RunResult(metrics, {"metrics": Table(fields, rows)}, timing=timing, diverged=diverged)


# ---------------------------------------------------------------------------
# echo-state network and spiking mapping

@dataclass
class EsnDemo:
    params: EsnParams
    x: np.ndarray
    labels: np.ndarray
    states: np.ndarray
    output: np.ndarray
    washout: int


def build_esn_demo(cfg: ExperimentConfig, params: Optional[EsnParams] = None) -> EsnDemo:
    """Reservoir, pattern signal, analogue states and a trained readout."""
    e = cfg.esn
    if params is None:
        params = esn_init(e.hidden, 1, e.rho_target, e.alpha.build(), cfg.seed, e.input_scale,
                          e.bias_scale, e.activation)
    sig = gen_esn_pattern(e.n_steps, seeded_rng(cfg.seed, STREAM_TASK))
    x = sig.x[:, None]
    states = esn_states(params, x)
    w = e.washout
    if not np.any(params.w_out):
        train_readout(params, states[w:], sig.label_trace[w:], e.readout, e.ridge_lambda,
                      OptimizerConfig(learning_rate=e.readout_learning_rate), e.readout_epochs,
                      cfg.seed)
    return EsnDemo(params, x, sig.label_trace, states, readout(params, states)[:, 0], w)


def echo_state_gap(params: EsnParams, x: np.ndarray, seed: int) -> np.ndarray:
    """``||y_a - y_b||`` per step for two random initial states driven by the same input."""
    rng = seeded_rng(seed, 9)
    ya = esn_states(params, x, rng.uniform(-1, 1, params.hidden))
    yb = esn_states(params, x, rng.uniform(-1, 1, params.hidden))
    return np.linalg.norm(ya - yb, axis=1)


def run_esn_pattern(cfg: ExperimentConfig, hook: Optional[CheckpointHook] = None) -> RunResult:
    t0 = time.perf_counter()
    demo = build_esn_demo(cfg)
    w = demo.washout
    gap = echo_state_gap(demo.params, demo.x, cfg.seed)
    below = np.flatnonzero(gap < 1e-6)
    metrics = {
        "sign_accuracy": sign_accuracy(demo.output[w:], demo.labels[w:]),
        "readout_mse": float(np.mean((demo.output[w:] - demo.labels[w:]) ** 2)),
        "spectral_radius": spectral_radius(demo.params.w_rec),
        "echo_gap_final": float(gap[-1]),
        "echo_steps_to_1e-6": int(below[0]) + 1 if below.size else -1,
        "reservoir_checksum": demo.params.reservoir_checksum(),
    }
    rows = [{"t": t, "x": float(demo.x[t, 0]), "label": float(demo.labels[t]),
             "output": float(demo.output[t])} for t in range(demo.x.shape[0])]
    if hook is not None:
        hook("esn", demo.params, {"seed": cfg.seed})
    return RunResult(metrics, {"metrics": Table(("t", "x", "label", "output"), rows)},
                     checkpoints={}, timing={"total": round(time.perf_counter() - t0, 3)})


@dataclass
class SnnComparison:
    theta: float
    state_nmse: float
    state_nmse_smoothed: float
    readout_nmse: float
    readout_nmse_smoothed: float
    spikes_per_step: float
    max_excess: float
    decoded_readout: np.ndarray


def compare_snn(demo: EsnDemo, theta: float, oversampling: int, bipolar: bool, hold: bool,
                alpha_smooth: float) -> SnnComparison:
    net = map_to_snn(demo.params, DsNeuronConfig(theta=theta, oversampling=oversampling,
                                                 bipolar=bipolar), hold=hold)
    run = simulate_snn(net, demo.x, check_bounds=False)
    w = demo.washout
    ref_s, dec_s = demo.states[w:], run.decoded[w:]
    ref_o = demo.output[w:]
    dec_o = readout(demo.params, run.decoded)[:, 0]
    s_raw, s_sm = highband_residual_check(ref_s, dec_s, alpha_smooth)
    o_raw, o_sm = highband_residual_check(ref_o, dec_o[w:], alpha_smooth)
    return SnnComparison(theta, s_raw, s_sm, o_raw, o_sm, spike_count_report(run).spikes_per_step,
                         run.max_excess, dec_o)


def as_esn(obj) -> EsnParams:
    """Accept an ESN or a single-input lpRNN (which gets a readout trained on the demo)."""
    if isinstance(obj, EsnParams):
        return obj
    if isinstance(obj, LpRnnParams):
        if obj.n_input != 1:
            raise ConfigError("the spiking demo drives a single-input network")
        return EsnParams(obj.w_in, obj.w_rec, obj.b, obj.alpha, np.zeros((1, obj.hidden)),
                         np.zeros(1), obj.activation)
    raise ConfigError(f"cannot map a {type(obj).__name__} checkpoint to a spiking network")


def run_map_snn(cfg: ExperimentConfig, params: Optional[EsnParams] = None,
                hook: Optional[CheckpointHook] = None) -> RunResult:
    t0 = time.perf_counter()
    s = cfg.snn
    demo = build_esn_demo(cfg, params)
    thetas = list(dict.fromkeys(list(s.thetas) + [s.theta]))
    sweep = {th: compare_snn(demo, th, s.oversampling, s.bipolar, s.hold, s.alpha_smooth)
             for th in thetas}
    main = sweep[s.theta]
    ordered = sorted(s.thetas, reverse=True)
    metrics = {
        "theta": s.theta,
        "nmse": main.readout_nmse,
        "nmse_smoothed": main.readout_nmse_smoothed,
        "state_nmse": main.state_nmse,
        "state_nmse_smoothed": main.state_nmse_smoothed,
        "spikes_per_step": main.spikes_per_step,
        "max_integrator_excess": max(c.max_excess for c in sweep.values()),
        "sign_accuracy": sign_accuracy(demo.output[demo.washout:], demo.labels[demo.washout:]),
        "sweep": [{"theta": th, "state_nmse": sweep[th].state_nmse,
                   "readout_nmse": sweep[th].readout_nmse,
                   "state_nmse_smoothed": sweep[th].state_nmse_smoothed,
                   "readout_nmse_smoothed": sweep[th].readout_nmse_smoothed,
                   "spikes_per_step": sweep[th].spikes_per_step} for th in ordered],
    }
    rows = [{"t": t, "reference": float(demo.output[t]),
             "decoded": float(main.decoded_readout[t])} for t in range(demo.x.shape[0])]
    sweep_rows = metrics["sweep"]
    if hook is not None:
        hook("esn", demo.params, {"seed": cfg.seed})
    return RunResult(metrics, {"metrics": Table(("t", "reference", "decoded"), rows),
                               "sweep": Table(tuple(sweep_rows[0]), sweep_rows)},
                     timing={"total": round(time.perf_counter() - t0, 3)})


# ---------------------------------------------------------------------------
# analysis and gradient checks

def run_analyze_eigen(cfg: ExperimentConfig) -> RunResult:
    t0 = time.perf_counter()
    e = cfg.eigen
    rows = []
    worst = 0.0
    worst_bound = -math.inf
    for seed in range(cfg.seed, cfg.seed + e.seeds):
        for r in eigen_table(e.size, seed, e.alphas):
            rows.append({"seed": seed, "lambda": r.lam, "alpha": r.alpha,
                         "shifted": r.shifted, "residual": r.residual})
            worst = max(worst, r.residual)
        w = planted_spectrum(e.size, seed).w
        rho = spectral_radius(w)
        for a in e.alphas:
            rho_shift = float(np.max(np.abs(np.linalg.eigvals(shifted_jacobian(w, a)))))
            worst_bound = max(worst_bound, rho_shift - ((1 - a) * rho + a))
    metrics = {"max_residual": worst, "max_bound_excess": worst_bound, "rows": len(rows)}
    return RunResult(metrics, {"metrics": Table(("seed", "lambda", "alpha", "shifted", "residual"),
                                                rows)},
                     timing={"total": round(time.perf_counter() - t0, 3)})


GRADCHECK_SIZES = {
    "simple_rnn": {"hidden": 8, "length": 12},
    "lprnn": {"hidden": 8, "length": 12},
    "lstm": {"hidden": 6, "length": 10},
    "lplstm": {"hidden": 6, "length": 10},
    "dense_softmax": {"hidden": 8, "length": 12},
}


def run_gradcheck(cfg: ExperimentConfig) -> RunResult:
    t0 = time.perf_counter()
    g = cfg.gradcheck
    rows = []
    for kind in g.kinds:
        err = gradient_check(kind, GRADCHECK_SIZES[kind], cfg.seed, g.epsilon)
        rows.append({"kind": kind, "max_relative_error": err, "pass": int(err <= g.tolerance)})
    worst = max(r["max_relative_error"] for r in rows)
    metrics = {"max_relative_error": worst, "tolerance": g.tolerance,
               "passed": bool(worst <= g.tolerance),
               "per_kind": {r["kind"]: r["max_relative_error"] for r in rows}}
    return RunResult(metrics, {"metrics": Table(("kind", "max_relative_error", "pass"), rows)},
                     timing={"total": round(time.perf_counter() - t0, 3)})


def run_experiment(cfg: ExperimentConfig, max_stages: Optional[int] = None,
                   hook: Optional[CheckpointHook] = None) -> RunResult:
    if cfg.experiment in ("addition", "copy"):
        result = run_curriculum_experiment(cfg, max_stages, hook)
    elif cfg.experiment == "esn-pattern":
        result = run_esn_pattern(cfg, hook)
    elif cfg.experiment == "map-snn":
        params = None
        if cfg.snn.checkpoint:
            params = as_esn(load_checkpoint(cfg.snn.checkpoint)[0])
        result = run_map_snn(cfg, params, hook)
    elif cfg.experiment == "analyze-eigen":
        result = run_analyze_eigen(cfg)
    else:
        result = run_gradcheck(cfg)
    result.metrics["backend"] = _backend.NAME
    return result
