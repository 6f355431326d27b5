"""Experiment configuration schema.

Configs are JSON objects validated with pydantic; unknown keys are rejected.
``resolve`` fills every omitted section with the defaults for the chosen
experiment so that the stored config fully determines a run.
"""
from __future__ import annotations

import json
import os
from typing import List, Literal, Optional

from pydantic import Field, ValidationError, model_validator

from .cells import CELL_KINDS
from .errors import ConfigError
from .training import (AlphaSection, CurriculumConfig, ModelConfig, OptimizerConfig, _Strict)

EXPERIMENTS = ("addition", "copy", "esn-pattern", "map-snn", "analyze-eigen", "gradcheck")


class TaskSection(_Strict):
    marker_count: int = Field(2, ge=2)
    k: int = Field(8, ge=2)
    s_max: int = Field(5, ge=1)


class EsnSection(_Strict):
    hidden: int = Field(50, ge=1)
    rho_target: float = Field(0.95, gt=0, le=1)
    input_scale: float = Field(1.0, gt=0)
    bias_scale: float = Field(0.5, ge=0)
    activation: Literal["tanh", "relu", "sigmoid", "identity"] = "tanh"
    alpha: AlphaSection = AlphaSection(tau_max=50.0)
    n_steps: int = Field(3000, ge=200)
    washout: int = Field(100, ge=0)
    readout: Literal["ridge", "sgd"] = "ridge"
    ridge_lambda: float = Field(1e-2, ge=0)
    readout_epochs: int = Field(1000, ge=1)
    readout_learning_rate: float = Field(0.05, gt=0)

    @model_validator(mode="after")
    def _washout_fits(self):
        if self.washout >= self.n_steps:
            raise ValueError("washout must be shorter than n_steps")
        return self


class SnnSection(_Strict):
    theta: float = Field(0.01, gt=0)
    thetas: List[float] = [0.1, 0.03, 0.01, 0.003]
    oversampling: int = Field(64, ge=1)
    bipolar: bool = True
    hold: bool = True
    alpha_smooth: float = Field(0.8, ge=0, lt=1)
    checkpoint: Optional[str] = None

    @model_validator(mode="after")
    def _positive(self):
        if not self.thetas or any(t <= 0 for t in self.thetas):
            raise ValueError("thetas must be a nonempty list of positive values")
        return self


class EigenSection(_Strict):
    size: int = Field(20, ge=1)
    seeds: int = Field(100, ge=1)
    alphas: List[float] = [0.0, 0.3, 0.6, 0.9, 1.0]

    @model_validator(mode="after")
    def _alpha_range(self):
        if any(not 0 <= a <= 1 for a in self.alphas):
            raise ValueError("alphas must lie in [0, 1]")
        return self


class GradcheckSection(_Strict):
    kinds: List[Literal["simple_rnn", "lprnn", "lstm", "lplstm", "dense_softmax"]] = list(CELL_KINDS)
    epsilon: float = Field(1e-5, gt=0, le=1e-3)
    tolerance: float = Field(1e-6, gt=0)


class ExperimentConfig(_Strict):
    experiment: Literal["addition", "copy", "esn-pattern", "map-snn", "analyze-eigen", "gradcheck"]
    seed: int = Field(0, ge=0)
    output_dir: Optional[str] = None
    model: Optional[ModelConfig] = None
    control: Optional[ModelConfig] = None
    optimizer: Optional[OptimizerConfig] = None
    curriculum: Optional[CurriculumConfig] = None
    task: Optional[TaskSection] = None
    esn: Optional[EsnSection] = None
    snn: Optional[SnnSection] = None
    eigen: Optional[EigenSection] = None
    gradcheck: Optional[GradcheckSection] = None


def default_curriculum(experiment: str) -> CurriculumConfig:
    if experiment == "copy":
        return CurriculumConfig(initial_length=3, max_length=50,
                                advance_metric="categorical_accuracy", advance_threshold=0.99)
    return CurriculumConfig()


def default_model(experiment: str) -> ModelConfig:
    if experiment == "copy":
        return ModelConfig(cell="lplstm", hidden=64)
    return ModelConfig(cell="lprnn", hidden=128)


def resolve(cfg: ExperimentConfig) -> ExperimentConfig:
    """Materialise every default relevant to ``cfg.experiment``."""
    upd = {}
    exp = cfg.experiment
    if exp in ("addition", "copy"):
        model = cfg.model or default_model(exp)
        if model.activation is None:
            model = model.model_copy(update={"activation": model.resolved_activation()})
        upd["model"] = model
        upd["optimizer"] = cfg.optimizer or OptimizerConfig.for_cell(model.cell)
        upd["curriculum"] = cfg.curriculum or default_curriculum(exp)
        upd["task"] = cfg.task or TaskSection()
        if cfg.control is not None and cfg.control.activation is None:
            upd["control"] = cfg.control.model_copy(
                update={"activation": cfg.control.resolved_activation()})
    if exp in ("esn-pattern", "map-snn"):
        upd["esn"] = cfg.esn or EsnSection()
    if exp == "map-snn":
        upd["snn"] = cfg.snn or SnnSection()
    if exp == "analyze-eigen":
        upd["eigen"] = cfg.eigen or EigenSection()
    if exp == "gradcheck":
        upd["gradcheck"] = cfg.gradcheck or GradcheckSection()
    return cfg.model_copy(update=upd)


def parse_config(doc) -> ExperimentConfig:
    try:
        return resolve(ExperimentConfig.model_validate(doc))
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    """Read and validate a JSON config. ``OSError`` propagates for I/O failures."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc)


def dump_config(cfg: ExperimentConfig) -> dict:
    return cfg.model_dump(mode="json", exclude_none=True)
