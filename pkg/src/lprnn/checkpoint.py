"""Versioned JSON checkpoints.

Layout::

    {"format": "lprnn-checkpoint", "version": 1, "kind": <object kind>,
     "meta": {...}, "attrs": {...},
     "arrays": {name: {"shape": [...], "data": [...]}}}

Floats are written with ``repr`` precision, so arrays reload bit-identically.
"""
from __future__ import annotations

import json
import os
from typing import Any, Dict, Tuple

import numpy as np

from .cells import DenseParams, LpLstmParams, LpRnnParams
from .errors import CheckpointError
from .esn import EsnParams
from .training import SequenceModel

FORMAT = "lprnn-checkpoint"
VERSION = 1


def _encode_array(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.reshape(-1).tolist()}


def _decode_array(d: dict) -> np.ndarray:
    try:
        return np.asarray(d["data"], dtype=np.float64).reshape(d["shape"])
    except (KeyError, ValueError, TypeError) as exc:
        raise CheckpointError(f"malformed array entry: {exc}") from exc


def _parts(obj) -> Tuple[str, Dict[str, np.ndarray], Dict[str, Any]]:
    if isinstance(obj, SequenceModel):
        kind, arrays, attrs = _parts(obj.cell)
        arrays = {f"cell.{k}": v for k, v in arrays.items()}
        arrays.update({"readout.w": obj.readout.w, "readout.b": obj.readout.b})
        attrs = dict(attrs, cell_kind=obj.cell_kind, cell_type=kind, output=obj.output)
        return "sequence_model", arrays, attrs
    if isinstance(obj, LpRnnParams):
        arrays = {"w_in": obj.w_in, "w_rec": obj.w_rec, "b": obj.b, "alpha": obj.alpha}
        if obj.alpha_logit is not None:
            arrays["alpha_logit"] = obj.alpha_logit
        return "lprnn", arrays, {"activation": obj.activation}
    if isinstance(obj, LpLstmParams):
        arrays = {n: getattr(obj, n) for n in LpLstmParams._array_names()}
        if obj.alpha_logit is not None:
            arrays["alpha_logit"] = obj.alpha_logit
        return "lplstm", arrays, {"state_activation": obj.state_activation,
                                  "output_activation": obj.output_activation}
    if isinstance(obj, EsnParams):
        arrays = {n: getattr(obj, n) for n in ("w_in", "w_rec", "b", "alpha", "w_out", "b_out")}
        return "esn", arrays, {"activation": obj.activation, "rho_target": obj.rho_target}
    if isinstance(obj, DenseParams):
        return "dense", {"w": obj.w, "b": obj.b}, {}
    raise CheckpointError(f"cannot checkpoint {type(obj).__name__}")


def _build(kind: str, arrays: Dict[str, np.ndarray], attrs: Dict[str, Any]):
    try:
        if kind == "lprnn":
            return LpRnnParams(arrays["w_in"], arrays["w_rec"], arrays["b"], arrays["alpha"],
                               attrs["activation"], arrays.get("alpha_logit"))
        if kind == "lplstm":
            kw = {n: arrays[n] for n in LpLstmParams._array_names()}
            return LpLstmParams(**kw, state_activation=attrs["state_activation"],
                                output_activation=attrs["output_activation"],
                                alpha_logit=arrays.get("alpha_logit"))
        if kind == "esn":
            return EsnParams(*(arrays[n] for n in ("w_in", "w_rec", "b", "alpha", "w_out", "b_out")),
                             activation=attrs["activation"], rho_target=attrs["rho_target"])
        if kind == "dense":
            return DenseParams(arrays["w"], arrays["b"])
        if kind == "sequence_model":
            cell_arrays = {k[5:]: v for k, v in arrays.items() if k.startswith("cell.")}
            cell = _build(attrs["cell_type"], cell_arrays, attrs)
            readout = DenseParams(arrays["readout.w"], arrays["readout.b"])
            return SequenceModel(attrs["cell_kind"], cell, readout, attrs["output"])
    except KeyError as exc:
        raise CheckpointError(f"checkpoint of kind {kind!r} lacks {exc}") from exc
    raise CheckpointError(f"unknown checkpoint kind {kind!r}")


def to_dict(obj, meta: Dict[str, Any] | None = None) -> dict:
    kind, arrays, attrs = _parts(obj)
    return {"format": FORMAT, "version": VERSION, "kind": kind, "meta": dict(meta or {}),
            "attrs": attrs, "arrays": {k: _encode_array(v) for k, v in arrays.items()}}


def from_dict(doc: dict):
    """Returns ``(object, meta)``."""
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise CheckpointError("not an lprnn checkpoint")
    if doc.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')!r}")
    arrays = {k: _decode_array(v) for k, v in doc.get("arrays", {}).items()}
    return _build(doc.get("kind"), arrays, doc.get("attrs", {})), doc.get("meta", {})


def save_checkpoint(path: str | os.PathLike, obj, meta: Dict[str, Any] | None = None) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(to_dict(obj, meta), fh, separators=(",", ":"), allow_nan=False)
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike):
    """Returns ``(object, meta)``."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: invalid JSON ({exc})") from exc
    return from_dict(doc)
