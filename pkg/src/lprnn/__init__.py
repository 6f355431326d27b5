"""Low-pass recurrent networks with exact BPTT, curriculum training and delta-sigma spiking maps."""
from . import _backend
from .cells import (AlphaConfig, LpLstmParams, LpRnnParams, gradient_check, init_lplstm,
                    init_lprnn, lplstm_backward, lplstm_forward, lprnn_backward, lprnn_forward)
from .errors import LpRnnError

__version__ = "0.1.0"
BACKEND = _backend.NAME

__all__ = [
    "AlphaConfig", "LpLstmParams", "LpRnnParams", "LpRnnError", "gradient_check", "init_lplstm",
    "init_lprnn", "lplstm_backward", "lplstm_forward", "lprnn_backward", "lprnn_forward",
    "BACKEND", "__version__",
]
