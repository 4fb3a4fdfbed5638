"""Deterministic little neural-network engine (dense, causal conv, Adam)."""

from . import autodiff
from .autodiff import Tensor, collect_grads
from .checkpoint import CheckpointError, load_layers, save_layers
from .layers import (
    DenseLayer,
    DimensionError,
    TcnLayer,
    dense_forward,
    kl_diag_gaussian,
    mse,
    tcn_forward,
    tcn_layer_sequence,
)
from .optim import Adam, AdamState, adam_step

__all__ = [
    "Adam",
    "AdamState",
    "CheckpointError",
    "DenseLayer",
    "DimensionError",
    "Tensor",
    "TcnLayer",
    "adam_step",
    "autodiff",
    "collect_grads",
    "dense_forward",
    "kl_diag_gaussian",
    "load_layers",
    "mse",
    "save_layers",
    "tcn_forward",
    "tcn_layer_sequence",
]
