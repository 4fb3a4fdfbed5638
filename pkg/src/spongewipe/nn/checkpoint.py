"""JSON checkpoint format for layer stacks.

A checkpoint is a single JSON document:

    {
      "schema_version": 1,
      "norm_stats_ref": "<path or null>",
      "layers": [
        {"kind": "dense", "activation": "relu", "shape": [out, in],
         "weights": [...flat row-major...], "bias": [...]},
        {"kind": "tcn", "dilation": 2, "shape": [out_ch, in_ch, kernel_len],
         "kernels": [...flat...], "bias": [...]}
      ],
      "extra": {...model-specific scalars...}
    }
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .layers import DenseLayer, TcnLayer

SCHEMA_VERSION = 1


class CheckpointError(ValueError):
    pass


def _layer_to_spec(layer):
    if isinstance(layer, DenseLayer):
        return {
            "kind": "dense",
            "activation": layer.activation,
            "shape": list(layer.weights.shape),
            "weights": layer.weights.data.ravel().tolist(),
            "bias": layer.bias.data.tolist(),
        }
    if isinstance(layer, TcnLayer):
        return {
            "kind": "tcn",
            "dilation": layer.dilation,
            "shape": list(layer.kernels.shape),
            "kernels": layer.kernels.data.ravel().tolist(),
            "bias": layer.bias.data.tolist(),
        }
    raise CheckpointError(f"cannot serialize layer type {type(layer).__name__}")


def _layer_from_spec(spec):
    kind = spec.get("kind")
    if kind == "dense":
        w = np.array(spec["weights"], dtype=np.float64).reshape(spec["shape"])
        b = np.array(spec["bias"], dtype=np.float64)
        return DenseLayer(Tensor(w, requires_grad=True),
                          Tensor(b, requires_grad=True), spec["activation"])
    if kind == "tcn":
        k = np.array(spec["kernels"], dtype=np.float64).reshape(spec["shape"])
        b = np.array(spec["bias"], dtype=np.float64)
        return TcnLayer(Tensor(k, requires_grad=True),
                        Tensor(b, requires_grad=True), spec["dilation"])
    raise CheckpointError(f"unknown layer kind {kind!r}")


def save_layers(path, layers, extra=None, norm_stats_ref=None):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "norm_stats_ref": norm_stats_ref,
        "layers": [_layer_to_spec(l) for l in layers],
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(doc))


def load_layers(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint schema {doc.get('schema_version')!r}"
        )
    layers = [_layer_from_spec(s) for s in doc["layers"]]
    return layers, doc.get("extra", {}), doc.get("norm_stats_ref")
