"""Dense and causal temporal-convolution layers, plus the two losses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rng import Rng
from . import autodiff as ad
from .autodiff import Tensor


class DimensionError(ValueError):
    """Input shape incompatible with a layer or loss."""


def _he_init(rng: Rng, fan_in: int, shape) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)


@dataclass
class DenseLayer:
    """y = act(W x + b); weights are [out, in]."""

    weights: Tensor
    bias: Tensor
    activation: str = "none"  # "none" | "relu"

    @classmethod
    def create(cls, in_dim: int, out_dim: int, activation: str, rng: Rng):
        w = Tensor(_he_init(rng, in_dim, (out_dim, in_dim)), requires_grad=True)
        b = Tensor(np.zeros(out_dim), requires_grad=True)
        return cls(w, b, activation)

    @property
    def params(self):
        return [self.weights, self.bias]

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]


def dense_forward(x, layer: DenseLayer, dropout_rate=0.0, training=False,
                  rng: Rng | None = None):
    """Forward a (N, in) or (in,) input; dropout only applies in training."""
    x = ad.as_tensor(x)
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError(f"dropout_rate out of range: {dropout_rate}")
    vector_in = x.data.ndim == 1
    if vector_in:
        x = ad.reshape(x, (1, -1))
    if x.shape[-1] != layer.in_dim:
        raise DimensionError(
            f"dense input has {x.shape[-1]} features, layer expects {layer.in_dim}"
        )
    y = ad.add(ad.matmul(x, ad.transpose(layer.weights)), layer.bias)
    if layer.activation == "relu":
        y = ad.relu(y)
    elif layer.activation != "none":
        raise ValueError(f"unknown activation {layer.activation!r}")
    if training and dropout_rate > 0.0:
        if rng is None:
            raise ValueError("training dropout needs an Rng")
        y = ad.dropout(y, dropout_rate, rng)
    if vector_in:
        y = ad.reshape(y, (-1,))
    return y


@dataclass
class TcnLayer:
    """Causal dilated 1-D convolution; kernels are [out_ch, in_ch, kernel_len].

    Left zero-padding by (kernel_len - 1) * dilation keeps output step t a
    function of input steps <= t only.
    """

    kernels: Tensor
    bias: Tensor
    dilation: int = 1

    @classmethod
    def create(cls, in_ch: int, out_ch: int, kernel_len: int, dilation: int,
               rng: Rng):
        k = Tensor(
            _he_init(rng, in_ch * kernel_len, (out_ch, in_ch, kernel_len)),
            requires_grad=True,
        )
        b = Tensor(np.zeros(out_ch), requires_grad=True)
        return cls(k, b, dilation)

    @property
    def params(self):
        return [self.kernels, self.bias]

    @property
    def in_ch(self):
        return self.kernels.shape[1]

    @property
    def out_ch(self):
        return self.kernels.shape[0]

    @property
    def kernel_len(self):
        return self.kernels.shape[2]


def tcn_layer_sequence(x, layer: TcnLayer, dropout_rate=0.0, training=False,
                       rng: Rng | None = None):
    """Apply one causal conv layer to (..., T, in_ch), returning (..., T, out_ch)."""
    x = ad.as_tensor(x)
    if x.shape[-1] != layer.in_ch:
        raise DimensionError(
            f"tcn input has {x.shape[-1]} channels, layer expects {layer.in_ch}"
        )
    T = x.shape[-2]
    K, dil = layer.kernel_len, layer.dilation
    pad = (K - 1) * dil
    xp = ad.pad_rows(x, pad, 0)
    lead = x.shape[:-2]
    out = None
    for k in range(K):
        # tap k sees input step t - (K-1-k)*dil, i.e. offset k*dil into the pad
        sl = ad.narrow(xp, xp.data.ndim - 2, k * dil, T)
        flat = ad.reshape(sl, (-1, layer.in_ch))
        wk = ad.narrow(layer.kernels, 2, k, 1)
        wk = ad.reshape(wk, (layer.out_ch, layer.in_ch))
        contrib = ad.matmul(flat, ad.transpose(wk))
        out = contrib if out is None else ad.add(out, contrib)
    out = ad.add(out, layer.bias)
    out = ad.reshape(out, lead + (T, layer.out_ch))
    if training and dropout_rate > 0.0:
        if rng is None:
            raise ValueError("training dropout needs an Rng")
        out = ad.dropout(out, dropout_rate, rng)
    return out


def tcn_forward(window, layers, dropout_rate=0.0, training=False,
                rng: Rng | None = None):
    """Stack causal conv layers over (T, C_in) and return the final-step features."""
    h = ad.as_tensor(window)
    for layer in layers:
        h = tcn_layer_sequence(h, layer, dropout_rate, training, rng)
    T = h.shape[-2]
    last = ad.narrow(h, h.data.ndim - 2, T - 1, 1)
    return ad.reshape(last, h.shape[:-2] + (h.shape[-1],))


def mse(a, b):
    """Mean of squared elementwise differences."""
    a, b = ad.as_tensor(a), ad.as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"mse shapes differ: {a.shape} vs {b.shape}")
    d = ad.add(a, ad.mul(b, -1.0))
    return ad.tmean(ad.mul(d, d))


def kl_diag_gaussian(mu, logvar):
    """KL(N(mu, diag e^logvar) || N(0, I)), summed over all dimensions."""
    mu, logvar = ad.as_tensor(mu), ad.as_tensor(logvar)
    if mu.shape != logvar.shape:
        raise DimensionError(
            f"kl shapes differ: {mu.shape} vs {logvar.shape}"
        )
    if not (np.all(np.isfinite(mu.data)) and np.all(np.isfinite(logvar.data))):
        raise FloatingPointError("non-finite input to kl_diag_gaussian")
    term = ad.add(
        ad.add(ad.mul(mu, mu), ad.exp(logvar)),
        ad.add(ad.mul(logvar, -1.0), -1.0),
    )
    return ad.mul(ad.tsum(term), 0.5)
