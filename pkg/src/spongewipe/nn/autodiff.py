"""Minimal reverse-mode autodiff over float64 numpy arrays.

Every op builds a node recording its parents and a closure that maps the
output gradient to parent gradients.  `Tensor.backward()` runs a topological
sort and accumulates.  Only the handful of ops needed by the dense / causal
1-D conv models lives here; everything is 64-bit and deterministic.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """Array node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(
            p.requires_grad for p in _parents
        )
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph traversal ----------------------------------------------------

    def backward(self, grad=None):
        if grad is None:
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=np.float64)
        topo, seen = [], set()

        def visit(node):
            if id(node) in seen:
                return
            seen.add(id(node))
            for p in node._parents:
                visit(p)
            topo.append(node)

        visit(self)
        for node in topo:
            node.grad = None
        self.grad = grad
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accum(self, g):
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad = self.grad + g

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad, shape):
    """Reduce `grad` back to `shape` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=bwd)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=bwd)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            a._accum(g @ b.data.T)
        if b.requires_grad:
            b._accum(a.data.T @ g)

    return Tensor(out_data, _parents=(a, b), _backward=bwd)


def transpose(a):
    a = as_tensor(a)

    def bwd(g):
        if a.requires_grad:
            a._accum(g.T)

    return Tensor(a.data.T, _parents=(a,), _backward=bwd)


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0

    def bwd(g):
        if a.requires_grad:
            a._accum(g * mask)

    return Tensor(a.data * mask, _parents=(a,), _backward=bwd)


def exp(a):
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def bwd(g):
        if a.requires_grad:
            a._accum(g * out_data)

    return Tensor(out_data, _parents=(a,), _backward=bwd)


def reshape(a, shape):
    a = as_tensor(a)
    old = a.data.shape

    def bwd(g):
        if a.requires_grad:
            a._accum(g.reshape(old))

    return Tensor(a.data.reshape(shape), _parents=(a,), _backward=bwd)


def tsum(a):
    a = as_tensor(a)

    def bwd(g):
        if a.requires_grad:
            a._accum(np.full(a.data.shape, g))

    return Tensor(a.data.sum(), _parents=(a,), _backward=bwd)


def tmean(a):
    a = as_tensor(a)
    n = a.data.size

    def bwd(g):
        if a.requires_grad:
            a._accum(np.full(a.data.shape, g / n))

    return Tensor(a.data.mean(), _parents=(a,), _backward=bwd)


def narrow(a, axis, start, length):
    """Contiguous slice [start, start+length) along `axis`."""
    a = as_tensor(a)
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def bwd(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[index] = g
            a._accum(full)

    return Tensor(a.data[index], _parents=(a,), _backward=bwd)


def concat(tensors, axis):
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(lo, hi)
                t._accum(g[tuple(index)])

    return Tensor(out_data, _parents=tuple(tensors), _backward=bwd)


def pad_rows(a, before, after):
    """Zero-pad a (..., T, C) tensor along its second-to-last axis."""
    a = as_tensor(a)
    widths = [(0, 0)] * a.data.ndim
    widths[-2] = (before, after)

    def bwd(g):
        if a.requires_grad:
            index = [slice(None)] * g.ndim
            index[-2] = slice(before, before + a.data.shape[-2])
            a._accum(g[tuple(index)])

    return Tensor(np.pad(a.data, widths), _parents=(a,), _backward=bwd)


def dropout(a, rate, rng):
    """Inverted dropout: scales kept units by 1/(1-rate) at train time."""
    a = as_tensor(a)
    if rate <= 0.0:
        return a
    keep = 1.0 - rate
    mask = (rng.uniform(size=a.data.shape) >= rate) / keep

    def bwd(g):
        if a.requires_grad:
            a._accum(g * mask)

    return Tensor(a.data * mask, _parents=(a,), _backward=bwd)


def collect_grads(params):
    """Gradient arrays for a parameter list after a backward pass."""
    return [
        p.grad if p.grad is not None else np.zeros_like(p.data) for p in params
    ]
