"""Deterministic random numbers for every stochastic component.

All randomness flows through `Rng`, a thin wrapper around numpy's PCG64
generator.  The algorithm is fixed so that a given 64-bit seed always yields
the same stream, and named child streams are derived by hashing the parent
seed with a label, which keeps independent pipeline stages reproducible no
matter how many draws the others consume.
"""

from __future__ import annotations

import hashlib

import numpy as np


class Rng:
    """Seeded PCG64 stream with stable named substreams."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, label: str) -> "Rng":
        """Independent stream derived from (seed, label); order-insensitive."""
        digest = hashlib.sha256(
            self.seed.to_bytes(8, "little") + label.encode("utf-8")
        ).digest()
        return Rng(int.from_bytes(digest[:8], "little"))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def loguniform(self, low, high, size=None):
        return np.exp(self._gen.uniform(np.log(low), np.log(high), size))

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)
