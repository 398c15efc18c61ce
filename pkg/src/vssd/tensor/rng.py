"""Deterministic counter-mode PRNG.

Algorithm: splitmix64 run in counter mode.  Output word i of a stream seeded
with s is mix(s + (i+1) * 0x9E3779B97F4A7C15) where mix is the standard
splitmix64 finalizer (xor-shift / multiply).  Counter mode makes the stream
independent of how draws are batched, so identical seeds give identical value
streams on every platform.  Normal variates use Box-Muller.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)

ALGORITHM = "splitmix64-counter"


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * MIX1
    z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Seeded deterministic random stream."""

    algorithm = ALGORITHM

    def __init__(self, seed):
        self.seed = np.uint64(seed)
        self.counter = 0

    def raw(self, n):
        """Next n raw 64-bit words."""
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix(self.seed + idx * GOLDEN)

    def uniform(self, shape=(), dtype=np.float64):
        """Uniforms in [0, 1) with 53-bit resolution."""
        n = int(np.prod(shape)) if shape else 1
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        out = u.reshape(shape).astype(dtype)
        return out if shape else out.item()

    def normal(self, shape=(), mean=0.0, std=1.0, dtype=np.float64):
        """Box-Muller normals."""
        n = int(np.prod(shape)) if shape else 1
        m = (n + 1) // 2
        # u1 in (0, 1] so log is finite
        u1 = ((self.raw(m) >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)
        u2 = (self.raw(m) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        out = (mean + std * z).reshape(shape).astype(dtype)
        return out if shape else out.item()

    def integers(self, low, high, shape=()):
        """Uniform integers in [low, high). Modulo bias is negligible for our ranges."""
        n = int(np.prod(shape)) if shape else 1
        span = np.uint64(high - low)
        vals = (self.raw(n) % span).astype(np.int64) + low
        out = vals.reshape(shape)
        return out if shape else int(out.item())

    def permutation(self, n):
        """Random permutation of 0..n-1 (argsort of raw keys)."""
        return np.argsort(self.raw(n), kind="stable")

    def spawn(self, tag):
        """Independent child stream derived from this seed and an integer tag."""
        with np.errstate(over="ignore"):
            child = _mix(self.seed + np.uint64(tag + 1) * MIX1)
        return Rng(child)
