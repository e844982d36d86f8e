"""Seedable, portable pseudo-random streams.

Every stochastic component in the package draws from this generator so that
identical seeds reproduce identical bytes on any platform.  The core is
splitmix64: output word i of stream (seed, stream) is

    mix64(key + (i + 1) * GAMMA),   key = mix64(mix64(seed) ^ mix64(stream * STREAM_SALT))

with mix64 the splitmix64 finalizer.  Because each word is a pure function of
a counter, blocks of draws vectorize over numpy uint64 arrays.  Uniforms take
the top 53 bits; Gaussians use Box-Muller on consecutive uniform pairs.
See docs/rng.md for the exact construction and golden values.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidArgumentError

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_STREAM_SALT = 0xD2B74407B1CE6E93
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TWO53 = float(1 << 53)


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, tag: int) -> int:
    """Derive a child seed from (seed, tag); used to give sub-tasks disjoint streams."""
    return mix64(mix64(seed & _MASK) ^ mix64((tag * _STREAM_SALT) & _MASK))


def _mix64_array(z: np.ndarray) -> np.ndarray:
    m1 = np.uint64(_M1)
    m2 = np.uint64(_M2)
    z = (z ^ (z >> np.uint64(30))) * m1
    z = (z ^ (z >> np.uint64(27))) * m2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Counter-based splitmix64 stream of uniforms and Gaussians.

    Draws advance an internal counter; a block request of n words consumes
    exactly n counter positions (Gaussian requests round up to whole
    Box-Muller pairs).  Streams with distinct (seed, stream) pairs are
    independent for practical purposes.
    """

    def __init__(self, seed: int, stream: int = 0):
        self._key = derive_seed(seed, stream)
        self._counter = 0

    def _words(self, n: int) -> np.ndarray:
        base = np.uint64(self._key)
        gamma = np.uint64(_GAMMA)
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix64_array(base + idx * gamma)

    def uniforms(self, n: int) -> np.ndarray:
        """n float64 samples uniform on [0, 1)."""
        if n < 0:
            raise InvalidArgumentError("n must be >= 0")
        return (self._words(n) >> np.uint64(11)).astype(np.float64) / _TWO53

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * float(self.uniforms(1)[0])

    def normals(self, n: int) -> np.ndarray:
        """n standard-normal samples via Box-Muller on uniform pairs."""
        if n < 0:
            raise InvalidArgumentError("n must be >= 0")
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs)
        u1 = 1.0 - u[0::2]  # (0, 1]: keeps log finite
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def normal(self) -> float:
        return float(self.normals(1)[0])

    def integers(self, n: int, lo: int, hi: int) -> np.ndarray:
        """n ints uniform on [lo, hi) via floor(u * range); bias is negligible for range << 2^53."""
        if hi <= lo:
            raise InvalidArgumentError("empty integer range")
        return lo + np.floor(self.uniforms(n) * (hi - lo)).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n): argsort of n uniform keys."""
        return np.argsort(self.uniforms(n), kind="stable")
