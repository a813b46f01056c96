"""Small dense kernels, stable nonlinearities and a portable PRNG.

Matrices and vectors are plain ``float64`` numpy arrays. The kernels here add
shape checking on top of numpy so that misuse fails loudly with a
:class:`~charrnn.errors.ContractError` instead of silently broadcasting.

The pseudo-random source is SplitMix64 (Steele, Lea & Flood, 2014). It is a
counter-based 64-bit generator: output ``k`` (0-based) of a stream seeded
with ``s`` is ``mix(s + (k + 1) * 0x9E3779B97F4A7C15 mod 2**64)``. Because the
definition only involves wrapping 64-bit integer arithmetic, the stream is
identical on every platform and numpy version.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError

__all__ = [
    "Rng",
    "matvec",
    "sigmoid",
    "softmax",
    "log_softmax",
    "rng_uniform_int",
]

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Return ``m @ v`` for a 2-D matrix and a 1-D vector."""
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or v.ndim != 1:
        raise ContractError(f"matvec expects (matrix, vector), got shapes {m.shape} and {v.shape}")
    if m.shape[1] != v.shape[0]:
        raise ContractError(f"matvec dimension mismatch: {m.shape[1]} columns vs vector of length {v.shape[0]}")
    return m @ v


def sigmoid(x: np.ndarray) -> np.ndarray:
    # branch-free stable form: never exponentiates a positive number
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax over the last axis, computed after subtracting the row max.

    Raises :class:`ContractError` on NaN or infinite input.
    """
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ContractError("softmax input must be finite")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


class Rng:
    """SplitMix64 stream.

    Not thread-safe; give each worker its own instance.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        return _mix(self.state)

    def next_u64_array(self, n: int) -> np.ndarray:
        """Draw ``n`` outputs at once; same values as ``n`` calls to :meth:`next_u64`."""
        if n < 0:
            raise ContractError("n must be non-negative")
        k = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + k * np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GAMMA) & _MASK
        return z

    def random(self, n: int | None = None):
        """Uniform doubles in ``[0, 1)`` built from the top 53 bits."""
        if n is None:
            return (self.next_u64() >> 11) * 2.0**-53
        return (self.next_u64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform(self, lo: float, hi: float, n: int) -> np.ndarray:
        return lo + (hi - lo) * self.random(n)

    def uniform_int(self, lo: int, hi: int) -> int:
        return rng_uniform_int(self, lo, hi)


def rng_uniform_int(rng: Rng, lo: int, hi: int) -> int:
    """Unbiased integer in ``[lo, hi]`` (both inclusive), by rejection sampling."""
    if lo > hi:
        raise ContractError(f"empty integer range [{lo}, {hi}]")
    n = hi - lo + 1
    if n == 1:
        return lo
    limit = (1 << 64) - ((1 << 64) % n)
    while True:
        x = rng.next_u64()
        if x < limit:
            return lo + x % n
