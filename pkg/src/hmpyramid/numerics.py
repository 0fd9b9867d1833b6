"""Deterministic randomness and the small numeric primitives everything else
shares.

Random streams are Philox 4x64 counter-based generators keyed directly with
``(seed, stream_id)``.  Identical keys give bit-identical sequences on every
platform, and distinct stream ids give independent streams with no
coordination between workers.  Drawing a vector of n uniforms consumes
exactly the same draws as n scalar draws, so vectorized and per-unit sampling
are interchangeable.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import DimensionError

__all__ = [
    "RngStream",
    "make_rng",
    "derive_seed",
    "sigmoid",
    "bernoulli",
    "euclidean",
]

_MASK64 = (1 << 64) - 1


class RngStream:
    """A named deterministic random stream.

    Thin wrapper over ``numpy.random.Generator`` backed by Philox keyed with
    ``(seed, stream_id)``.  The identity fields are kept so reports can echo
    which stream produced a result.  Not shared across concurrent tasks; each
    work unit builds its own stream from its own ids.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __getattr__(self, name):
        if name.startswith("_"):
            raise AttributeError(name)
        return getattr(self._gen, name)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def make_rng(seed: int, stream_id: int = 0) -> RngStream:
    """Create the deterministic stream identified by ``(seed, stream_id)``."""
    return RngStream(seed, stream_id)


def _splitmix(x: int) -> int:
    # splitmix64 finalizer: a cheap, well-mixed 64-bit permutation
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, *ids: int) -> int:
    """Derive a child seed from a root seed and a path of integer ids.

    Used to give every work unit (condition index, machine index, ...) its
    own 64-bit seed so parallel and serial execution consume identical
    randomness.  The empty path returns a mixed form of the root itself.
    """
    x = _splitmix(int(seed) & _MASK64)
    for i in ids:
        x = _splitmix(x ^ (int(i) & _MASK64))
    return x


def sigmoid(x):
    """Logistic function 1 / (1 + exp(-x)), elementwise.

    Saturates gracefully for large |x| instead of overflowing.  Input must be
    finite.
    """
    return expit(x)


def bernoulli(p, rng: RngStream):
    """Sample Bernoulli variables with success probabilities ``p``.

    Scalar p gives an int in {0, 1}; an array gives a float64 0/1 array of
    the same shape.  Consumes exactly one uniform draw per element, in C
    order, so results match a per-element scalar loop bit for bit.
    """
    arr = np.asarray(p, dtype=np.float64)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError("bernoulli probabilities must lie in [0, 1]")
    if arr.ndim == 0:
        return int(rng.random() < float(arr))
    return (rng.random(arr.shape) < arr).astype(np.float64)


def euclidean(a, b) -> float:
    """Euclidean distance between two equal-length vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(
            f"euclidean needs equal shapes, got {a.shape} and {b.shape}"
        )
    return float(np.linalg.norm(a - b))
