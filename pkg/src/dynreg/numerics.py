"""Shared numeric plumbing: vector checks, norms, finite differences, RNG streams.

Everything downstream funnels through these helpers so that validation and
error classification happen in one place.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

__all__ = [
    "ConfigError",
    "DimensionError",
    "NumericError",
    "VerificationError",
    "as_vector",
    "l2_norm_sq",
    "elementwise_combine",
    "finite_difference_gradient",
    "RngStream",
    "spawn_rng_stream",
]


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or out of range."""


class DimensionError(ValueError):
    """Vector arguments have incompatible or invalid shapes."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite value."""


class VerificationError(Exception):
    """A verification run found violations."""


def as_vector(x, name: str = "x") -> np.ndarray:
    """Coerce to a finite 1-D float64 array; raise on anything else."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise NumericError(f"{name} has a non-finite entry at coordinate {bad}")
    return arr


def l2_norm_sq(v) -> float:
    """Squared Euclidean norm of a finite real vector."""
    arr = as_vector(v, "v")
    return float(np.dot(arr, arr))


def elementwise_combine(a, b, fn: Callable[[float, float], float]) -> np.ndarray:
    """Apply a binary real function coordinate-wise to two same-length vectors."""
    va = as_vector(a, "a")
    vb = as_vector(b, "b")
    if va.shape != vb.shape:
        raise DimensionError(
            f"operands must have equal length, got {va.size} and {vb.size}"
        )
    out = np.empty_like(va)
    for i in range(va.size):
        out[i] = float(fn(va[i], vb[i]))
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise NumericError(f"combination produced a non-finite value at coordinate {bad}")
    return out


def finite_difference_gradient(f, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient estimate of a scalar function.

    Coordinate i gets (f(x + h e_i) - f(x - h e_i)) / (2h).
    """
    if not (h > 0) or not math.isfinite(h):
        raise ConfigError(f"step size h must be a positive finite real, got {h}")
    base = as_vector(x, "x")
    grad = np.empty_like(base)
    probe = base.copy()
    for i in range(base.size):
        probe[i] = base[i] + h
        fp = float(f(probe))
        probe[i] = base[i] - h
        fm = float(f(probe))
        probe[i] = base[i]
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericError(
                f"function returned a non-finite value while probing coordinate {i}"
            )
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


_UINT64_SPAN = 1 << 64


class RngStream:
    """Deterministic random stream identified by (seed, stream_id).

    Wraps a counter-based Philox generator keyed by the pair, so streams with
    distinct ids are statistically independent and reproducible regardless of
    how many draws other streams have made.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int, stream_id: int):
        if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
            raise ConfigError(f"seed must be an integer, got {seed!r}")
        if not isinstance(stream_id, (int, np.integer)) or isinstance(stream_id, bool):
            raise ConfigError(f"stream_id must be an integer, got {stream_id!r}")
        if not (0 <= int(seed) < _UINT64_SPAN):
            raise ConfigError(f"seed must be in [0, 2^64), got {seed}")
        if not (0 <= int(stream_id) < _UINT64_SPAN):
            raise ConfigError(f"stream_id must be in [0, 2^64), got {stream_id}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = (self.seed << 64) | self.stream_id
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def standard_normal(self, size=None) -> np.ndarray | float:
        return self._gen.standard_normal(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def __repr__(self) -> str:  # pragma: no cover - debugging nicety
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def spawn_rng_stream(seed: int, stream_id: int) -> RngStream:
    """Create the deterministic stream for (seed, stream_id)."""
    return RngStream(seed, stream_id)
