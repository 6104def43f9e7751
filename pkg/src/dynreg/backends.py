"""Execution backend selection and array-level fast paths.

Hot loops (the run driver, window-weighted gradient sums, static window
re-evaluation) exist twice: compiled numba kernels and vectorized numpy
equivalents. The env var DYNREG_BACKEND picks one: 'numba', 'numpy', or
'auto' (default: numba when importable). Both backends consume identical
random draws, so results differ only by floating-point associativity.
"""

from __future__ import annotations

import math
import os

import numpy as np

from . import _kernels
from ._kernels import HAS_NUMBA
from .numerics import ConfigError, NumericError, spawn_rng_stream
from .optimizer import ADAM_SCHEDULE, alpha_weights, weight_sum_W

__all__ = [
    "ENV_BACKEND",
    "HAS_NUMBA",
    "available_backends",
    "active_backend",
    "resolve_backend",
    "run_stream_arrays",
    "weighted_window_norms",
    "static_window_norms_sine",
]

ENV_BACKEND = "DYNREG_BACKEND"

# rounds per kernel call are sized so the window-noise buffer stays modest
_CHUNK_BUDGET_FLOATS = 4_000_000


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if HAS_NUMBA else ("numpy",)


def active_backend() -> str:
    """Backend selected by DYNREG_BACKEND (auto/numba/numpy)."""
    pref = os.environ.get(ENV_BACKEND, "auto").strip().lower() or "auto"
    if pref == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    if pref == "numba":
        if not HAS_NUMBA:
            raise ConfigError(f"{ENV_BACKEND}=numba but numba is not importable")
        return "numba"
    if pref == "numpy":
        return "numpy"
    raise ConfigError(f"{ENV_BACKEND} must be auto, numba, or numpy, got {pref!r}")


def _is_sine_stream(stream) -> bool:
    return hasattr(stream, "params_upto") and hasattr(stream, "amplitude")


def resolve_backend(requested, stream=None) -> str:
    """Validate an explicit request or fall back to the active backend.

    The compiled run path only knows the sine family; generic streams run
    on the portable path even under 'auto'.
    """
    if requested is None:
        chosen = active_backend()
        if chosen == "numba" and stream is not None and not _is_sine_stream(stream):
            return "numpy"
        return chosen
    if requested not in ("numba", "numpy"):
        raise ConfigError(f"backend must be numba or numpy, got {requested!r}")
    if requested == "numba":
        if not HAS_NUMBA:
            raise ConfigError("backend numba requested but numba is not importable")
        if stream is not None and not _is_sine_stream(stream):
            raise ConfigError("the numba run path requires a sine-family stream")
    return requested


def run_stream_arrays(stream, horizon: int, inner, opt, seed: int, x0) -> dict:
    """Full-run driver over the compiled chunk kernel; returns trace arrays.

    Noise is pre-drawn per round from the same (seed, round) streams the
    portable path uses, so chunking cannot change results.
    """
    T = int(horizon)
    d = stream.dim
    w = opt.window
    A, B = stream.params_upto(T)
    A = np.ascontiguousarray(A)
    B = np.ascontiguousarray(B)
    ap = alpha_weights(opt.alpha, w)
    W = weight_sum_W(opt.alpha, w)
    noise = stream.noise
    has_noise = not noise.is_exact
    coord_std = noise.coord_std(d) if has_noise else 0.0
    sqrt_tb = math.sqrt(inner.train_batch)

    x = np.array(x0, dtype=np.float64)
    m = np.zeros(d)
    v = np.zeros(d)
    ring = np.zeros((w, d))

    out = {
        "iterates": np.empty((T, d)),
        "adapted": np.empty((T, d)),
        "losses": np.empty(T),
        "grads": np.empty((T, d)),
        "smoothed_grads": np.empty((T, d)),
        "step_sizes": np.empty(T),
    }

    chunk = max(1, min(T, _CHUNK_BUDGET_FLOATS // max(1, w * d)))
    t0 = 1
    while t0 <= T:
        n = min(chunk, T - t0 + 1)
        if has_noise:
            adapt_z = np.empty((n, d))
            win_z = np.zeros((n, w, d))
            for i in range(n):
                rng = spawn_rng_stream(seed, t0 + i)
                adapt_z[i] = rng.standard_normal(d)
                occ = min(t0 + i, w)
                win_z[i, :occ] = rng.standard_normal((occ, d))
        else:
            adapt_z = np.zeros((1, 1))
            win_z = np.zeros((1, 1, 1))
        lo, hi = t0 - 1, t0 - 1 + n
        status = _kernels.sine_run_chunk(
            A,
            B,
            x,
            m,
            v,
            ring,
            t0,
            n,
            w,
            ap,
            W,
            inner.theta,
            stream.amplitude,
            opt.beta1,
            opt.beta2,
            opt.epsilon,
            opt.eta,
            opt.schedule == ADAM_SCHEDULE,
            has_noise,
            coord_std,
            sqrt_tb,
            adapt_z,
            win_z,
            out["iterates"][lo:hi],
            out["adapted"][lo:hi],
            out["losses"][lo:hi],
            out["grads"][lo:hi],
            out["smoothed_grads"][lo:hi],
            out["step_sizes"][lo:hi],
        )
        if status:
            raise NumericError(f"update produced a non-finite iterate at round {status}")
        t0 += n
    return out


def weighted_window_norms(G, w: int, alpha: float, backend=None) -> np.ndarray:
    """Per-round squared norms of the weighted window average of rows of G."""
    G = np.ascontiguousarray(G, dtype=np.float64)
    T, d = G.shape
    ap = alpha_weights(alpha, w)
    W = weight_sum_W(alpha, w)
    b = resolve_backend(backend) if backend is not None else active_backend()
    out = np.empty(T)
    if b == "numba" and HAS_NUMBA:
        _kernels.weighted_window_norms(G, w, ap, W, out)
        return out
    if w == 1:
        S = G / W
    else:
        padded = np.vstack([np.zeros((w - 1, d)), G])
        win = np.lib.stride_tricks.sliding_window_view(padded, w, axis=0)  # (T, d, w)
        rev = np.ascontiguousarray(ap[::-1])  # position k carries weight alpha^(w-1-k)
        S = (win @ rev) / W
    return np.einsum("td,td->t", S, S)


def static_window_norms_sine(A, B, X, w: int, theta: float, D: float, backend=None) -> np.ndarray:
    """Per-round squared norms of the plain window average of past composite
    gradients, all re-evaluated at the round's own iterate."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    T, d = X.shape
    b = resolve_backend(backend) if backend is not None else active_backend()
    out = np.empty(T)
    if b == "numba" and HAS_NUMBA:
        _kernels.sine_static_window_norms(A, B, X, w, theta, D, out)
        return out
    for t in range(1, T + 1):
        occ = min(t, w)
        Aw = A[t - occ : t][::-1]
        Bw = B[t - occ : t][::-1]
        x = X[t - 1]
        s = Aw @ x + Bw
        cs = np.cos(s)
        sn = np.sin(s)
        U = x[None, :] - theta * (D * cs)[:, None] * Aw
        s2 = np.einsum("rd,rd->r", Aw, U) + Bw
        c2 = np.cos(s2)
        dot_ag = D * c2 * np.einsum("rd,rd->r", Aw, Aw)
        F = (D * c2 + theta * D * sn * dot_ag)[:, None] * Aw
        g = F.sum(axis=0) / w
        out[t - 1] = float(g @ g)
    return out
