"""Compiled inner loops for the sine task family.

Each kernel mirrors, operation for operation, the portable numpy path; the
only differences are scalarized dot products and sequential instead of
pairwise summation, so the two backends agree to floating-point
associativity (~1e-12 relative over thousands of rounds), not bit-for-bit.

When numba is unavailable the module still imports; the decorated functions
run as plain Python (slow) and HAS_NUMBA tells the backend layer to prefer
the numpy path.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


@njit(cache=True)
def sine_run_chunk(
    A,
    B,
    x,
    m,
    v,
    ring_g,
    t0,
    n_rounds,
    w,
    alpha_pows,
    W,
    theta,
    D,
    beta1,
    beta2,
    eps,
    eta,
    adam_schedule,
    has_noise,
    coord_std,
    sqrt_tb,
    adapt_z,
    win_z,
    out_x,
    out_xhat,
    out_loss,
    out_grad,
    out_gt,
    out_eta,
):
    """Advance `n_rounds` rounds starting at 1-based round t0.

    x, m, v and ring_g are carried state, mutated in place; ring_g row
    (t-1) % w caches round t's exact gradient at its own iterate. Returns 0
    on success or the 1-based round index that produced a non-finite
    iterate.
    """
    d = x.shape[0]
    acc = np.empty(d)
    for i in range(n_rounds):
        t = t0 + i
        j = t - 1
        for k in range(d):
            out_x[i, k] = x[k]
        s = 0.0
        for k in range(d):
            s += A[j, k] * x[k]
        s += B[j]
        cs = math.cos(s)
        sn = math.sin(s)
        # stochastic inner adaptation from a batch-mean gradient estimate
        for k in range(d):
            graw = D * cs * A[j, k]
            if has_noise:
                graw = graw + (coord_std * adapt_z[i, k]) / sqrt_tb
            out_xhat[i, k] = x[k] - theta * graw
        # exact round loss and gradient at the pre-update iterate
        s2 = 0.0
        for k in range(d):
            u = x[k] - theta * (D * cs * A[j, k])
            s2 += A[j, k] * u
        s2 += B[j]
        c2 = math.cos(s2)
        out_loss[i] = D * math.sin(s2)
        dot_ag = 0.0
        for k in range(d):
            dot_ag += A[j, k] * (D * c2 * A[j, k])
        rrow = j % w
        for k in range(d):
            comp = D * c2 * A[j, k] + theta * D * sn * dot_ag * A[j, k]
            ring_g[rrow, k] = comp
            out_grad[i, k] = comp
        # smoothed stochastic gradient over the occupied window
        occ = t if t < w else w
        for k in range(d):
            acc[k] = 0.0
        for r in range(occ):
            src = (j - r) % w
            wr = alpha_pows[r]
            if has_noise:
                for k in range(d):
                    acc[k] += wr * (ring_g[src, k] + coord_std * win_z[i, r, k])
            else:
                for k in range(d):
                    acc[k] += wr * ring_g[src, k]
        if adam_schedule:
            eta_t = eta * (1.0 - beta1) * math.sqrt((1.0 - beta2 ** (t + 1)) / (1.0 - beta2))
        else:
            eta_t = eta
        out_eta[i] = eta_t
        for k in range(d):
            gt = acc[k] / W
            out_gt[i, k] = gt
            m[k] = beta1 * m[k] + gt
            v[k] = beta2 * v[k] + gt * gt
            x[k] = x[k] - eta_t * m[k] / math.sqrt(eps + v[k])
            if not math.isfinite(x[k]):
                return t
    return 0


@njit(cache=True)
def weighted_window_norms(G, w, alpha_pows, W, out):
    """out[t-1] = || (1/W) sum_{r<min(t,w)} alpha^r G[t-1-r] ||^2 for t = 1..T."""
    T, d = G.shape
    acc = np.empty(d)
    for t in range(1, T + 1):
        occ = t if t < w else w
        for k in range(d):
            acc[k] = 0.0
        for r in range(occ):
            wr = alpha_pows[r]
            row = t - 1 - r
            for k in range(d):
                acc[k] += wr * G[row, k]
        nrm = 0.0
        for k in range(d):
            g = acc[k] / W
            nrm += g * g
        out[t - 1] = nrm


@njit(cache=True)
def sine_static_window_norms(A, B, X, w, theta, D, out):
    """out[t-1] = || (1/w) sum_{r<min(t,w)} grad ell_{t-r}(x_t) ||^2.

    ell here is the composite (post-inner-step) round loss of the sine
    family with parameters rows A, B; X holds the per-round iterates.
    """
    T, d = X.shape
    acc = np.empty(d)
    for t in range(1, T + 1):
        occ = t if t < w else w
        for k in range(d):
            acc[k] = 0.0
        for r in range(occ):
            j = t - 1 - r
            s = 0.0
            for k in range(d):
                s += A[j, k] * X[t - 1, k]
            s += B[j]
            cs = math.cos(s)
            sn = math.sin(s)
            s2 = 0.0
            for k in range(d):
                u = X[t - 1, k] - theta * (D * cs * A[j, k])
                s2 += A[j, k] * u
            s2 += B[j]
            c2 = math.cos(s2)
            dot_ag = 0.0
            for k in range(d):
                dot_ag += A[j, k] * (D * c2 * A[j, k])
            for k in range(d):
                acc[k] += D * c2 * A[j, k] + theta * D * sn * dot_ag * A[j, k]
        nrm = 0.0
        for k in range(d):
            g = acc[k] / w
            nrm += g * g
        out[t - 1] = nrm
