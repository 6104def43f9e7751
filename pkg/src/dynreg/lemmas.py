"""Numerical verification of the scalar inequalities and noise lemmas that
the guarantee calculators rest on.

Each check sweeps a deterministic grid (plus seeded random cases), records
every violation beyond tolerance, and reports the tightest margin seen. An
inequality lhs <= rhs counts as violated when rhs - lhs < -1e-9 * max(1, |rhs|),
so near-tight cases evaluated with compensated summation do not false-alarm.

The rhs_scale hook exists for self-testing the harness: scaling a right-hand
side below 1 must make the corresponding check fail.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from math import fsum

import numpy as np

from .meta import InnerAdaptConfig, RunTrace, run_stream
from .numerics import ConfigError, spawn_rng_stream
from .optimizer import alpha_weights, make_config_adagrad, weight_sum_W
from .regret import exact_smoothed_gradient, variance_proxy
from .tasks import GAUSSIAN, SUBGAUSSIAN, NoiseModel, make_drifting_sine_stream

__all__ = [
    "Violation",
    "LemmaCheckResult",
    "QUICK_IDS",
    "FULL_IDS",
    "check_geom_sqrt_sum",
    "check_geom_32_sum",
    "check_sum_ratio",
    "check_sum_ratio_momentum",
    "check_quadratic",
    "check_inv_sqrt_geom",
    "check_objective_drift",
    "mc_smoothed_gradient_lemmas",
    "run_checks",
]

_TOL = 1e-9

_A_GRID = (0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99)
_Q_GRID = (1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128, 256, 512, 1024)
_BETA2_GRID = (0.5, 0.9, 0.99, 0.999, 1.0)
_EPS_GRID = (1e-8, 1e-3, 1.0)
_MOMENTUM_GRID = ((0.1, 0.5), (0.5, 0.9), (0.9, 0.999), (0.5, 1.0), (0.9, 1.0))


@dataclass(frozen=True)
class Violation:
    params: dict
    lhs: float
    rhs: float

    def to_record(self) -> dict:
        return {"params": self.params, "lhs": self.lhs, "rhs": self.rhs}


@dataclass(eq=False)
class LemmaCheckResult:
    """Outcome of one inequality sweep.

    max_slack is the smallest rhs - lhs over the whole grid: how close the
    sharpest case came to the boundary (negative only when violations exist).
    """

    lemma_id: str
    grid_size: int
    violations: list = field(default_factory=list)
    max_slack: float = math.inf
    elapsed_s: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_record(self) -> dict:
        return {
            "lemma_id": self.lemma_id,
            "grid_size": self.grid_size,
            "passed": self.passed,
            "max_slack": self.max_slack,
            "elapsed_s": self.elapsed_s,
            "violations": [v.to_record() for v in self.violations[:50]],
            "violation_count": len(self.violations),
        }


class _Collector:
    def __init__(self, lemma_id: str, rhs_scale: float):
        self.result = LemmaCheckResult(lemma_id=lemma_id, grid_size=0)
        self.rhs_scale = float(rhs_scale)
        self._t0 = time.perf_counter()

    def check(self, lhs: float, rhs: float, **params) -> None:
        rhs = rhs * self.rhs_scale
        self.result.grid_size += 1
        slack = rhs - lhs
        if slack < self.result.max_slack:
            self.result.max_slack = slack
        if slack < -_TOL * max(1.0, abs(rhs)):
            self.result.violations.append(Violation(params=params, lhs=lhs, rhs=rhs))

    def done(self) -> LemmaCheckResult:
        self.result.elapsed_s = time.perf_counter() - self._t0
        return self.result


def _prefix_checker(lemma_id: str, term, rhs_of, rhs_scale: float) -> LemmaCheckResult:
    """Sweep sum_{q<Q} term(a, q) <= rhs_of(a) over the a and Q grids."""
    col = _Collector(lemma_id, rhs_scale)
    qmax = max(_Q_GRID)
    for a in _A_GRID:
        terms = [term(a, q) for q in range(qmax)]
        rhs = rhs_of(a)
        for Q in _Q_GRID:
            col.check(fsum(terms[:Q]), rhs, a=a, Q=Q)
    return col.done()


def check_geom_sqrt_sum(rhs_scale: float = 1.0) -> LemmaCheckResult:
    """sum_{q=0}^{Q-1} a^q sqrt(q+1) <= 2 / (1-a)^(3/2) for 0 < a < 1."""
    return _prefix_checker(
        "geom-sqrt-sum",
        lambda a, q: a**q * math.sqrt(q + 1.0),
        lambda a: 2.0 / (1.0 - a) ** 1.5,
        rhs_scale,
    )


def check_geom_32_sum(rhs_scale: float = 1.0) -> LemmaCheckResult:
    """sum_{q=0}^{Q-1} a^q sqrt(q) (q+1) <= 4a / (1-a)^(5/2) for 0 < a < 1."""
    return _prefix_checker(
        "geom-three-halves-sum",
        lambda a, q: a**q * math.sqrt(q) * (q + 1.0),
        lambda a: 4.0 * a / (1.0 - a) ** 2.5,
        rhs_scale,
    )


def check_inv_sqrt_geom(rhs_scale: float = 1.0) -> LemmaCheckResult:
    """sum_{q=0}^{Q-1} a^q / sqrt(q+1) <= 2 / (a sqrt(1-a)) for 0 < a < 1."""
    return _prefix_checker(
        "inv-sqrt-geom",
        lambda a, q: a**q / math.sqrt(q + 1.0),
        lambda a: 2.0 / (a * math.sqrt(1.0 - a)),
        rhs_scale,
    )


def _named_positive_sequences(eps: float, n: int) -> dict:
    ramp = np.linspace(0.05, 3.0, n)
    return {
        "constant-eps": np.full(n, eps),
        "ones": np.ones(n),
        "ramp": ramp,
        "decay": 0.9 ** np.arange(n) + 1e-6,
        "spiky": np.where(np.arange(n) % 17 == 0, 5.0, 1e-3),
    }


def check_sum_ratio(
    rhs_scale: float = 1.0, n_random: int = 300, n_len: int = 160, seed: int = 0
) -> LemmaCheckResult:
    """sum_j a_j/(eps+b_j) <= ln(1+b_N/eps) - N ln(beta2) for positive a_j,
    where b_n = sum_{j<=n} beta2^(n-j) a_j."""
    col = _Collector("sum-ratio", rhs_scale)
    rng = spawn_rng_stream(seed, 101)
    random_seqs = [
        ("random", i, 0.1 + 1.9 * rng.uniform(size=n_len)) for i in range(n_random)
    ]
    for eps in _EPS_GRID:
        named = [(name, -1, seq) for name, seq in _named_positive_sequences(eps, n_len).items()]
        for name, idx, seq in named + random_seqs:
            for beta2 in _BETA2_GRID:
                b = 0.0
                lhs_terms = []
                for a_j in seq:
                    b = beta2 * b + a_j
                    lhs_terms.append(a_j / (eps + b))
                lhs = fsum(lhs_terms)
                rhs = math.log1p(b / eps) - len(seq) * math.log(beta2)
                col.check(lhs, rhs, sequence=name, index=idx, beta2=beta2, eps=eps, n=len(seq))
    return col.done()


def check_sum_ratio_momentum(
    rhs_scale: float = 1.0, n_random: int = 300, n_len: int = 160, seed: int = 0
) -> LemmaCheckResult:
    """Momentum form: with b_n = sum beta2^(n-j) a_j^2 and c_n = sum beta1^(n-j) a_j,
    sum_j c_j^2/(eps+b_j) <= (ln(1+b_n/eps) - n ln(beta2)) / ((1-beta1)(1-beta1/beta2))."""
    col = _Collector("sum-ratio-momentum", rhs_scale)
    rng = spawn_rng_stream(seed, 102)
    n = n_len
    seqs = [("normals", i, rng.standard_normal(n)) for i in range(n_random)]
    seqs += [
        ("alternating", -1, np.where(np.arange(n) % 2 == 0, 1.0, -1.0)),
        ("ones", -1, np.ones(n)),
        ("ramp-signed", -1, np.linspace(-2.0, 2.0, n)),
    ]
    for name, idx, seq in seqs:
        for beta1, beta2 in _MOMENTUM_GRID:
            factor = 1.0 / ((1.0 - beta1) * (1.0 - beta1 / beta2))
            for eps in _EPS_GRID:
                b = 0.0
                c = 0.0
                lhs_terms = []
                for a_j in seq:
                    b = beta2 * b + a_j * a_j
                    c = beta1 * c + a_j
                    lhs_terms.append(c * c / (eps + b))
                lhs = fsum(lhs_terms)
                rhs = factor * (math.log1p(b / eps) - n * math.log(beta2))
                col.check(
                    lhs, rhs, sequence=name, index=idx, beta1=beta1, beta2=beta2, eps=eps, n=n
                )
    return col.done()


def _quad_zmax(a: float, b: float, c: float) -> float:
    """Largest Z with Z / sqrt(cZ + a) = b (the hypothesis boundary)."""
    return (c * b * b + math.sqrt(c * c * b**4 + 4.0 * a * b * b)) / 2.0


def check_quadratic(
    rhs_scale: float = 1.0, n_random: int = 10_000, seed: int = 0
) -> LemmaCheckResult:
    """If Z >= 0 and Z / sqrt(cZ + a) <= b then Z <= c b^2 + b sqrt(a)."""
    col = _Collector("quadratic-root", rhs_scale)

    def probe(a, b, c, z, tag, idx=-1):
        denom = c * z + a
        if denom <= 0.0:
            return
        if z / math.sqrt(denom) > b:  # hypothesis must hold before testing
            return
        col.check(z, c * b * b + b * math.sqrt(a), a=a, b=b, c=c, Z=z, case=tag, index=idx)

    grid = (0.0, 1e-3, 0.1, 1.0, 10.0, 1e3)
    for a in grid:
        for b in grid:
            for c in grid:
                if a == 0.0 and c == 0.0:
                    continue
                zmax = _quad_zmax(a, b, c)
                for s in (0.0, 0.25, 0.5, 0.75, 1.0):
                    probe(a, b, c, s * zmax, "grid")
    rng = spawn_rng_stream(seed, 103)
    exps = rng.uniform(-4.0, 3.0, size=(n_random, 3))
    fracs = rng.uniform(size=n_random)
    for i in range(n_random):
        a, b, c = (10.0 ** exps[i]).tolist()
        probe(a, b, c, fracs[i] * _quad_zmax(a, b, c), "random", i)
    return col.done()


def _drift_bounds(D: float, w: int, alpha: float) -> tuple[float, float]:
    """Forward and backward drift bounds of the smoothed objective, with
    exact alpha = 1 limits."""
    W = weight_sum_W(alpha, w)
    if alpha == 1.0:
        fwd = 2.0 * D / w + 2.0 * D * (w - 1) / w
        back = 2.0 * D
    else:
        fwd = D * (1.0 + alpha ** (w - 1)) / W + D * (1.0 - alpha ** (w - 1)) * (
            1.0 + alpha
        ) / (W * (1.0 - alpha))
        back = 2.0 * D * (1.0 - alpha**w) / (W * (1.0 - alpha))
    return fwd, back


def check_objective_drift(
    trace: RunTrace, w: int, alpha: float, D: float = None, rhs_scale: float = 1.0
) -> LemmaCheckResult:
    """Per-round drift of the weighted window objective along a real trace.

    S_t(x) = (1/W)(alpha^0 ell_t(x) + sum_{r>=1} alpha^r ell_{t-r}(x_{t-r}));
    checks S_{t+1}(x_{t+1}) - S_t(x_{t+1}) and S_t(x_t) - S_{t+1}(x_{t+1})
    against their closed-form bounds for every t < T.
    """
    if D is None:
        if trace.stream is None or not hasattr(trace.stream, "constants"):
            raise ConfigError("need a loss bound D (stream has no constants())")
        D = trace.stream.constants().D
    col = _Collector("objective-drift", rhs_scale)
    W = weight_sum_W(alpha, w)
    weights = alpha_weights(alpha, w)
    losses = trace.losses
    fwd_bound, back_bound = _drift_bounds(D, w, alpha)

    def window_sum(t: int, newest: float) -> float:
        occ = min(t, w)
        terms = [weights[0] * newest]
        terms += [weights[r] * losses[t - 1 - r] for r in range(1, occ)]
        return fsum(terms) / W

    for t in range(1, trace.horizon):
        x_next = trace.iterates[t]
        s_t_here = window_sum(t, losses[t - 1])
        s_t_next = window_sum(t, trace.round_loss(t).loss(x_next))
        s_next = window_sum(t + 1, losses[t])
        col.check(s_next - s_t_next, fwd_bound, t=t, seed=trace.seed, side="forward")
        col.check(s_t_here - s_next, back_bound, t=t, seed=trace.seed, side="backward")
    return col.done()


def _drift_suite(seed: int, rhs_scale: float) -> LemmaCheckResult:
    """Drift check across window/discount configs and seeded drifting runs."""
    merged = LemmaCheckResult(lemma_id="objective-drift", grid_size=0)
    t0 = time.perf_counter()
    configs = [
        (1, 0.5, 4, 300),
        (4, 0.9, 4, 300),
        (8, 1.0, 4, 300),
        (16, 0.99, 4, 300),
        (32, 0.99, 20, 500),
    ]
    inner = InnerAdaptConfig(theta=0.05)
    for w, alpha, n_seeds, horizon in configs:
        for s in range(n_seeds):
            stream = make_drifting_sine_stream(
                dim=4,
                drift_rate=0.1,
                noise=NoiseModel(GAUSSIAN, sigma=0.5),
                seed=seed + s,
            )
            opt = make_config_adagrad(eta=0.2, alpha=alpha, window=w)
            trace = run_stream(stream, horizon, inner, opt, seed=seed + s)
            part = check_objective_drift(trace, w, alpha, rhs_scale=rhs_scale)
            merged.grid_size += part.grid_size
            merged.violations.extend(part.violations)
            merged.max_slack = min(merged.max_slack, part.max_slack)
    merged.elapsed_s = time.perf_counter() - t0
    return merged


def mc_smoothed_gradient_lemmas(
    dim: int,
    window: int,
    alpha: float,
    sigma: float,
    n_reps: int,
    seed: int = 0,
    delta: float = None,
    n_runs: int = 0,
    run_horizon: int = 16,
    rhs_scale: float = 1.0,
) -> LemmaCheckResult:
    """Monte Carlo checks of the smoothed-gradient noise lemmas.

    Unbiasedness: the empirical mean of the smoothed stochastic gradient over
    n_reps fresh draws (full window, anchored on a real run) stays within 5
    aggregate standard errors of the exact smoothed gradient. Variance: the
    mean squared deviation matches mu within 3%. With delta and n_runs given,
    additionally runs n_runs seeded short streams under sub-Gaussian noise and
    checks that max_t ||gtilde_t - grad S_t||^2 exceeds mubar(delta) in at
    most a delta + 3 sqrt(delta/n_runs) fraction of runs.
    """
    col = _Collector("smoothed-gradient-mc", rhs_scale)
    noise = NoiseModel(GAUSSIAN, sigma=sigma)
    stream = make_drifting_sine_stream(
        dim=dim, drift_rate=0.05, noise=noise, seed=seed
    )
    inner = InnerAdaptConfig(theta=0.05)
    opt = make_config_adagrad(eta=0.1, alpha=alpha, window=window)
    trace = run_stream(stream, window, inner, opt, seed=seed)
    exact = exact_smoothed_gradient(trace, window, window, alpha)
    assert exact.shape == (dim,)

    vp = variance_proxy(noise, window, alpha)
    W = vp.weight_sum
    weights = alpha_weights(alpha, window)
    coord_std = noise.coord_std(dim)
    z = spawn_rng_stream(seed, 999_983).standard_normal((int(n_reps), window, dim))
    devs = np.einsum("irk,r->ik", z, weights) * (coord_std / W)

    mean_norm = float(np.linalg.norm(devs.mean(axis=0)))
    col.check(
        mean_norm,
        5.0 * math.sqrt(vp.mu / n_reps),
        check="unbiasedness",
        n_reps=int(n_reps),
        alpha=alpha,
        window=window,
    )
    var_est = float((devs**2).sum(axis=1).mean())
    col.check(var_est, 1.03 * vp.mu, check="variance-upper", alpha=alpha, window=window)
    col.check(0.97 * vp.mu, var_est, check="variance-lower", alpha=alpha, window=window)

    if delta is not None and n_runs > 0:
        sub_noise = NoiseModel(SUBGAUSSIAN, sigma=sigma)
        sub_stream = make_drifting_sine_stream(
            dim=dim, drift_rate=0.05, noise=sub_noise, seed=seed
        )
        mubar = variance_proxy(sub_noise, window, alpha, delta=delta, dim=dim).mubar
        exceed = 0
        for r in range(int(n_runs)):
            tr = run_stream(sub_stream, run_horizon, inner, opt, seed=r)
            worst = 0.0
            for t in range(1, run_horizon + 1):
                dev = tr.smoothed_grads[t - 1] - exact_smoothed_gradient(
                    tr, t, window, alpha
                )
                worst = max(worst, float(dev @ dev))
            if worst > mubar:
                exceed += 1
        col.check(
            exceed / n_runs,
            delta + 3.0 * math.sqrt(delta / n_runs),
            check="deviation-exceedance",
            delta=delta,
            n_runs=int(n_runs),
            mubar=mubar,
        )
    return col.done()


def _mc_suite(seed: int, rhs_scale: float) -> LemmaCheckResult:
    merged = LemmaCheckResult(lemma_id="smoothed-gradient-mc", grid_size=0)
    t0 = time.perf_counter()
    parts = [
        mc_smoothed_gradient_lemmas(5, 4, 1.0, 0.5, 100_000, seed=seed, rhs_scale=rhs_scale),
        mc_smoothed_gradient_lemmas(5, 8, 0.9, 0.5, 100_000, seed=seed, rhs_scale=rhs_scale),
        mc_smoothed_gradient_lemmas(5, 2, 0.5, 0.5, 100_000, seed=seed, rhs_scale=rhs_scale),
        mc_smoothed_gradient_lemmas(
            5, 4, 0.9, 0.5, 10_000, seed=seed, delta=0.2, n_runs=500, rhs_scale=rhs_scale
        ),
    ]
    for part in parts:
        merged.grid_size += part.grid_size
        merged.violations.extend(part.violations)
        merged.max_slack = min(merged.max_slack, part.max_slack)
    merged.elapsed_s = time.perf_counter() - t0
    return merged


QUICK_IDS = (
    "geom-sqrt-sum",
    "geom-three-halves-sum",
    "sum-ratio",
    "sum-ratio-momentum",
    "quadratic-root",
    "inv-sqrt-geom",
)
FULL_IDS = QUICK_IDS + ("objective-drift", "smoothed-gradient-mc")


def run_checks(preset: str = "quick", corrupt: str = None, seed: int = 0):
    """Run the preset's checks; returns a list of LemmaCheckResult.

    corrupt names a lemma id whose right-hand sides are scaled by 0.1, a
    self-test that the harness actually detects violations.
    """
    if preset not in ("quick", "full"):
        raise ConfigError(f"preset must be quick or full, got {preset!r}")
    ids = QUICK_IDS if preset == "quick" else FULL_IDS
    if corrupt is not None and corrupt not in ids:
        raise ConfigError(f"unknown lemma id {corrupt!r}; expected one of {ids}")

    def scale(lemma_id: str) -> float:
        return 0.1 if corrupt == lemma_id else 1.0

    runners = {
        "geom-sqrt-sum": lambda: check_geom_sqrt_sum(scale("geom-sqrt-sum")),
        "geom-three-halves-sum": lambda: check_geom_32_sum(scale("geom-three-halves-sum")),
        "sum-ratio": lambda: check_sum_ratio(scale("sum-ratio"), seed=seed),
        "sum-ratio-momentum": lambda: check_sum_ratio_momentum(
            scale("sum-ratio-momentum"), seed=seed
        ),
        "quadratic-root": lambda: check_quadratic(scale("quadratic-root"), seed=seed),
        "inv-sqrt-geom": lambda: check_inv_sqrt_geom(scale("inv-sqrt-geom")),
        "objective-drift": lambda: _drift_suite(seed, scale("objective-drift")),
        "smoothed-gradient-mc": lambda: _mc_suite(seed, scale("smoothed-gradient-mc")),
    }
    return [runners[lemma_id]() for lemma_id in ids]
