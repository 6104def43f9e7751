"""Online meta-learning driver.

Round t: the learner holds x_t, adapts it with one stochastic inner gradient
step x^_t = x_t - theta * g^(x_t) (batch-mean estimate), suffers the round
loss ell_t(x_t) = raw_t(x_t - theta * grad raw_t(x_t)) evaluated with the
exact inner step, pushes (x_t, ell_t) into the smoothing window, and updates
x via the time-smoothed adaptive step.

All stochasticity of round t comes from the stream (seed, t): one adaptation
draw, then one batched window draw. A run is therefore a pure function of
(stream, horizon, configs, seed) regardless of execution backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import (
    ConfigError,
    DimensionError,
    NumericError,
    RngStream,
    as_vector,
    spawn_rng_stream,
)
from .optimizer import (
    OptimizerConfig,
    OptimizerState,
    SmoothingWindow,
    dts_ag_step,
    make_state,
    smoothed_stochastic_gradient,
    step_size_at,
)
from .tasks import TaskRound

__all__ = [
    "InnerAdaptConfig",
    "RoundLoss",
    "MetaLearnerState",
    "RoundRecord",
    "RunTrace",
    "inner_adapt",
    "make_meta_state",
    "run_round",
    "run_stream",
]


@dataclass(frozen=True)
class InnerAdaptConfig:
    """Inner-adaptation step size and batch sizes.

    theta = 0 is legal (adaptation becomes the identity). train_batch scales
    the inner-step gradient noise by 1/sqrt(train_batch). test_batch is
    validated and recorded for bookkeeping but does not enter the dynamics:
    round-loss noise is injected at the gradient oracle, whose second moment
    is the configured sigma^2 by definition.
    """

    theta: float
    train_batch: int = 32
    test_batch: int = 32

    def __post_init__(self):
        if not (math.isfinite(self.theta) and self.theta >= 0):
            raise ConfigError(f"theta must be finite and >= 0, got {self.theta}")
        for name in ("train_batch", "test_batch"):
            val = getattr(self, name)
            if not isinstance(val, (int, np.integer)) or val < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {val!r}")


class RoundLoss:
    """A round's loss: the task loss after one exact inner gradient step.

    value(x) = raw(U(x)) with U(x) = x - theta * grad_raw(x);
    grad(x)  = (I - theta * Hess_raw(x)) grad_raw(U(x)).
    """

    __slots__ = ("task", "theta")

    def __init__(self, task: TaskRound, theta: float):
        self.task = task
        self.theta = float(theta)

    def adapted(self, x: np.ndarray) -> np.ndarray:
        """The exact inner step U(x)."""
        return x - self.theta * self.task.grad(x)

    def loss(self, x: np.ndarray) -> float:
        return float(self.task.loss(self.adapted(x)))

    def grad(self, x: np.ndarray) -> np.ndarray:
        g_in = self.task.grad(x)
        u = x - self.theta * g_in
        g_out = self.task.grad(u)
        corr = self.task.hess_vec(x, g_out)
        return g_out - self.theta * corr

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        g_in = self.task.grad(x)
        u = x - self.theta * g_in
        val = float(self.task.loss(u))
        g_out = self.task.grad(u)
        corr = self.task.hess_vec(x, g_out)
        return val, g_out - self.theta * corr


def inner_adapt(x, task: TaskRound, config: InnerAdaptConfig, rng: RngStream) -> np.ndarray:
    """One stochastic inner step from a batch-mean gradient estimate.

    The batch mean of train_batch independent noisy gradients has the same
    law as the exact gradient plus one noise draw scaled by
    1/sqrt(train_batch), which is how it is sampled.
    """
    xv = as_vector(x, "x")
    if xv.size != task.dim:
        raise DimensionError(f"x has length {xv.size}, task dimension is {task.dim}")
    g = task.grad(xv)
    if not task.noise.is_exact:
        n = task.noise.draw(rng, task.dim)
        g = g + n / math.sqrt(config.train_batch)
    xhat = xv - config.theta * g
    if not np.all(np.isfinite(xhat)):
        bad = int(np.flatnonzero(~np.isfinite(xhat))[0])
        raise NumericError(f"inner adaptation non-finite at coordinate {bad}")
    return xhat


@dataclass(eq=False)
class MetaLearnerState:
    """Mutable run state: current iterate, optimizer moments, smoothing window."""

    x: np.ndarray
    optimizer: OptimizerState
    window: SmoothingWindow

    @property
    def round(self) -> int:
        """1-based index of the next round to be played."""
        return self.optimizer.t


def make_meta_state(x0, opt: OptimizerConfig) -> MetaLearnerState:
    x = as_vector(x0, "x0")
    return MetaLearnerState(
        x=np.array(x, dtype=np.float64),
        optimizer=make_state(x.size),
        window=SmoothingWindow(opt.alpha, opt.window),
    )


@dataclass(frozen=True, eq=False)
class RoundRecord:
    """Everything observed in one round."""

    t: int
    iterate: np.ndarray
    adapted: np.ndarray
    loss: float
    grad: np.ndarray
    smoothed_grad: np.ndarray
    step_size: float


def run_round(
    state: MetaLearnerState,
    task: TaskRound,
    inner: InnerAdaptConfig,
    opt: OptimizerConfig,
    rng: RngStream,
) -> tuple[MetaLearnerState, RoundRecord]:
    """Play one round; advances and returns the state plus the round record.

    Steps: stochastic inner adaptation, exact round-loss evaluation at the
    pre-update iterate, window push (so the newest slot holds this round's
    pair), smoothed stochastic gradient, optimizer update.
    """
    t = state.round
    x = state.x
    xhat = inner_adapt(x, task, inner, rng)
    rl = RoundLoss(task, inner.theta)
    loss_val, grad_val = rl.value_and_grad(x)
    if not (math.isfinite(loss_val) and np.all(np.isfinite(grad_val))):
        raise NumericError(f"round {t} produced a non-finite loss or gradient")
    state.window.push(x, rl, grad=grad_val)
    gtilde = smoothed_stochastic_gradient(state.window, task.noise, rng)
    eta_t = step_size_at(opt, state.optimizer.t)
    x_new, opt_state = dts_ag_step(state.optimizer, opt, x, gtilde)
    record = RoundRecord(
        t=t,
        iterate=x,
        adapted=xhat,
        loss=loss_val,
        grad=grad_val,
        smoothed_grad=gtilde,
        step_size=eta_t,
    )
    state.x = x_new
    state.optimizer = opt_state
    return state, record


@dataclass(eq=False)
class RunTrace:
    """Complete per-round record of one run, indexed t = 1..horizon.

    Row t-1 of each array belongs to round t. iterates holds the pre-update
    x_t; losses/grads are the exact round-loss value and gradient at x_t;
    smoothed_grads holds the stochastic smoothed gradient the optimizer
    consumed; step_sizes the step size used.
    """

    seed: int
    horizon: int
    dim: int
    theta: float
    iterates: np.ndarray
    adapted: np.ndarray
    losses: np.ndarray
    grads: np.ndarray
    smoothed_grads: np.ndarray
    step_sizes: np.ndarray
    config: dict = field(default_factory=dict)
    stream: object = None

    def __post_init__(self):
        T, d = self.horizon, self.dim
        shapes = {
            "iterates": (T, d),
            "adapted": (T, d),
            "losses": (T,),
            "grads": (T, d),
            "smoothed_grads": (T, d),
            "step_sizes": (T,),
        }
        for name, shape in shapes.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise DimensionError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"{name} contains non-finite entries")

    def round_loss(self, t: int) -> RoundLoss:
        """Re-buildable handle for round t's loss (t in 1..horizon)."""
        if not (1 <= t <= self.horizon):
            raise ConfigError(f"round index must be in [1, {self.horizon}], got {t}")
        if self.stream is None:
            raise ConfigError("trace has no stream attached; cannot rebuild round losses")
        return RoundLoss(self.stream.task(t), self.theta)

    def record(self, t: int) -> RoundRecord:
        if not (1 <= t <= self.horizon):
            raise ConfigError(f"round index must be in [1, {self.horizon}], got {t}")
        i = t - 1
        return RoundRecord(
            t=t,
            iterate=self.iterates[i],
            adapted=self.adapted[i],
            loss=float(self.losses[i]),
            grad=self.grads[i],
            smoothed_grad=self.smoothed_grads[i],
            step_size=float(self.step_sizes[i]),
        )


def _snapshot(stream, horizon, inner, opt, seed, x0, backend) -> dict:
    spec = stream.spec() if hasattr(stream, "spec") else {"family": "custom"}
    noise = getattr(stream, "noise", None)
    noise_spec = (
        {"kind": noise.kind, "sigma": noise.sigma, "kappa": noise.kappa}
        if noise is not None
        else None
    )
    return {
        "horizon": int(horizon),
        "dim": int(stream.dim),
        "seed": int(seed),
        "stream": spec,
        "noise": noise_spec,
        "adapt": {
            "theta": inner.theta,
            "train_batch": inner.train_batch,
            "test_batch": inner.test_batch,
        },
        "optimizer": {
            "schedule": opt.schedule,
            "eta": opt.eta,
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "epsilon": opt.epsilon,
        },
        "smoothing": {"alpha": opt.alpha, "window": opt.window},
        "init": [float(v) for v in x0],
        "backend": backend,
    }


def run_stream(
    stream,
    horizon: int,
    inner: InnerAdaptConfig,
    opt: OptimizerConfig,
    seed: int,
    x0=None,
    backend: Optional[str] = None,
) -> RunTrace:
    """Play `horizon` rounds of the stream and return the full trace.

    backend None picks the active one (numba when available, else numpy);
    'numpy' forces the portable round-by-round path; 'numba' requires the
    compiled kernels and a sine-family stream. Both produce the same draws
    and the same trajectories up to floating-point associativity.
    """
    from . import backends

    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise ConfigError(f"horizon must be an integer >= 1, got {horizon!r}")
    horizon = int(horizon)
    if x0 is None:
        x0 = np.zeros(stream.dim)
    x0 = as_vector(x0, "x0")
    if x0.size != stream.dim:
        raise DimensionError(f"x0 has length {x0.size}, stream dimension is {stream.dim}")

    chosen = backends.resolve_backend(backend, stream)
    config = _snapshot(stream, horizon, inner, opt, seed, x0, chosen)

    if chosen == "numba":
        arrays = backends.run_stream_arrays(stream, horizon, inner, opt, seed, x0)
        return RunTrace(
            seed=int(seed),
            horizon=horizon,
            dim=stream.dim,
            theta=inner.theta,
            config=config,
            stream=stream,
            **arrays,
        )

    state = make_meta_state(x0, opt)
    T, d = horizon, stream.dim
    iterates = np.empty((T, d))
    adapted = np.empty((T, d))
    losses = np.empty(T)
    grads = np.empty((T, d))
    smoothed = np.empty((T, d))
    steps = np.empty(T)
    for t in range(1, T + 1):
        rng = spawn_rng_stream(seed, t)
        task = stream.task(t)
        state, rec = run_round(state, task, inner, opt, rng)
        i = t - 1
        iterates[i] = rec.iterate
        adapted[i] = rec.adapted
        losses[i] = rec.loss
        grads[i] = rec.grad
        smoothed[i] = rec.smoothed_grad
        steps[i] = rec.step_size
    return RunTrace(
        seed=int(seed),
        horizon=T,
        dim=d,
        theta=inner.theta,
        iterates=iterates,
        adapted=adapted,
        losses=losses,
        grads=grads,
        smoothed_grads=smoothed,
        step_sizes=steps,
        config=config,
        stream=stream,
    )
