"""Time-smoothed adaptive gradient optimizer.

The update keeps exponential moving estimates (m, v) of the smoothed
stochastic gradient and its square and steps coordinate-wise:

    g~_t = (1/W) sum_{r < min(t,w)} alpha^r g_{t-r}(x_{t-r}, fresh noise)
    m <- beta1 m + g~_t;   v <- beta2 v + g~_t^2
    x <- x - eta_{t+1} * m / sqrt(epsilon + v)

W = sum_{r<w} alpha^r always uses the full window length, so early rounds
with short history are damped rather than rescaled. Two presets are
provided: an accumulating one (beta1 = 0, beta2 = 1, constant step size)
and a momentum one (0 < beta1 < beta2 < 1) with the increasing schedule
eta_{t+1} = eta (1-beta1) sqrt((1-beta2^{t+1})/(1-beta2)).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import ConfigError, DimensionError, NumericError, RngStream, as_vector
from .tasks import NoiseModel

__all__ = [
    "CONSTANT",
    "ADAM_SCHEDULE",
    "OptimizerConfig",
    "OptimizerState",
    "SmoothingWindow",
    "make_state",
    "make_config_adagrad",
    "make_config_adam",
    "weight_sum_W",
    "alpha_weights",
    "smoothed_stochastic_gradient",
    "step_size_at",
    "dts_ag_step",
]

CONSTANT = "constant"
ADAM_SCHEDULE = "adam"
_SCHEDULES = (CONSTANT, ADAM_SCHEDULE)


@dataclass(frozen=True)
class OptimizerConfig:
    """Hyperparameters of the smoothed adaptive update."""

    eta: float
    beta1: float
    beta2: float
    epsilon: float
    schedule: str
    window: int
    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise ConfigError(f"eta must be positive and finite, got {self.eta}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not (0.0 <= self.beta1 < self.beta2 <= 1.0):
            raise ConfigError(
                f"need 0 <= beta1 < beta2 <= 1, got beta1={self.beta1}, beta2={self.beta2}"
            )
        if self.schedule not in _SCHEDULES:
            raise ConfigError(f"schedule must be one of {_SCHEDULES}, got {self.schedule!r}")
        if self.schedule == ADAM_SCHEDULE and not (0.0 < self.beta1 < self.beta2 < 1.0):
            raise ConfigError(
                "the increasing-step schedule requires 0 < beta1 < beta2 < 1, "
                f"got beta1={self.beta1}, beta2={self.beta2}"
            )
        if not isinstance(self.window, (int, np.integer)) or self.window < 1:
            raise ConfigError(f"window must be an integer >= 1, got {self.window!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")


def make_config_adagrad(
    eta: float, epsilon: float = 1e-8, alpha: float = 1.0, window: int = 1
) -> OptimizerConfig:
    """Accumulating preset: beta1 = 0, beta2 = 1, constant step size."""
    return OptimizerConfig(
        eta=eta, beta1=0.0, beta2=1.0, epsilon=epsilon,
        schedule=CONSTANT, window=int(window), alpha=alpha,
    )


def make_config_adam(
    eta: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
    alpha: float = 1.0,
    window: int = 1,
) -> OptimizerConfig:
    """Momentum preset with the increasing step-size schedule."""
    return OptimizerConfig(
        eta=eta, beta1=beta1, beta2=beta2, epsilon=epsilon,
        schedule=ADAM_SCHEDULE, window=int(window), alpha=alpha,
    )


@dataclass(frozen=True, eq=False)
class OptimizerState:
    """Moment estimates and the 1-based round counter."""

    m: np.ndarray
    v: np.ndarray
    t: int

    def __post_init__(self):
        if self.m.shape != self.v.shape or self.m.ndim != 1:
            raise DimensionError(
                f"m and v must be 1-D with equal shape, got {self.m.shape} and {self.v.shape}"
            )
        if self.t < 1:
            raise ConfigError(f"round counter starts at 1, got {self.t}")
        if np.any(self.v < 0):
            raise ConfigError("v must be coordinate-wise non-negative")


def make_state(dim: int) -> OptimizerState:
    """Fresh state: zero moments, round counter 1."""
    if dim < 1:
        raise ConfigError(f"dim must be >= 1, got {dim}")
    return OptimizerState(m=np.zeros(dim), v=np.zeros(dim), t=1)


def weight_sum_W(alpha: float, window: int) -> float:
    """W = sum_{r=0}^{w-1} alpha^r, with the exact value w at alpha = 1."""
    if not (0.0 < alpha <= 1.0):
        raise ConfigError(f"alpha must be in (0, 1], got {alpha}")
    if not isinstance(window, (int, np.integer)) or window < 1:
        raise ConfigError(f"window must be an integer >= 1, got {window!r}")
    if alpha == 1.0:
        return float(window)
    return (1.0 - alpha ** int(window)) / (1.0 - alpha)


def alpha_weights(alpha: float, window: int) -> np.ndarray:
    """The weight vector (alpha^0, ..., alpha^(w-1))."""
    if not (0.0 < alpha <= 1.0):
        raise ConfigError(f"alpha must be in (0, 1], got {alpha}")
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    return alpha ** np.arange(window, dtype=np.float64)


class _Slot:
    __slots__ = ("iterate", "handle", "grad")

    def __init__(self, iterate, handle, grad):
        self.iterate = iterate
        self.handle = handle
        self.grad = grad


class SmoothingWindow:
    """Ring buffer of the last w (iterate, round-loss) pairs, newest first.

    Each slot keeps the loss handle (so past losses can be re-evaluated at
    new points) plus that slot's exact gradient at its own iterate, computed
    once at push time; the gradient of a fixed loss at a fixed point is
    deterministic, and stochasticity is injected per query, not per slot.
    """

    def __init__(self, alpha: float, window: int):
        self.weights = alpha_weights(alpha, window)
        self.alpha = float(alpha)
        self.window = int(window)
        self.weight_sum = weight_sum_W(alpha, window)
        self._slots: deque[_Slot] = deque(maxlen=self.window)

    @property
    def occupied(self) -> int:
        return len(self._slots)

    def __len__(self) -> int:
        return len(self._slots)

    def push(self, iterate, handle, grad: Optional[np.ndarray] = None) -> None:
        """Insert the newest (iterate, loss) pair, evicting the oldest if full."""
        x = as_vector(iterate, "iterate")
        g = handle.grad(x) if grad is None else as_vector(grad, "grad")
        if g.shape != x.shape:
            raise DimensionError(
                f"gradient shape {g.shape} does not match iterate shape {x.shape}"
            )
        self._slots.appendleft(_Slot(x, handle, np.asarray(g, dtype=np.float64)))

    def slot(self, r: int) -> _Slot:
        """Slot r rounds back (r = 0 is the current round's pair)."""
        return self._slots[r]

    def iterates(self) -> np.ndarray:
        return np.stack([s.iterate for s in self._slots])

    def gradient_matrix(self) -> np.ndarray:
        """Stacked per-slot exact gradients, newest first, shape (occupied, dim)."""
        return np.stack([s.grad for s in self._slots])


def smoothed_stochastic_gradient(
    window: SmoothingWindow, noise: NoiseModel, rng: RngStream
) -> np.ndarray:
    """Noisy geometrically-weighted average over the window's slots.

    Each occupied slot contributes its exact gradient plus a fresh noise
    draw (one batched draw per call, newest slot first); the weighted sum is
    divided by the full-window W even when history is short.
    """
    occ = window.occupied
    if occ == 0:
        raise DimensionError("window is empty; push at least one round first")
    G = window.gradient_matrix()
    if not noise.is_exact:
        G = G + noise.draw(rng, G.shape[1], reps=occ)
    weighted = window.weights[:occ, None] * G
    return weighted.sum(axis=0) / window.weight_sum


def step_size_at(config: OptimizerConfig, t: int) -> float:
    """Step size consumed by round t (t >= 0 accepted; round t uses index t+1).

    Constant schedule returns eta. The increasing schedule returns
    eta (1-beta1) sqrt((1-beta2^(t+1)) / (1-beta2)), which is exactly
    eta (1-beta1) at t = 0.
    """
    if not isinstance(t, (int, np.integer)) or t < 0:
        raise ConfigError(f"t must be an integer >= 0, got {t!r}")
    if config.schedule == CONSTANT:
        return config.eta
    if config.beta2 >= 1.0:
        raise ConfigError("the increasing-step schedule requires beta2 < 1")
    num = 1.0 - config.beta2 ** (int(t) + 1)
    return config.eta * (1.0 - config.beta1) * math.sqrt(num / (1.0 - config.beta2))


def dts_ag_step(
    state: OptimizerState,
    config: OptimizerConfig,
    iterate,
    smoothed_grad,
) -> tuple[np.ndarray, OptimizerState]:
    """One optimizer update; returns (new iterate, new state).

    Moments update before the step: m <- beta1 m + g~, v <- beta2 v + g~^2,
    then x <- x - eta_{t+1} m / sqrt(epsilon + v) coordinate-wise.
    """
    x = as_vector(iterate, "iterate")
    gt = as_vector(smoothed_grad, "smoothed gradient")
    if x.shape != gt.shape or x.shape != state.m.shape:
        raise DimensionError(
            f"shape mismatch: iterate {x.shape}, gradient {gt.shape}, state {state.m.shape}"
        )
    m = config.beta1 * state.m + gt
    v = config.beta2 * state.v + gt * gt
    eta_t = step_size_at(config, state.t)
    x_new = x - eta_t * m / np.sqrt(config.epsilon + v)
    if not np.all(np.isfinite(x_new)):
        bad = int(np.flatnonzero(~np.isfinite(x_new))[0])
        raise NumericError(
            f"update produced a non-finite iterate at coordinate {bad} (round {state.t})"
        )
    return x_new, OptimizerState(m=m, v=v, t=state.t + 1)
