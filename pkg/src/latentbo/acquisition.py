"""UCB acquisition over a finite candidate pool, without replacement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gp

_KINDS = ("constant", "discrete", "continuous")


class PoolExhaustedError(RuntimeError):
    """Every candidate has already been evaluated."""


@dataclass(frozen=True)
class BetaSchedule:
    """Exploration schedule for the UCB score mu + sqrt(beta) * sd.

    kind "constant" uses the fixed ``constant`` value (default 4, the
    practical choice; the theory-driven schedules are conservative).
    kind "discrete" grows with the pool size: 2*log(|Z| t^2 / (6 delta)),
    optionally multiplied inside the log by pi^2 when ``pi2_correction`` is
    set (the union-bound form implied by the appendix argument).
    kind "continuous" is 2*log(pi^2 t^2 / (6 delta)) + 2 d log(L r d t^2)
    for a Lipschitz objective on a radius-r box; L, r, d come from config.
    """

    kind: str = "constant"
    constant: float = 4.0
    pool_size: int = 1
    delta: float = 0.05
    dim: int = 1
    radius: float = 1.0
    lipschitz: float = 1.0
    pi2_correction: bool = False

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if not (math.isfinite(self.constant) and self.constant >= 0):
            raise ValueError(f"constant beta must be >= 0, got {self.constant}")
        if self.pool_size < 1:
            raise ValueError(f"pool_size must be >= 1, got {self.pool_size}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not self.lipschitz > 0:
            raise ValueError(f"lipschitz must be positive, got {self.lipschitz}")


def beta_raw(schedule: BetaSchedule, t: int) -> float:
    """Schedule value before clamping; may be negative at small t."""
    if t < 1:
        raise ValueError(f"iteration must be >= 1, got {t}")
    if schedule.kind == "constant":
        return schedule.constant
    t2 = float(t) * float(t)
    if schedule.kind == "discrete":
        arg = schedule.pool_size * t2 / (6.0 * schedule.delta)
        if schedule.pi2_correction:
            arg *= math.pi**2
        return 2.0 * math.log(arg)
    d = schedule.dim
    first = 2.0 * math.log(math.pi**2 * t2 / (6.0 * schedule.delta))
    second = 2.0 * d * math.log(schedule.lipschitz * schedule.radius * d * t2)
    return first + second


def beta(schedule: BetaSchedule, t: int) -> float:
    """Schedule value clamped below at zero (negative only at small t)."""
    return max(beta_raw(schedule, t), 0.0)


def ucb_score(post: gp.Posterior, beta_value: float) -> np.ndarray:
    """mu + sqrt(beta) * sd for each query point."""
    if not beta_value >= 0:
        raise ValueError(f"beta must be >= 0, got {beta_value}")
    return post.mean + math.sqrt(beta_value) * post.sd


def select(
    pool_latents: np.ndarray,
    state: gp.GPState,
    schedule: BetaSchedule,
    t: int,
    chosen: np.ndarray,
) -> int:
    """Index of the unchosen pool point with maximal UCB; lowest index wins ties.

    ``pool_latents`` are the pool already pushed through the encoder (the
    driver caches them between retrains), ``chosen`` is a boolean mask over
    the pool.
    """
    chosen = np.asarray(chosen, dtype=bool)
    open_idx = np.flatnonzero(~chosen)
    if open_idx.size == 0:
        raise PoolExhaustedError("every pool candidate has been evaluated")
    post = gp.posterior(state, np.asarray(pool_latents)[open_idx])
    scores = ucb_score(post, beta(schedule, t))
    return int(open_idx[int(np.argmax(scores))])
