"""Variance schedule and closed-form forward noising
``z_t = sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class VarianceSchedule:
    """Per-step noise rates ``betas[0..T-1]`` for steps 1..T.

    ``alpha_bars[t]`` is the product of ``1 - beta_i`` over the first ``t``
    steps, so ``alpha_bars[0] == 1`` and the array has ``T + 1`` entries.
    """

    betas: np.ndarray

    def __post_init__(self):
        b = np.array(self.betas, dtype=np.float64).reshape(-1)
        if b.size == 0:
            raise ScheduleError("schedule needs at least one step")
        if not np.all((b > 0) & (b < 1)):
            raise ScheduleError("every beta must lie strictly between 0 and 1")
        b.setflags(write=False)
        object.__setattr__(self, "betas", b)
        abar = np.empty(b.size + 1)
        abar[0] = 1.0
        acc = 1.0
        for i, beta in enumerate(b, start=1):
            acc *= 1.0 - beta
            abar[i] = acc
        if not abar[-1] > 0:
            raise ScheduleError("cumulative signal level underflowed to zero")
        abar.setflags(write=False)
        object.__setattr__(self, "alpha_bars", abar)

    @property
    def T(self) -> int:
        return self.betas.size

    @classmethod
    def linear(cls, beta_start: float = 1e-4, beta_end: float = 0.02, steps: int = 1000) -> "VarianceSchedule":
        return cls(np.linspace(beta_start, beta_end, steps))

    @classmethod
    def constant(cls, beta: float, steps: int) -> "VarianceSchedule":
        return cls(np.full(steps, beta))


def alpha_bar(schedule: VarianceSchedule, t: int) -> float:
    if int(t) != t or not 0 <= t <= schedule.T:
        raise ScheduleError(f"t must be an integer in [0, {schedule.T}], got {t!r}")
    return float(schedule.alpha_bars[int(t)])


def forward_noise(z0, t: int, eps, schedule: VarianceSchedule) -> np.ndarray:
    z0 = np.asarray(z0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if z0.shape != eps.shape:
        raise ScheduleError(f"latent shape {z0.shape} != noise shape {eps.shape}")
    if not (np.all(np.isfinite(z0)) and np.all(np.isfinite(eps))):
        raise ScheduleError("latents and noise must be finite")
    a = alpha_bar(schedule, t)
    if a == 1.0:
        return z0.copy()
    return np.sqrt(a) * z0 + np.sqrt(1.0 - a) * eps
