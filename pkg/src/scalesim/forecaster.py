"""Probabilistic demand forecasters.

Both forecasters return a Forecast of S sampled paths over the horizon
[origin + 1, origin + n]. The noisy oracle is a testing device that corrupts
the true future with relative Gaussian noise; the seasonal empirical
forecaster resamples observed history at the same seasonal phase and never
sees anything past the origin.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Forecast, RngSeed, TimeGrid, TimeSeries

__all__ = [
    "NoisyOracleForecaster",
    "SeasonalEmpiricalForecaster",
    "InsufficientHistoryError",
    "forecast",
]


class InsufficientHistoryError(ValueError):
    """History does not cover what the forecaster needs."""


@dataclass(frozen=True)
class NoisyOracleForecaster:
    """Samples the true future scaled by (1 + eta), eta ~ N(0, sigma_t^2).

    sigma_t interpolates linearly from rel_noise_at_origin at the first
    horizon step to rel_noise_at_horizon at the last.
    """

    rel_noise_at_origin: float
    rel_noise_at_horizon: float
    n_samples: int

    # the engine hands this forecaster the full truth series, not just history
    needs_future = True

    def __post_init__(self) -> None:
        if self.rel_noise_at_origin < 0 or self.rel_noise_at_horizon < 0:
            raise ValueError("relative noise must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def forecast(
        self, truth: TimeSeries, origin: int, horizon_n: int, seed: RngSeed
    ) -> Forecast:
        if horizon_n < 1:
            raise ValueError("horizon_n must be >= 1")
        grid = truth.grid
        if not (grid.contains(origin + 1) and grid.contains(origin + horizon_n)):
            raise InsufficientHistoryError(
                f"truth series does not cover steps {origin + 1}..{origin + horizon_n}"
            )
        i = grid.index_of(origin + 1)
        z = truth.values[i : i + horizon_n]
        if horizon_n == 1:
            sigma = np.array([self.rel_noise_at_origin])
        else:
            sigma = np.linspace(
                self.rel_noise_at_origin, self.rel_noise_at_horizon, horizon_n
            )
        # separate stream per origin so later forecasts never reuse draws
        rng = seed.child(f"origin{origin}").rng()
        eta = rng.standard_normal((self.n_samples, horizon_n)) * sigma
        samples = np.maximum(0.0, z * (1.0 + eta))
        return Forecast(TimeGrid(origin + 1, horizon_n, grid.step_minutes), samples)


@dataclass(frozen=True)
class SeasonalEmpiricalForecaster:
    """Uniform resampling of past observations at the same seasonal phase."""

    season_steps: int
    n_samples: int

    # resamples observed history only; must never be shown the future
    needs_future = False

    def __post_init__(self) -> None:
        if self.season_steps < 1:
            raise ValueError("season_steps must be >= 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def forecast(
        self, history: TimeSeries, origin: int, horizon_n: int, seed: RngSeed
    ) -> Forecast:
        if horizon_n < 1:
            raise ValueError("horizon_n must be >= 1")
        grid = history.grid
        # only observations at or before the origin are admissible donors
        last = min(origin, grid.end - 1)
        n_obs = last - grid.origin + 1
        if n_obs < self.season_steps:
            raise InsufficientHistoryError(
                f"need {self.season_steps} observations up to step {origin}, have {max(n_obs, 0)}"
            )
        obs = history.values[:n_obs]
        obs_steps_mod = (grid.origin + np.arange(n_obs)) % self.season_steps
        rng = seed.child(f"origin{origin}").rng()
        samples = np.empty((self.n_samples, horizon_n), dtype=np.float64)
        donors_by_phase: dict[int, np.ndarray] = {}
        for t in range(horizon_n):
            phase = (origin + 1 + t) % self.season_steps
            donors = donors_by_phase.get(phase)
            if donors is None:
                donors = obs[obs_steps_mod == phase]
                donors_by_phase[phase] = donors
            if donors.size == 0:
                raise InsufficientHistoryError(
                    f"no observation at seasonal phase {phase}"
                )
            samples[:, t] = donors[rng.integers(0, donors.size, self.n_samples)]
        return Forecast(TimeGrid(origin + 1, horizon_n, grid.step_minutes), samples)


def forecast(forecaster, series: TimeSeries, origin: int, horizon_n: int, seed: RngSeed) -> Forecast:
    """Uniform entry point over forecaster kinds."""
    return forecaster.forecast(series, origin, horizon_n, seed)
