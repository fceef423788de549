"""Synthetic workload generation and the workload -> demand model.

A workload series v is built from a base level, daily and weekly sinusoids,
a linear trend, and iid Gaussian noise. Demand in host units is z = xi * v.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RngSeed, TimeGrid, TimeSeries

__all__ = ["WorkloadRecipe", "WorkloadModel", "generate_workload", "demand_from_workload"]


@dataclass(frozen=True)
class WorkloadRecipe:
    """Parameters of the synthetic workload generator."""

    base_level: float
    daily_amplitude: float = 0.0
    weekly_amplitude: float = 0.0
    trend_per_step: float = 0.0
    noise_sigma: float = 0.0
    len_steps: int = 288
    step_minutes: int = 5
    floor_at_zero: bool = True

    def __post_init__(self) -> None:
        if self.base_level <= 0:
            raise ValueError("base_level must be > 0")
        if self.daily_amplitude < 0 or self.weekly_amplitude < 0:
            raise ValueError("amplitudes must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.len_steps < 1:
            raise ValueError("len_steps must be >= 1")
        if self.step_minutes < 1:
            raise ValueError("step_minutes must be >= 1")


@dataclass(frozen=True)
class WorkloadModel:
    """Linear workload-to-host-count model z = xi * v."""

    xi: float = 1.0

    def __post_init__(self) -> None:
        if self.xi <= 0:
            raise ValueError("xi must be > 0")


def generate_workload(recipe: WorkloadRecipe, seed: RngSeed) -> TimeSeries:
    """Generate v_t = base + daily + weekly + trend*t + noise, floored at zero.

    With floor_at_zero disabled a strongly negative draw will fail TimeSeries
    validation; that is intentional (the recipe is then unusable as demand).
    """
    t = np.arange(recipe.len_steps, dtype=np.float64)
    steps_per_day = 1440.0 / recipe.step_minutes
    steps_per_week = 7.0 * steps_per_day
    v = np.full(recipe.len_steps, recipe.base_level, dtype=np.float64)
    v += recipe.daily_amplitude * np.sin(2.0 * np.pi * t / steps_per_day)
    v += recipe.weekly_amplitude * np.sin(2.0 * np.pi * t / steps_per_week)
    v += recipe.trend_per_step * t
    if recipe.noise_sigma > 0:
        v += seed.rng().normal(0.0, recipe.noise_sigma, recipe.len_steps)
    if recipe.floor_at_zero:
        np.maximum(v, 0.0, out=v)
    return TimeSeries(TimeGrid(0, recipe.len_steps, recipe.step_minutes), v)


def demand_from_workload(model: WorkloadModel, workload: TimeSeries) -> TimeSeries:
    """Scale a workload series into desired host counts on the same grid."""
    return TimeSeries(workload.grid, model.xi * workload.values)
