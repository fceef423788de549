"""Time-indexed containers, empirical quantiles, and seeded random streams.

Everything downstream exchanges series and forecasts through these types so
that grid mismatches fail loudly instead of silently misaligning steps.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeGrid",
    "TimeSeries",
    "Forecast",
    "RngSeed",
    "empirical_quantile",
    "forecast_quantile_path",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class TimeGrid:
    """A contiguous range of integer steps with a fixed step width in minutes."""

    origin: int
    length: int
    step_minutes: int = 5

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError("grid length must be >= 1")
        if self.step_minutes < 1:
            raise ValueError("step_minutes must be >= 1")

    @property
    def end(self) -> int:
        """First step past the grid."""
        return self.origin + self.length

    def contains(self, step: int) -> bool:
        return self.origin <= step < self.end

    def index_of(self, step: int) -> int:
        if not self.contains(step):
            raise ValueError(f"step {step} outside grid [{self.origin}, {self.end})")
        return step - self.origin


@dataclass(frozen=True)
class TimeSeries:
    """Non-negative real values on a TimeGrid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError("values must be 1-D")
        if len(values) != self.grid.length:
            raise ValueError(
                f"series length {len(values)} does not match grid length {self.grid.length}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("series values must be finite")
        if np.any(values < 0):
            raise ValueError("series values must be >= 0")

    def value_at(self, step: int) -> float:
        return float(self.values[self.grid.index_of(step)])

    def window(self, end_step: int, width: int) -> np.ndarray:
        """Values over the trailing window [end_step - width + 1, end_step]."""
        if width < 1:
            raise ValueError("window width must be >= 1")
        stop = self.grid.index_of(end_step) + 1
        start = max(0, stop - width)
        return self.values[start:stop]


@dataclass(frozen=True)
class Forecast:
    """S sampled demand paths over a horizon grid (samples[s, t])."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 2:
            raise ValueError("samples must be 2-D (S, n)")
        if samples.shape[0] < 1:
            raise ValueError("forecast needs at least one sample path")
        if samples.shape[1] != self.grid.length:
            raise ValueError(
                f"forecast horizon {samples.shape[1]} does not match grid length {self.grid.length}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("forecast samples must be finite")
        if np.any(samples < 0):
            raise ValueError("forecast samples must be >= 0")

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def horizon(self) -> int:
        return int(self.samples.shape[1])


@dataclass(frozen=True)
class RngSeed:
    """A 64-bit master seed plus a stream label.

    Identical (seed, stream_id) pairs always produce identical streams and
    distinct stream_ids produce independent streams, so every stochastic
    component can own a private stream derived from one master seed.
    """

    seed: int
    stream_id: str = "root"

    def __post_init__(self) -> None:
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")

    def child(self, label: str) -> "RngSeed":
        return RngSeed(self.seed, f"{self.stream_id}/{label}")

    def rng(self) -> np.random.Generator:
        # hashlib (not hash()) so streams do not depend on PYTHONHASHSEED
        digest = hashlib.sha256(self.stream_id.encode("utf-8")).digest()
        words = tuple(
            int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)
        )
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=words))


def empirical_quantile(samples, alpha: float) -> float:
    """Lower empirical alpha-quantile: sorted sample at index ceil(alpha*S) - 1.

    No interpolation, so the result is always a member of `samples`.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha out of range (0, 1): {alpha}")
    arr = np.asarray(samples, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("empty distribution")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples must be finite")
    idx = min(max(math.ceil(alpha * arr.size) - 1, 0), arr.size - 1)
    return float(np.partition(arr, idx)[idx])


def forecast_quantile_path(forecast: Forecast, alpha: float) -> np.ndarray:
    """Column-wise lower empirical alpha-quantile across sample paths."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha out of range (0, 1): {alpha}")
    s = forecast.n_samples
    idx = min(max(math.ceil(alpha * s) - 1, 0), s - 1)
    return np.partition(forecast.samples, idx, axis=0)[idx].copy()
