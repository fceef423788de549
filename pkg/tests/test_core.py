"""Tests for grids, series, forecasts, quantiles, and seeded streams."""
import math

import numpy as np
import pytest

from scalesim.core import (
    Forecast,
    RngSeed,
    TimeGrid,
    TimeSeries,
    empirical_quantile,
    forecast_quantile_path,
)


def cdf_quantile_oracle(samples, alpha):
    """Independent oracle: smallest sample value whose empirical CDF reaches alpha."""
    arr = sorted(samples)
    n = len(arr)
    for x in arr:
        if sum(1 for v in arr if v <= x) / n >= alpha - 1e-15:
            return x
    return arr[-1]


class TestEmpiricalQuantile:
    def test_even_count_median(self):
        assert empirical_quantile([1, 2, 3, 4], 0.5) == 2

    def test_singleton_any_alpha(self):
        for alpha in (0.01, 0.5, 0.99):
            assert empirical_quantile([5], alpha) == 5

    def test_two_samples_high_alpha(self):
        # oracle: F(0) = 0.5 < 0.9, F(10) = 1.0 >= 0.9
        assert cdf_quantile_oracle([0, 10], 0.9) == 10
        assert empirical_quantile([0, 10], 0.9) == 10

    def test_matches_cdf_oracle_random(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(1, 40))
            samples = rng.normal(0, 10, n).round(2)
            alpha = float(rng.uniform(0.01, 0.99))
            assert empirical_quantile(samples, alpha) == pytest.approx(
                cdf_quantile_oracle(list(samples), alpha)
            )

    def test_monotone_in_alpha_and_membership(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            samples = rng.exponential(5.0, int(rng.integers(1, 30)))
            alphas = np.sort(rng.uniform(0.01, 0.99, 5))
            qs = [empirical_quantile(samples, a) for a in alphas]
            assert all(a <= b for a, b in zip(qs, qs[1:]))
            for q in qs:
                assert q in samples

    def test_unsorted_input(self):
        assert empirical_quantile([9, 1, 5], 0.5) == 5

    def test_errors(self):
        with pytest.raises(ValueError, match="empty distribution"):
            empirical_quantile([], 0.5)
        for bad in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ValueError, match="alpha out of range"):
                empirical_quantile([1.0], bad)
        with pytest.raises(ValueError, match="finite"):
            empirical_quantile([1.0, float("nan")], 0.5)


class TestForecastQuantilePath:
    def test_columnwise(self):
        fc = Forecast(TimeGrid(0, 2), np.array([[1.0, 2.0], [3.0, 1.0]]))
        assert forecast_quantile_path(fc, 0.5).tolist() == [1.0, 1.0]
        assert forecast_quantile_path(fc, 0.9).tolist() == [3.0, 2.0]

    def test_agrees_with_scalar_quantile(self):
        rng = np.random.default_rng(3)
        fc = Forecast(TimeGrid(5, 8), rng.uniform(0, 50, size=(17, 8)))
        for alpha in (0.1, 0.37, 0.5, 0.93):
            path = forecast_quantile_path(fc, alpha)
            expect = [empirical_quantile(fc.samples[:, t], alpha) for t in range(8)]
            assert path.tolist() == pytest.approx(expect)

    def test_alpha_range(self):
        fc = Forecast(TimeGrid(0, 1), np.array([[1.0]]))
        with pytest.raises(ValueError, match="alpha out of range"):
            forecast_quantile_path(fc, 1.0)


class TestContainers:
    def test_grid_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(0, 0)
        with pytest.raises(ValueError):
            TimeGrid(0, 5, step_minutes=0)
        g = TimeGrid(10, 4)
        assert g.end == 14
        assert g.index_of(12) == 2
        with pytest.raises(ValueError, match="outside grid"):
            g.index_of(14)

    def test_series_validation(self):
        g = TimeGrid(0, 3)
        ts = TimeSeries(g, [1.0, 2.0, 0.0])
        assert ts.value_at(1) == 2.0
        with pytest.raises(ValueError, match="length"):
            TimeSeries(g, [1.0, 2.0])
        with pytest.raises(ValueError, match=">= 0"):
            TimeSeries(g, [1.0, -0.1, 0.0])
        with pytest.raises(ValueError, match="finite"):
            TimeSeries(g, [1.0, float("inf"), 0.0])

    def test_series_window(self):
        ts = TimeSeries(TimeGrid(0, 6), np.arange(6.0))
        assert ts.window(4, 3).tolist() == [2.0, 3.0, 4.0]
        assert ts.window(1, 10).tolist() == [0.0, 1.0]  # clipped at series start

    def test_forecast_validation(self):
        g = TimeGrid(1, 2)
        fc = Forecast(g, [[1.0, 2.0]])
        assert fc.n_samples == 1 and fc.horizon == 2
        with pytest.raises(ValueError, match="horizon"):
            Forecast(g, [[1.0, 2.0, 3.0]])
        with pytest.raises(ValueError, match=">= 0"):
            Forecast(g, [[1.0, -2.0]])


class TestRngSeed:
    def test_same_stream_identical(self):
        a = RngSeed(42, "workload").rng().normal(size=100)
        b = RngSeed(42, "workload").rng().normal(size=100)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngSeed(42, "workload").rng().normal(size=100)
        b = RngSeed(42, "forecast").rng().normal(size=100)
        assert not np.array_equal(a, b)

    def test_distinct_seeds_differ(self):
        a = RngSeed(1).rng().normal(size=50)
        b = RngSeed(2).rng().normal(size=50)
        assert not np.array_equal(a, b)

    def test_child_derivation_stable(self):
        s = RngSeed(7, "engine")
        assert s.child("provider") == RngSeed(7, "engine/provider")
        a = s.child("provider").rng().integers(0, 1000, 20)
        b = RngSeed(7, "engine/provider").rng().integers(0, 1000, 20)
        assert np.array_equal(a, b)

    def test_seed_bounds(self):
        with pytest.raises(ValueError):
            RngSeed(-1)
        with pytest.raises(ValueError):
            RngSeed(1 << 64)
