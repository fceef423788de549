"""Tests for the scaling policies: plan/context validation, the one-shot
planners, the throughput-feasible envelope (against a brute-force oracle),
forecast shifting with delay-aware request placement, and the optimizing
policy's end-to-end planning path."""
import math

import numpy as np
import pytest

from scalesim.core import Forecast, RngSeed, TimeGrid, TimeSeries
from scalesim.cost import ProviderEstimate
from scalesim.policies import (
    ForecastShiftingPolicy,
    MaxWindowPolicy,
    OptimizerConfig,
    OptimizingPolicy,
    PolicyContext,
    PolicyError,
    ReactivePolicy,
    ScalingPlan,
    minimal_feasible_path,
    plan_forecast_shifting,
    plan_max_window,
    plan_optimizing,
    plan_reactive,
)
from scalesim.provider import DelayDistribution


def det_est(delay: int, rho: float = math.inf) -> ProviderEstimate:
    return ProviderEstimate(DelayDistribution.deterministic(delay), rho)


def make_forecast(paths) -> Forecast:
    paths = np.atleast_2d(np.asarray(paths, dtype=np.float64))
    return Forecast(TimeGrid(origin=1, length=paths.shape[1]), paths)


def make_ctx(
    now=0,
    live=0,
    pending=0,
    demand=0.0,
    est=None,
    alpha=0.9,
    forecast=None,
    replan_interval=12,
) -> PolicyContext:
    return PolicyContext(
        now=now,
        live_hosts=live,
        pending_requests=pending,
        current_demand_estimate=demand,
        estimate=est if est is not None else det_est(0),
        alpha=alpha,
        forecast=forecast,
        replan_interval=replan_interval,
    )


class TestScalingPlan:
    def test_rejects_bad_shapes_and_values(self):
        with pytest.raises(ValueError):
            ScalingPlan(start=0, q=np.array([]), f=np.array([]))
        with pytest.raises(ValueError):
            ScalingPlan(start=0, q=np.array([[1]]), f=np.array([[0]]))
        with pytest.raises(ValueError):
            ScalingPlan(start=0, q=np.array([1.5]), f=np.array([0.0]))
        with pytest.raises(ValueError):
            ScalingPlan(start=0, q=np.array([-1]), f=np.array([0]))
        with pytest.raises(ValueError):
            ScalingPlan(start=0, q=np.array([1, 0]), f=np.array([0]))

    def test_rejects_request_and_release_at_same_step(self):
        with pytest.raises(ValueError):
            ScalingPlan(start=0, q=np.array([2, 0]), f=np.array([1, 0]))

    def test_accepts_integral_floats_and_indexes_by_absolute_step(self):
        plan = ScalingPlan(start=10, q=np.array([2.0, 0.0]), f=np.array([0.0, 3.0]))
        assert len(plan) == 2
        assert plan.q.dtype == np.int64
        assert plan.action_at(10) == (2, 0)
        assert plan.action_at(11) == (0, 3)
        assert plan.action_at(9) == (0, 0)
        assert plan.action_at(12) == (0, 0)


class TestPolicyContext:
    def test_rejects_negative_counts_and_bad_cadence(self):
        with pytest.raises(ValueError):
            make_ctx(live=-1)
        with pytest.raises(ValueError):
            make_ctx(pending=-1)
        with pytest.raises(ValueError):
            make_ctx(demand=-0.5)
        with pytest.raises(ValueError):
            make_ctx(replan_interval=0)

    def test_forecast_must_cover_replan_interval(self):
        with pytest.raises(ValueError):
            make_ctx(forecast=make_forecast(np.ones((2, 4))), replan_interval=6)

    def test_fleet_commitment_sums_live_and_pending(self):
        assert make_ctx(live=80, pending=5).fleet_commitment == 85


class TestMaxWindowPlanner:
    def history(self, values):
        values = np.asarray(values, dtype=np.float64)
        return TimeSeries(TimeGrid(origin=0, length=values.size), values)

    def test_scales_up_to_window_max(self):
        # trailing-day max 100 vs 80 live + 5 pending: request the 15 missing
        hist = self.history([40, 100, 70, 60])
        plan = plan_max_window(make_ctx(now=3, live=80, pending=5), 4, hist)
        assert (int(plan.q[0]), int(plan.f[0])) == (15, 0)
        assert plan.start == 3 and len(plan) == 1

    def test_scales_down_when_over_target(self):
        hist = self.history([40, 100, 70, 60])
        plan = plan_max_window(make_ctx(now=3, live=120), 4, hist)
        assert (int(plan.q[0]), int(plan.f[0])) == (0, 20)

    def test_window_is_trailing_and_ceiled(self):
        # only the last two observations are in view, and 69.2 rounds up
        hist = self.history([100, 50, 69.2, 30])
        plan = plan_max_window(make_ctx(now=3, live=0), 2, hist)
        assert (int(plan.q[0]), int(plan.f[0])) == (70, 0)

    def test_window_clips_to_available_history(self):
        hist = self.history([40, 90])
        plan = plan_max_window(make_ctx(now=1, live=0), 1000, hist)
        assert int(plan.q[0]) == 90

    def test_rejects_bad_window_or_missing_history(self):
        hist = self.history([40, 90])
        with pytest.raises(ValueError):
            plan_max_window(make_ctx(now=1), 0, hist)
        with pytest.raises(ValueError):
            plan_max_window(make_ctx(now=99), 4, hist)


class TestReactivePlanner:
    def test_tracks_ceiling_of_current_demand(self):
        plan = plan_reactive(make_ctx(live=5, demand=7.3))
        assert (int(plan.q[0]), int(plan.f[0])) == (3, 0)

    def test_gamma_scales_the_target(self):
        plan = plan_reactive(make_ctx(live=0, demand=10.0), gamma=1.3)
        assert int(plan.q[0]) == 13

    def test_zero_demand_releases_everything(self):
        plan = plan_reactive(make_ctx(live=6, pending=2, demand=0.0))
        assert (int(plan.q[0]), int(plan.f[0])) == (0, 8)

    def test_rejects_nonpositive_gamma(self):
        with pytest.raises(ValueError):
            plan_reactive(make_ctx(), gamma=0.0)


def envelope_oracle(path: np.ndarray, rho_hat: float) -> np.ndarray:
    """O(n^2) reference: y_t = max_{j >= t} (path_j - rho_hat * (j - t))."""
    n = path.size
    return np.array(
        [max(path[j] - rho_hat * (j - t) for j in range(t, n)) for t in range(n)]
    )


class TestMinimalFeasiblePath:
    def test_worked_example(self):
        out = minimal_feasible_path(np.array([1.0, 5.0, 2.0]), 2.0)
        assert np.array_equal(out, [3.0, 5.0, 2.0])

    def test_unbounded_throughput_is_identity(self):
        path = np.array([4.0, 1.0, 9.0])
        assert np.array_equal(minimal_feasible_path(path, math.inf), path)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            minimal_feasible_path(np.array([1.0]), 0.0)
        with pytest.raises(ValueError):
            minimal_feasible_path(np.array([]), 1.0)
        with pytest.raises(ValueError):
            minimal_feasible_path(np.ones((2, 2)), 1.0)

    def test_matches_brute_force_on_random_paths(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(1, 12))
            path = rng.uniform(0, 20, size=n)
            rho = float(rng.choice([0.5, 1.0, 2.5, 7.0]))
            out = minimal_feasible_path(path, rho)
            assert np.allclose(out, envelope_oracle(path, rho), atol=1e-12)
            # never rises faster than the throughput bound, never dips below demand
            assert np.all(np.diff(out) <= rho + 1e-12)
            assert np.all(out >= path - 1e-12)


class TestForecastShifting:
    def test_requires_forecast(self):
        with pytest.raises(PolicyError):
            plan_forecast_shifting(make_ctx(replan_interval=4))

    def test_instant_delivery_tracks_quantile_path(self):
        fc = make_forecast([5.0, 8.0, 3.0, 7.0])
        ctx = make_ctx(live=4, est=det_est(0), forecast=fc, replan_interval=4)
        plan = plan_forecast_shifting(ctx)
        assert np.array_equal(plan.q, [0, 1, 3, 0])
        assert np.array_equal(plan.f, [0, 0, 0, 5])

    def test_requests_shift_earlier_by_mean_delay(self):
        fc = make_forecast([5.0, 8.0, 3.0, 7.0])
        ctx = make_ctx(live=4, est=det_est(2), forecast=fc, replan_interval=4)
        plan = plan_forecast_shifting(ctx)
        # the step-1 and step-2 increments both clamp into the first slot
        assert np.array_equal(plan.q, [4, 0, 4, 0])
        assert np.array_equal(plan.f, [0, 0, 0, 5])

    def test_mean_delay_rounds_half_up(self):
        fc = make_forecast([3.0, 3.0, 3.0, 9.0])
        est = ProviderEstimate(DelayDistribution((1, 2), (0.5, 0.5)), math.inf)
        ctx = make_ctx(live=3, est=est, forecast=fc, replan_interval=4)
        plan = plan_forecast_shifting(ctx)
        # increment needed at plan step 4, submitted 2 steps early (mean 1.5)
        assert np.array_equal(plan.q, [0, 0, 6, 0])

    def test_steady_forecast_changes_nothing(self):
        fc = make_forecast(np.full((3, 6), 11.0))
        ctx = make_ctx(live=11, est=det_est(3), forecast=fc, replan_interval=6)
        plan = plan_forecast_shifting(ctx)
        assert not plan.q.any() and not plan.f.any()

    def test_respects_throughput_envelope(self):
        fc = make_forecast([0.0, 0.0, 6.0, 0.0])
        est = det_est(0, rho=2.0)
        ctx = make_ctx(live=0, est=est, forecast=fc, replan_interval=4)
        plan = plan_forecast_shifting(ctx)
        assert np.array_equal(plan.q, [0, 2, 2, 2])
        assert int(plan.q.max()) <= 2

    def test_full_distribution_spreads_and_preserves_mass(self):
        fc = make_forecast([2.0, 2.0, 2.0, 5.0, 5.0, 5.0])
        est = ProviderEstimate(DelayDistribution((0, 2), (0.5, 0.5)), math.inf)
        ctx = make_ctx(live=2, est=est, forecast=fc, replan_interval=6)
        plan = plan_forecast_shifting(ctx, full_distribution=True)
        assert int(plan.q.sum()) == 3  # the +3 step split over the delay law
        assert int(plan.f.sum()) == 0
        # half the mass submitted 2 steps before the increment, half at it
        assert np.array_equal(np.nonzero(plan.q)[0], [2, 4])

    def test_plan_never_requests_and_releases_together(self):
        fc = make_forecast([3.0, 1.0, 3.0, 3.0])
        ctx = make_ctx(live=3, est=det_est(1), forecast=fc, replan_interval=4)
        plan = plan_forecast_shifting(ctx)
        # shifted request meets the release at one step; they net out
        assert not np.any((plan.q > 0) & (plan.f > 0))
        assert np.array_equal(plan.q - plan.f, [0, 0, 0, 0])


class TestOptimizingPlanner:
    def test_requires_forecast(self):
        with pytest.raises(PolicyError):
            plan_optimizing(make_ctx(replan_interval=4), OptimizerConfig(), RngSeed(1))

    def test_perfect_information_tracks_demand(self):
        z = [3.0, 7.0, 2.0, 5.0]
        ctx = make_ctx(live=0, est=det_est(0), forecast=make_forecast(z), replan_interval=4)
        plan = plan_optimizing(ctx, OptimizerConfig(), RngSeed(3))
        fleet = np.cumsum(plan.q - plan.f)
        assert np.array_equal(fleet[1:], z[:3])
        assert plan.start == ctx.now and len(plan) == 4

    def test_deterministic_given_seed(self):
        paths = np.random.default_rng(9).uniform(0, 20, size=(6, 8))
        ctx = make_ctx(
            live=4, est=det_est(1, rho=5.0), forecast=Forecast(TimeGrid(1, 8), paths),
            replan_interval=8, alpha=0.8,
        )
        p1 = plan_optimizing(ctx, OptimizerConfig(), RngSeed(17, "opt"))
        p2 = plan_optimizing(ctx, OptimizerConfig(), RngSeed(17, "opt"))
        assert np.array_equal(p1.q, p2.q) and np.array_equal(p1.f, p2.f)

    def test_plan_length_follows_replan_interval(self):
        paths = np.random.default_rng(2).uniform(0, 9, size=(3, 10))
        ctx = make_ctx(forecast=Forecast(TimeGrid(1, 10), paths), replan_interval=5)
        plan = plan_optimizing(ctx, OptimizerConfig(horizon=2), RngSeed(3))
        assert len(plan) == 5

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(n_samples=0)
        with pytest.raises(ValueError):
            OptimizerConfig(max_iterations=0)
        with pytest.raises(ValueError):
            OptimizerConfig(horizon=0)


class TestPolicyClasses:
    def test_names_cadence_and_forecast_needs(self):
        maxw = MaxWindowPolicy(288)
        inst = ReactivePolicy()
        shift = ForecastShiftingPolicy()
        optim = OptimizingPolicy(OptimizerConfig(), RngSeed(1))
        assert maxw.name == "max-288" and inst.name == "instant"
        assert shift.name == "shift" and optim.name == "optim"
        assert (maxw.needs_forecast, inst.needs_forecast) == (False, False)
        assert (shift.needs_forecast, optim.needs_forecast) == (True, True)
        assert maxw.cadence(12) == 1 and inst.cadence(12) == 1
        assert shift.cadence(12) == 12 and optim.cadence(12) == 12

    def test_plan_wrappers_report_their_targets(self):
        hist = TimeSeries(TimeGrid(0, 4), np.array([40.0, 100.0, 70.0, 60.0]))
        ctx = make_ctx(now=3, live=80, pending=5, demand=60.0)
        plan, info = MaxWindowPolicy(4).plan(ctx, hist)
        assert info["target"] == 100.0 and int(plan.q[0]) == 15
        plan, info = ReactivePolicy().plan(ctx, hist)
        assert info["target"] == 60.0 and int(plan.f[0]) == 25

    def test_shift_and_optim_report_the_quantile_path(self):
        fc = make_forecast(np.vstack([np.arange(6.0) + k for k in range(5)]))
        ctx = make_ctx(live=3, forecast=fc, replan_interval=6, alpha=0.8)
        hist = TimeSeries(TimeGrid(0, 1), np.array([3.0]))
        _, info_s = ForecastShiftingPolicy().plan(ctx, hist)
        _, info_o = OptimizingPolicy(OptimizerConfig(), RngSeed(5)).plan(ctx, hist)
        expected = np.arange(6.0) + 3  # 0.8-quantile of 5 paths = 4th smallest
        assert np.array_equal(info_s["target_path"], expected)
        assert np.array_equal(info_o["target_path"], expected)

    def test_optimizing_policy_derives_a_fresh_stream_per_replan(self):
        paths = np.random.default_rng(4).uniform(0, 30, size=(8, 6))
        pol = OptimizingPolicy(OptimizerConfig(), RngSeed(23, "run"))
        hist = TimeSeries(TimeGrid(0, 20), np.zeros(20))
        ctx_a = make_ctx(now=0, live=2, forecast=Forecast(TimeGrid(1, 6), paths), replan_interval=6)
        ctx_b = make_ctx(now=12, live=2, forecast=Forecast(TimeGrid(13, 6), paths), replan_interval=6)
        plan_a1, _ = pol.plan(ctx_a, hist)
        plan_a2, _ = pol.plan(ctx_a, hist)
        plan_b, _ = pol.plan(ctx_b, hist)
        assert np.array_equal(plan_a1.q, plan_a2.q) and np.array_equal(plan_a1.f, plan_a2.f)
        assert plan_b.start == 12
