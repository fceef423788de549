"""The four scaling policies behind one planning interface.

* max-window: hold the fleet at the ceiling of the recent demand maximum.
* reactive ("instant"): track gamma times the current demand estimate.
* forecast shifting: follow the forecast's alpha-quantile path, raised just
  enough to respect the throughput limit, with requests submitted one mean
  provisioning delay early.
* optimizing: solve the sample-average stochastic program over the forecast
  and execute its first steps.

Planners are pure functions of a PolicyContext; the policy classes wrap them
with a name, a replanning cadence, and per-replan seed derivation so the
simulation engine can drive any of them interchangeably.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Forecast, RngSeed, TimeSeries, forecast_quantile_path
from .cost import ProviderEstimate, as_alpha
from . import optimizer as _optimizer

__all__ = [
    "PolicyContext",
    "ScalingPlan",
    "PolicyError",
    "minimal_feasible_path",
    "plan_max_window",
    "plan_reactive",
    "plan_forecast_shifting",
    "plan_optimizing",
    "OptimizerConfig",
    "Policy",
    "MaxWindowPolicy",
    "ReactivePolicy",
    "ForecastShiftingPolicy",
    "OptimizingPolicy",
]


class PolicyError(RuntimeError):
    """A policy could not produce a plan."""


@dataclass(frozen=True)
class PolicyContext:
    """Everything a policy may look at when planning at step `now`."""

    now: int
    live_hosts: int
    pending_requests: int
    current_demand_estimate: float
    estimate: ProviderEstimate
    alpha: float
    forecast: Forecast | None = None
    replan_interval: int = 12

    def __post_init__(self) -> None:
        if self.live_hosts < 0 or self.pending_requests < 0:
            raise ValueError("host counts must be >= 0")
        if not self.current_demand_estimate >= 0:
            raise ValueError("current_demand_estimate must be >= 0")
        if self.replan_interval < 1:
            raise ValueError("replan_interval must be >= 1")
        as_alpha(self.alpha)
        if self.forecast is not None and self.forecast.horizon < self.replan_interval:
            raise ValueError("forecast horizon must cover the replan interval")

    @property
    def fleet_commitment(self) -> int:
        """Hosts already live plus requests in flight."""
        return self.live_hosts + self.pending_requests


@dataclass(frozen=True)
class ScalingPlan:
    """Integer per-step actions: q[j] requests and f[j] releases at step start+j."""

    start: int
    q: np.ndarray
    f: np.ndarray

    def __post_init__(self) -> None:
        q = np.asarray(self.q)
        f = np.asarray(self.f)
        for name, a in (("q", q), ("f", f)):
            if a.ndim != 1 or a.size < 1:
                raise ValueError(f"plan {name} must be a non-empty 1-D sequence")
            if not np.issubdtype(a.dtype, np.integer):
                if not np.all(np.asarray(a, dtype=np.float64) == np.floor(np.asarray(a, dtype=np.float64))):
                    raise ValueError(f"plan {name} must be integral")
            if np.any(np.asarray(a, dtype=np.int64) < 0):
                raise ValueError(f"plan {name} must be >= 0")
        q = q.astype(np.int64)
        f = f.astype(np.int64)
        if q.shape != f.shape:
            raise ValueError("plan q and f must have equal length")
        if np.any((q > 0) & (f > 0)):
            raise ValueError("plan must not request and release at the same step")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "f", f)

    def __len__(self) -> int:
        return int(self.q.size)

    def action_at(self, step: int) -> tuple[int, int]:
        """(q, f) this plan schedules for an absolute step; (0, 0) outside it."""
        j = step - self.start
        if 0 <= j < len(self):
            return int(self.q[j]), int(self.f[j])
        return 0, 0


def _one_shot(ctx: PolicyContext, target: int) -> ScalingPlan:
    gap = int(target) - ctx.fleet_commitment
    q0 = max(gap, 0)
    f0 = max(-gap, 0)
    return ScalingPlan(start=ctx.now, q=np.array([q0]), f=np.array([f0]))


def plan_max_window(ctx: PolicyContext, window: int, demand_history: TimeSeries) -> ScalingPlan:
    """Hold the fleet at ceil(max demand over the trailing window).

    The window is clipped to the available history (early in a run there may
    be fewer observations than the nominal window).
    """
    if window < 1:
        raise ValueError("window must be >= 1 step")
    values = demand_history.window(ctx.now, window)
    if values.size == 0:
        raise ValueError("empty window: no demand history at or before now")
    return _one_shot(ctx, math.ceil(float(values.max())))


def plan_reactive(ctx: PolicyContext, gamma: float = 1.0) -> ScalingPlan:
    """Track ceil(gamma * current demand estimate)."""
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    return _one_shot(ctx, math.ceil(gamma * ctx.current_demand_estimate))


def minimal_feasible_path(path, rho_hat: float) -> np.ndarray:
    """Pointwise-minimal path >= `path` that never rises more than rho_hat per step.

    Backward recurrence y[t] = max(path[t], y[t+1] - rho_hat): capacity needed
    later must already be under construction earlier when arrivals are bounded.
    """
    if not rho_hat > 0:
        raise ValueError("rho_hat must be > 0")
    y = np.asarray(path, dtype=np.float64).copy()
    if y.ndim != 1 or y.size < 1:
        raise ValueError("path must be a non-empty 1-D sequence")
    if math.isfinite(rho_hat):
        for i in range(y.size - 2, -1, -1):
            y[i] = max(y[i], y[i + 1] - rho_hat)
    return y


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _cumulative_round(values: np.ndarray) -> np.ndarray:
    """Integerize non-negative values preserving running totals (and the sum)."""
    running = np.rint(np.cumsum(values))
    return np.diff(np.concatenate([[0.0], running])).astype(np.int64)


def plan_forecast_shifting(ctx: PolicyContext, full_distribution: bool = False) -> ScalingPlan:
    """Quantile path -> throughput-feasible envelope -> shifted requests.

    Steps: take the per-step alpha-quantile of the forecast; raise it backward
    so it never climbs faster than rho_hat; ceil to integers; split successive
    differences (the first against live + in-flight hosts) into requests and
    releases; submit each request one expected provisioning delay early
    (clamped into the first plan step), or spread it over the delay
    distribution when full_distribution is set; emit the next replan_interval
    steps.
    """
    fc = ctx.forecast
    if fc is None:
        raise PolicyError("missing forecast: the shifting policy cannot plan without one")
    alpha = as_alpha(ctx.alpha)
    est = ctx.estimate
    zq = forecast_quantile_path(fc, alpha)
    y = minimal_feasible_path(zq, est.rho_hat)
    z2 = np.ceil(y - 1e-9).astype(np.int64)
    n = z2.size

    delta = np.diff(np.concatenate([np.array([ctx.fleet_commitment], dtype=np.int64), z2]))
    up = np.maximum(delta, 0)      # at forecast index j, i.e. plan index j + 1
    down = np.maximum(-delta, 0)

    req = np.zeros(n + 1)
    rel = np.zeros(n + 1, dtype=np.int64)
    rel[1:] += down
    if full_distribution:
        for j in np.nonzero(up)[0]:
            for d, pr in zip(est.delay_hat.delays, est.delay_hat.probs):
                req[max(j + 1 - d, 0)] += up[j] * pr
        req_i = _cumulative_round(req)
    else:
        shift = _round_half_up(est.delay_hat.mean())
        for j in np.nonzero(up)[0]:
            req[max(j + 1 - shift, 0)] += up[j]
        req_i = req.astype(np.int64)

    net = req_i - rel
    k = ctx.replan_interval
    return ScalingPlan(start=ctx.now, q=np.maximum(net, 0)[:k], f=np.maximum(-net, 0)[:k])


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs for the optimizing policy's sample-average program."""

    n_samples: int = 20          # forecast paths used (first rows of the forecast)
    max_iterations: int = 500
    horizon: int | None = None   # plan horizon; None uses the full forecast
    rounding_draws: int = 1      # roundings drawn per replan; best SAA objective wins

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.rounding_draws < 1:
            raise ValueError("rounding_draws must be >= 1")


def plan_optimizing(ctx: PolicyContext, opt_config: OptimizerConfig, seed: RngSeed) -> ScalingPlan:
    """Solve the stochastic program over the forecast; emit its first steps."""
    fc = ctx.forecast
    if fc is None:
        raise PolicyError("missing forecast: the optimizing policy cannot plan without one")
    n_use = fc.horizon
    if opt_config.horizon is not None:
        n_use = min(n_use, max(opt_config.horizon, ctx.replan_interval))
    samples = fc.samples[: opt_config.n_samples, :n_use]
    problem = _optimizer.SaaProblem.from_estimate(
        samples, float(ctx.fleet_commitment), ctx.estimate, as_alpha(ctx.alpha)
    )
    try:
        raw = _optimizer.solve(
            problem,
            k=ctx.replan_interval,
            seed=seed,
            max_iterations=opt_config.max_iterations,
            rounding_draws=opt_config.rounding_draws,
        )
    except _optimizer.OptimizerError as exc:
        raise PolicyError(f"optimizing policy failed at step {ctx.now}: {exc}") from exc
    return ScalingPlan(start=ctx.now, q=raw.q, f=raw.f)


class Policy:
    """Uniform driver interface: a name, a cadence, and plan()."""

    name: str = "policy"
    needs_forecast: bool = False

    def cadence(self, replan_interval: int) -> int:
        """Steps between replans for this policy."""
        return 1

    def plan(self, ctx: PolicyContext, demand_history: TimeSeries) -> tuple[ScalingPlan, dict]:
        raise NotImplementedError


class MaxWindowPolicy(Policy):
    def __init__(self, window: int, name: str | None = None):
        if window < 1:
            raise ValueError("window must be >= 1 step")
        self.window = int(window)
        self.name = name if name is not None else f"max-{window}"

    def plan(self, ctx, demand_history):
        plan = plan_max_window(ctx, self.window, demand_history)
        target = ctx.fleet_commitment + int(plan.q[0]) - int(plan.f[0])
        return plan, {"target": float(target)}


class ReactivePolicy(Policy):
    def __init__(self, gamma: float = 1.0, name: str = "instant"):
        if not gamma > 0:
            raise ValueError("gamma must be > 0")
        self.gamma = float(gamma)
        self.name = name

    def plan(self, ctx, demand_history):
        plan = plan_reactive(ctx, self.gamma)
        target = ctx.fleet_commitment + int(plan.q[0]) - int(plan.f[0])
        return plan, {"target": float(target)}


class ForecastShiftingPolicy(Policy):
    needs_forecast = True

    def __init__(self, full_distribution: bool = False, name: str = "shift"):
        self.full_distribution = bool(full_distribution)
        self.name = name

    def cadence(self, replan_interval: int) -> int:
        return replan_interval

    def plan(self, ctx, demand_history):
        plan = plan_forecast_shifting(ctx, self.full_distribution)
        targets = forecast_quantile_path(ctx.forecast, as_alpha(ctx.alpha))
        return plan, {"target_path": targets}


class OptimizingPolicy(Policy):
    needs_forecast = True

    def __init__(self, config: OptimizerConfig, seed: RngSeed, name: str = "optim"):
        self.config = config
        self.seed = seed
        self.name = name

    def cadence(self, replan_interval: int) -> int:
        return replan_interval

    def plan(self, ctx, demand_history):
        plan = plan_optimizing(ctx, self.config, self.seed.child(f"replan{ctx.now}"))
        targets = forecast_quantile_path(ctx.forecast, as_alpha(ctx.alpha))
        return plan, {"target_path": targets}
