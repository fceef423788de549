"""Receding-horizon simulation loop tying workload, forecaster, policy, and provider.

`run(scenario)` advances one fleet through time: at every replan boundary the
policy (optionally fed a fresh probabilistic forecast) emits a plan for the
next interval, overriding the previous plan; every step the engine submits
that step's requests/releases, ticks the provider, and records state plus the
asymmetric step loss against realized demand. Warmup steps are recorded but
excluded from the reported total so history-dependent baselines and
forecasters start fairly.

Everything is deterministic given the scenario's master seed: the workload,
the provider's delay draws, and each forecast draw come from fixed derived
streams ("workload", "provider", "forecaster").
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from .core import RngSeed, TimeGrid, TimeSeries
from .cost import ProviderEstimate, as_alpha, pinball_loss
from .forecaster import InsufficientHistoryError, forecast
from .policies import Policy, PolicyContext, PolicyError, ScalingPlan
from .provider import DelayDistribution, Provider, ProviderConfig
from .workload import WorkloadModel, WorkloadRecipe, demand_from_workload, generate_workload

__all__ = [
    "Scenario",
    "SimulationTrace",
    "SimulationError",
    "PolicyStats",
    "LossReport",
    "run",
    "evaluate",
    "replay_live_hosts",
    "verify_replay",
    "write_trace_csv",
    "read_trace_csv",
    "steps_per_day",
    "TRACE_SCHEMA",
]

TRACE_SCHEMA = "scalesim-trace-v1"
TRACE_COLUMNS = (
    "t",
    "workload",
    "demand",
    "target",
    "live_hosts",
    "pending",
    "q",
    "f",
    "arrivals",
    "step_loss",
)
_INT_COLUMNS = frozenset({"t", "live_hosts", "pending", "q", "f", "arrivals"})


def steps_per_day(step_minutes: int) -> int:
    """Number of simulation steps per simulated day at this granularity."""
    return max(1, round(1440 / step_minutes))


class SimulationError(RuntimeError):
    """A policy or forecaster failed mid-run; `partial_trace` holds the steps so far."""

    def __init__(self, message: str, partial_trace: "SimulationTrace"):
        super().__init__(message)
        self.partial_trace = partial_trace


@dataclass(frozen=True)
class Scenario:
    """One complete, reproducible experiment: world, beliefs, policy, clock, seed."""

    recipe: WorkloadRecipe
    model: WorkloadModel
    forecaster: object
    provider_config: ProviderConfig
    estimate: ProviderEstimate
    policy: Policy
    alpha: float
    seed: RngSeed
    horizon_n: int = 576
    replan_interval: int = 12
    warmup_steps: int | None = None   # None -> one week of steps
    sim_length: int | None = None     # None -> warmup + two weeks (warmup included)
    initial_fleet: int | None = None  # None -> ceil(demand at t=0)
    name: str = ""

    def __post_init__(self) -> None:
        as_alpha(self.alpha)
        if self.replan_interval < 1:
            raise ValueError("replan_interval must be >= 1")
        if self.horizon_n < self.replan_interval:
            raise ValueError("horizon_n must be >= replan_interval")
        spd = steps_per_day(self.recipe.step_minutes)
        if self.warmup_steps is None:
            object.__setattr__(self, "warmup_steps", 7 * spd)
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.sim_length is None:
            object.__setattr__(self, "sim_length", self.warmup_steps + 14 * spd)
        if not self.sim_length > self.warmup_steps:
            raise ValueError("sim_length must exceed warmup_steps")
        if self.initial_fleet is not None and self.initial_fleet < 0:
            raise ValueError("initial_fleet must be >= 0")
        if self.policy.needs_forecast and self.forecaster is None:
            raise ValueError(
                f"policy {self.policy.name!r} needs a forecast but no forecaster is configured"
            )
        needed = self.sim_length
        if self.policy.needs_forecast and getattr(self.forecaster, "needs_future", False):
            needed += self.horizon_n
        if self.recipe.len_steps < needed:
            raise ValueError(
                f"recipe.len_steps={self.recipe.len_steps} too short: this scenario "
                f"needs {needed} steps of workload (sim_length"
                + (" + horizon_n for the oracle forecaster" if needed > self.sim_length else "")
                + ")"
            )

    def config_echo(self, initial_fleet: int) -> dict:
        """JSON-ready description of everything that determines the run."""
        est = self.estimate
        pc = self.provider_config
        return {
            "name": self.name,
            "policy": self.policy.name,
            "alpha": float(as_alpha(self.alpha)),
            "horizon_n": self.horizon_n,
            "replan_interval": self.replan_interval,
            "warmup_steps": self.warmup_steps,
            "sim_length": self.sim_length,
            "initial_fleet": int(initial_fleet),
            "recipe": dataclasses.asdict(self.recipe),
            "model": {"xi": self.model.xi},
            "provider": {
                "n_slots": pc.n_slots,
                "delays": [int(d) for d in pc.delay.delays],
                "probs": [float(p) for p in pc.delay.probs],
            },
            "estimate": {
                "delays": [int(d) for d in est.delay_hat.delays],
                "probs": [float(p) for p in est.delay_hat.probs],
                "rho_hat": est.rho_hat,
            },
            "forecaster": {
                "kind": type(self.forecaster).__name__,
                **(dataclasses.asdict(self.forecaster)
                   if dataclasses.is_dataclass(self.forecaster) else {}),
            },
        }

    def seed_echo(self) -> dict:
        return {
            "master": self.seed.seed,
            "root_stream": self.seed.stream_id,
            "workload": self.seed.child("workload").stream_id,
            "provider": self.seed.child("provider").stream_id,
            "forecaster": self.seed.child("forecaster").stream_id,
        }


@dataclass(frozen=True)
class SimulationTrace:
    """Per-step record of one run plus the loss total over non-warmup steps.

    `target` is the policy's currently intended capacity for each step (NaN
    where the policy had not declared one yet, e.g. before the first
    successful forecast).
    """

    policy_name: str
    alpha: float
    warmup_steps: int
    t: np.ndarray
    workload: np.ndarray
    demand: np.ndarray
    target: np.ndarray
    live_hosts: np.ndarray
    pending: np.ndarray
    q: np.ndarray
    f: np.ndarray
    arrivals: np.ndarray
    step_loss: np.ndarray
    total_loss: float
    config: dict
    seeds: dict

    @property
    def steps(self) -> int:
        return int(self.t.size)

    @property
    def scored_steps(self) -> int:
        """Steps counted in total_loss (those at or past warmup)."""
        return int(np.count_nonzero(self.t >= self.warmup_steps))

    @property
    def mean_step_loss(self) -> float:
        n = self.scored_steps
        return self.total_loss / n if n else 0.0

    def column(self, name: str) -> np.ndarray:
        if name not in TRACE_COLUMNS:
            raise KeyError(f"unknown trace column {name!r}")
        return getattr(self, "live_hosts" if name == "live_hosts" else name)


@dataclass(frozen=True)
class PolicyStats:
    """Box-plot statistics of total losses for one policy across a batch."""

    policy: str
    n: int
    median: float
    q1: float
    q3: float
    min: float
    max: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class LossReport:
    """Per-policy loss distributions at a shared risk aversion."""

    alpha: float
    stats: dict[str, PolicyStats]


def _history_slice(demand: TimeSeries, t: int) -> TimeSeries:
    """Observations with timestamps <= t, the most a policy may ever see."""
    grid = demand.grid
    return TimeSeries(
        TimeGrid(grid.origin, t + 1 - grid.origin, grid.step_minutes),
        demand.values[: t + 1 - grid.origin],
    )


def run(scenario: Scenario) -> SimulationTrace:
    """Simulate one scenario; see the module docstring for the step protocol."""
    sc = scenario
    alpha = as_alpha(sc.alpha)
    workload_series = generate_workload(sc.recipe, sc.seed.child("workload"))
    demand_series = demand_from_workload(sc.model, workload_series)
    v = workload_series.values
    z = demand_series.values
    T = sc.sim_length
    r_init = sc.initial_fleet if sc.initial_fleet is not None else math.ceil(z[0])
    provider = Provider(sc.provider_config, r_init, sc.seed.child("provider"))
    forecaster_seed = sc.seed.child("forecaster")
    policy = sc.policy
    cadence = policy.cadence(sc.replan_interval)
    needs_future = bool(getattr(sc.forecaster, "needs_future", False))
    config = sc.config_echo(r_init)
    seeds = sc.seed_echo()

    live = np.zeros(T, dtype=np.int64)
    pending = np.zeros(T, dtype=np.int64)
    q_col = np.zeros(T, dtype=np.int64)
    f_col = np.zeros(T, dtype=np.int64)
    arrivals_col = np.zeros(T, dtype=np.int64)
    target = np.full(T, np.nan)
    step_loss = np.zeros(T)

    def partial(upto: int) -> SimulationTrace:
        return _assemble(sc, config, seeds, v, z, live, pending, q_col, f_col,
                         arrivals_col, target, step_loss, upto, alpha)

    plan: ScalingPlan | None = None
    for t in range(T):
        if t % cadence == 0:
            fc = None
            hold = False
            if policy.needs_forecast:
                series = demand_series if needs_future else _history_slice(demand_series, t)
                try:
                    fc = forecast(sc.forecaster, series, t, sc.horizon_n, forecaster_seed)
                except InsufficientHistoryError as exc:
                    if t < sc.warmup_steps:
                        plan = None  # hold the fleet; retry at the next boundary
                        hold = True
                    else:
                        raise SimulationError(
                            f"forecaster failed at step {t} (after warmup): {exc}",
                            partial(t),
                        ) from exc
            if not hold:
                ctx = PolicyContext(
                    now=t,
                    live_hosts=provider.live_hosts,
                    pending_requests=provider.in_flight,
                    current_demand_estimate=float(z[t]),
                    estimate=sc.estimate,
                    alpha=alpha,
                    forecast=fc,
                    replan_interval=sc.replan_interval,
                )
                try:
                    plan, info = policy.plan(ctx, _history_slice(demand_series, t))
                except (PolicyError, ValueError) as exc:
                    raise SimulationError(
                        f"policy {policy.name!r} failed at step {t}: {exc}", partial(t)
                    ) from exc
                if "target" in info:
                    target[t : min(t + cadence, T)] = float(info["target"])
                elif "target_path" in info:
                    path = np.asarray(info["target_path"], dtype=np.float64)
                    end = min(t + 1 + path.size, T)
                    if end > t + 1:
                        target[t + 1 : end] = path[: end - t - 1]
        q_t, f_t = plan.action_at(t) if plan is not None else (0, 0)
        provider.submit(q_t, f_t)
        arrivals_col[t] = provider.tick()
        live[t] = provider.live_hosts
        pending[t] = provider.in_flight
        q_col[t] = q_t
        f_col[t] = f_t
        step_loss[t] = pinball_loss(float(live[t]), float(z[t]), alpha)
    return partial(T)


def _assemble(sc, config, seeds, v, z, live, pending, q_col, f_col,
              arrivals_col, target, step_loss, upto, alpha) -> SimulationTrace:
    t_axis = np.arange(upto, dtype=np.int64)
    losses = step_loss[:upto]
    total = float(np.sum(losses[t_axis >= sc.warmup_steps]))
    return SimulationTrace(
        policy_name=sc.policy.name,
        alpha=alpha,
        warmup_steps=sc.warmup_steps,
        t=t_axis,
        workload=v[:upto].copy(),
        demand=z[:upto].copy(),
        target=target[:upto].copy(),
        live_hosts=live[:upto].copy(),
        pending=pending[:upto].copy(),
        q=q_col[:upto].copy(),
        f=f_col[:upto].copy(),
        arrivals=arrivals_col[:upto].copy(),
        step_loss=losses.copy(),
        total_loss=total,
        config=config,
        seeds=seeds,
    )


def replay_live_hosts(
    provider_config: ProviderConfig, r_init: int, seed: RngSeed, q, f
) -> np.ndarray:
    """Feed recorded actions through a fresh provider; the live-host path it yields."""
    provider = Provider(provider_config, int(r_init), seed)
    out = np.zeros(len(q), dtype=np.int64)
    for i, (qi, fi) in enumerate(zip(q, f)):
        provider.submit(int(qi), int(fi))
        provider.tick()
        out[i] = provider.live_hosts
    return out


def verify_replay(scenario: Scenario, trace: SimulationTrace) -> bool:
    """True iff the trace's recorded actions reproduce its live-host path exactly."""
    replayed = replay_live_hosts(
        scenario.provider_config,
        int(trace.config["initial_fleet"]),
        scenario.seed.child("provider"),
        trace.q,
        trace.f,
    )
    return bool(np.array_equal(replayed, trace.live_hosts))


def evaluate(traces, alpha) -> LossReport:
    """Box-plot statistics of total loss per policy across a batch of traces."""
    a = as_alpha(alpha)
    traces = list(traces)
    if not traces:
        raise ValueError("evaluate needs at least one trace")
    by_policy: dict[str, list[float]] = {}
    for tr in traces:
        if tr.alpha != a:
            raise ValueError(
                f"trace alpha {tr.alpha} does not match requested alpha {a}"
            )
        by_policy.setdefault(tr.policy_name, []).append(tr.total_loss)
    stats = {}
    for name in sorted(by_policy):
        vals = np.asarray(by_policy[name], dtype=np.float64)
        q1, med, q3 = np.percentile(vals, [25.0, 50.0, 75.0])
        stats[name] = PolicyStats(
            policy=name,
            n=int(vals.size),
            median=float(med),
            q1=float(q1),
            q3=float(q3),
            min=float(vals.min()),
            max=float(vals.max()),
        )
    return LossReport(alpha=a, stats=stats)


def _jsonable(obj):
    """Recursively make a config echo strict-JSON safe (inf/nan become strings)."""
    if isinstance(obj, dict):
        return {k: _jsonable(x) for k, x in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj.tolist()]
    return obj


def _format_cell(name: str, value) -> str:
    if name in _INT_COLUMNS:
        return str(int(value))
    return repr(float(value))


def write_trace_csv(trace: SimulationTrace, path) -> None:
    """One row per step, with run metadata in leading comment lines."""
    meta = {
        "policy": trace.policy_name,
        "alpha": trace.alpha,
        "warmup_steps": trace.warmup_steps,
        "total_loss": trace.total_loss,
        "config": _jsonable(trace.config),
        "seeds": _jsonable(trace.seeds),
    }
    lines = [f"# {TRACE_SCHEMA}"]
    for key, value in meta.items():
        lines.append(f"# {key}={json.dumps(value, sort_keys=True)}")
    lines.append(",".join(TRACE_COLUMNS))
    columns = [trace.column(name) for name in TRACE_COLUMNS]
    for i in range(trace.steps):
        lines.append(",".join(_format_cell(name, col[i])
                              for name, col in zip(TRACE_COLUMNS, columns)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace_csv(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Parse a trace CSV back into (metadata, column arrays).

    Raises ValueError on a schema tag or header mismatch so downstream tools
    fail loudly on foreign files.
    """
    meta: dict = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {TRACE_SCHEMA}":
            raise ValueError(f"{path}: not a {TRACE_SCHEMA} file (got {first!r})")
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = json.loads(value)
                continue
            if header is None:
                header = line.split(",")
                if header != list(TRACE_COLUMNS):
                    raise ValueError(
                        f"{path}: unexpected columns {header} (want {list(TRACE_COLUMNS)})"
                    )
                continue
            rows.append(line.split(","))
    if header is None:
        raise ValueError(f"{path}: missing column header")
    columns: dict[str, np.ndarray] = {}
    for j, name in enumerate(TRACE_COLUMNS):
        cells = [row[j] for row in rows]
        dtype = np.int64 if name in _INT_COLUMNS else np.float64
        columns[name] = np.array(cells, dtype=dtype) if cells else np.array([], dtype=dtype)
    return meta, columns
