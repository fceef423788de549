"""Experiment runner CLI: scenario configs in, traces/loss tables/plot data out.

Subcommands
    run <config> [--jobs N] [--out DIR] [--seed-offset K]
        Execute the config's full (policy x alpha x seed) cross product. Writes
        one trace CSV per run, a combined losses.csv, and summary.json with
        box-plot statistics per (policy, alpha). A failed run is recorded in
        summary.json without stopping the batch.
    compare <losses.csv...> [--format table|csv]
        Merge loss tables and print per-(policy, alpha) quartiles sorted by
        median (ties broken by name).
    plotdata <trace.csv> [--out FILE]
        Reduce a trace to plot-ready (t, demand, quantile_target, live_hosts).

The environment variable SCALESIM_SEED, when set, replaces the config's seed
list with that single master seed. Exit codes: 0 success, 1 config/input
error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .core import RngSeed
from .cost import ProviderEstimate
from .engine import (
    Scenario,
    SimulationError,
    SimulationTrace,
    _jsonable,
    evaluate,
    read_trace_csv,
    run,
    write_trace_csv,
)
from .forecaster import NoisyOracleForecaster, SeasonalEmpiricalForecaster
from .policies import (
    ForecastShiftingPolicy,
    MaxWindowPolicy,
    OptimizerConfig,
    OptimizingPolicy,
    Policy,
    ReactivePolicy,
)
from .provider import DelayDistribution, ProviderConfig
from .workload import WorkloadModel, WorkloadRecipe

__all__ = ["main", "load_config", "build_scenario", "ConfigError"]

LOSSES_SCHEMA = "scalesim-losses-v1"
PLOTDATA_SCHEMA = "scalesim-plotdata-v1"
SUMMARY_SCHEMA = "scalesim-summary-v1"
LOSSES_COLUMNS = ("policy", "alpha", "seed", "total_loss", "mean_step_loss")
PLOTDATA_COLUMNS = ("t", "demand", "quantile_target", "live_hosts")


class ConfigError(ValueError):
    """Invalid experiment config; `key` locates the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def _anchor(path: Path, text: str, key: str | None) -> str:
    """`file:line:` prefix pointing at the key's first occurrence (line 1 fallback)."""
    line = 1
    if key:
        needle = f'"{key}"'
        for i, row in enumerate(text.splitlines(), start=1):
            if needle in row:
                line = i
                break
    return f"{path}:{line}"


def _require(cfg: dict, key: str, kinds, what: str):
    if key not in cfg:
        raise ConfigError(f"missing required key {key!r} ({what})", key=None)
    value = cfg[key]
    if not isinstance(value, kinds):
        raise ConfigError(f"key {key!r} must be {what}, got {type(value).__name__}", key=key)
    return value


def _parse_rho(raw, key: str) -> float:
    if raw is None or raw == "inf":
        return math.inf
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw)
    raise ConfigError(f"{key} must be a number, null, or \"inf\"", key="rho_hat")


def _build_delay(section: dict, key: str) -> DelayDistribution:
    try:
        return DelayDistribution(tuple(section["delays"]), tuple(section["probs"]))
    except KeyError as exc:
        raise ConfigError(f"{key} needs 'delays' and 'probs' lists", key=key) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid delay histogram in {key}: {exc}", key=key) from exc


def build_forecaster(section: dict | None):
    if section is None:
        return None
    kind = _require(section, "kind", str, "a forecaster kind string")
    params = {k: v for k, v in section.items() if k != "kind"}
    try:
        if kind == "noisy-oracle":
            return NoisyOracleForecaster(**params)
        if kind == "seasonal-empirical":
            return SeasonalEmpiricalForecaster(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid forecaster parameters: {exc}", key="forecaster") from exc
    raise ConfigError(
        f"unknown forecaster kind {kind!r} (want noisy-oracle or seasonal-empirical)",
        key="forecaster",
    )


def build_policy(spec: dict, master_seed: RngSeed) -> Policy:
    kind = _require(spec, "kind", str, "a policy kind string")
    params = {k: v for k, v in spec.items() if k != "kind"}
    try:
        if kind == "max-window":
            window = params.pop("window")
            return MaxWindowPolicy(window=window, **params)
        if kind == "reactive":
            return ReactivePolicy(**params)
        if kind == "shift":
            return ForecastShiftingPolicy(**params)
        if kind == "optim":
            name = params.pop("name", "optim")
            return OptimizingPolicy(
                OptimizerConfig(**params), seed=master_seed.child("policy"), name=name
            )
    except KeyError as exc:
        raise ConfigError(f"policy {kind!r} is missing parameter {exc}", key="policies") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters for policy {kind!r}: {exc}", key="policies") from exc
    raise ConfigError(
        f"unknown policy kind {kind!r} (want max-window, reactive, shift, or optim)",
        key="policies",
    )


def _seed_list(cfg: dict, seed_offset: int) -> list[int]:
    env = os.environ.get("SCALESIM_SEED")
    if env is not None:
        try:
            seeds = [int(env)]
        except ValueError as exc:
            raise ConfigError(f"SCALESIM_SEED must be an integer, got {env!r}") from exc
    else:
        raw = _require(cfg, "seeds", (list, dict, int), "a list, a count, or {count, base}")
        if isinstance(raw, int):
            raw = {"count": raw}
        if isinstance(raw, dict):
            count = raw.get("count")
            base = raw.get("base", 0)
            if not isinstance(count, int) or count < 1:
                raise ConfigError("seeds.count must be a positive integer", key="seeds")
            seeds = list(range(int(base), int(base) + count))
        else:
            if not raw or not all(isinstance(s, int) for s in raw):
                raise ConfigError("seeds must be a non-empty list of integers", key="seeds")
            seeds = list(raw)
    return [s + seed_offset for s in seeds]


def load_config(path: Path) -> dict:
    """Parse and structurally validate an experiment config."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    _require(cfg, "workload", dict, "the workload recipe object")
    _require(cfg, "provider", dict, "the provider config object")
    _require(cfg, "policies", list, "a list of policy specs")
    _require(cfg, "alphas", list, "a list of risk-aversion levels")
    if not cfg["policies"]:
        raise ConfigError("need at least one policy", key="policies")
    if not cfg["alphas"]:
        raise ConfigError("need at least one alpha", key="alphas")
    return cfg


def build_scenario(cfg: dict, policy_spec: dict, alpha: float, seed: int) -> Scenario:
    """One cell of the experiment cross product as a runnable Scenario."""
    master = RngSeed(seed)
    try:
        recipe = WorkloadRecipe(**cfg["workload"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid workload recipe: {exc}", key="workload") from exc
    try:
        model = WorkloadModel(**cfg.get("model", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid workload model: {exc}", key="model") from exc
    provider_section = cfg["provider"]
    try:
        provider_config = ProviderConfig(
            n_slots=provider_section["n_slots"], delay=_build_delay(provider_section, "provider")
        )
    except KeyError as exc:
        raise ConfigError(f"provider config is missing {exc}", key="provider") from exc
    except ValueError as exc:
        raise ConfigError(f"invalid provider config: {exc}", key="provider") from exc
    est_section = cfg.get("estimate")
    if est_section is None:
        est_delay, rho_hat = provider_config.delay, provider_config.implied_throughput
    else:
        est_delay = _build_delay(est_section, "estimate")
        rho_hat = _parse_rho(est_section.get("rho_hat"), "estimate.rho_hat")
    try:
        scenario = Scenario(
            recipe=recipe,
            model=model,
            forecaster=build_forecaster(cfg.get("forecaster")),
            provider_config=provider_config,
            estimate=ProviderEstimate(est_delay, rho_hat),
            policy=build_policy(policy_spec, master),
            alpha=float(alpha),
            seed=master,
            horizon_n=cfg.get("horizon_n", 576),
            replan_interval=cfg.get("replan_interval", 12),
            warmup_steps=cfg.get("warmup_steps"),
            sim_length=cfg.get("sim_length"),
            initial_fleet=cfg.get("initial_fleet"),
            name=cfg.get("name", ""),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return scenario


def _trace_filename(policy: str, alpha: float, seed: int) -> str:
    safe = policy.replace("/", "-").replace(" ", "-")
    return f"trace_{safe}_alpha{alpha:g}_seed{seed}.csv"


def _run_cell(args: tuple) -> dict:
    """Worker for one (policy, alpha, seed) cell; never raises across processes."""
    cfg, policy_spec, alpha, seed = args
    started = time.perf_counter()
    try:
        scenario = build_scenario(cfg, policy_spec, alpha, seed)
        trace = run(scenario)
    except SimulationError as exc:
        return {
            "ok": False,
            "policy": exc.partial_trace.policy_name,
            "alpha": float(alpha),
            "seed": seed,
            "error": str(exc),
            "partial_steps": exc.partial_trace.steps,
            "runtime_seconds": time.perf_counter() - started,
        }
    return {
        "ok": True,
        "policy": trace.policy_name,
        "alpha": float(alpha),
        "seed": seed,
        "trace": trace,
        "runtime_seconds": time.perf_counter() - started,
    }


def _write_losses(path: Path, results: list[dict]) -> None:
    lines = [f"# {LOSSES_SCHEMA}", ",".join(LOSSES_COLUMNS)]
    for res in results:
        if not res["ok"]:
            continue
        trace: SimulationTrace = res["trace"]
        lines.append(
            f"{res['policy']},{res['alpha']!r},{res['seed']},"
            f"{trace.total_loss!r},{trace.mean_step_loss!r}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_losses_csv(path: Path) -> list[dict]:
    """Rows of a losses.csv, schema-checked."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {LOSSES_SCHEMA}":
            raise ConfigError(f"{path}: not a {LOSSES_SCHEMA} file (got {first!r})")
        header = fh.readline().strip().split(",")
        if header != list(LOSSES_COLUMNS):
            raise ConfigError(f"{path}: unexpected columns {header}")
        rows = []
        for lineno, raw in enumerate(fh, start=3):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            if len(cells) != len(LOSSES_COLUMNS):
                raise ConfigError(f"{path}:{lineno}: expected {len(LOSSES_COLUMNS)} cells")
            rows.append(
                {
                    "policy": cells[0],
                    "alpha": float(cells[1]),
                    "seed": int(cells[2]),
                    "total_loss": float(cells[3]),
                    "mean_step_loss": float(cells[4]),
                }
            )
    return rows


def _summarize(results: list[dict]) -> dict:
    alphas = sorted({res["alpha"] for res in results})
    stats: dict = {}
    runtimes: dict = {}
    for alpha in alphas:
        ok = [r for r in results if r["alpha"] == alpha and r["ok"]]
        if ok:
            report = evaluate([r["trace"] for r in ok], alpha)
            stats[repr(alpha)] = {
                name: st.as_dict() for name, st in report.stats.items()
            }
        rt: dict = {}
        for r in results:
            if r["alpha"] == alpha:
                rt[r["policy"]] = rt.get(r["policy"], 0.0) + r["runtime_seconds"]
        runtimes[repr(alpha)] = rt
    failures = [
        {k: r[k] for k in ("policy", "alpha", "seed", "error", "partial_steps")}
        for r in results
        if not r["ok"]
    ]
    return {"stats": stats, "runtimes": runtimes, "failures": failures}


def cmd_run(args: argparse.Namespace) -> int:
    path = Path(args.config)
    try:
        cfg = load_config(path)
        seeds = _seed_list(cfg, args.seed_offset)
        matrix = [
            (cfg, policy_spec, float(alpha), seed)
            for policy_spec in cfg["policies"]
            for alpha in cfg["alphas"]
            for seed in seeds
        ]
        # validate every cell up front so config errors precede any simulation
        for cell in matrix:
            build_scenario(*cell)
    except ConfigError as exc:
        text = path.read_text(encoding="utf-8") if path.exists() else ""
        msg = str(exc)
        prefix = "" if str(path) in msg else _anchor(path, text, exc.key) + ": "
        print(f"error: {prefix}{msg}", file=sys.stderr)
        return 1

    out_dir = Path(args.out) if args.out else Path(cfg.get("out_dir", "out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_cell, matrix))
    else:
        results = [_run_cell(cell) for cell in matrix]

    for res in results:
        if res["ok"]:
            trace_path = out_dir / _trace_filename(res["policy"], res["alpha"], res["seed"])
            write_trace_csv(res["trace"], trace_path)
            res["trace_file"] = trace_path.name
            print(
                f"ran {res['policy']} alpha={res['alpha']:g} seed={res['seed']}: "
                f"loss={res['trace'].total_loss:.6g} ({res['runtime_seconds']:.2f}s)",
                file=sys.stderr,
            )
        else:
            print(
                f"FAILED {res['policy']} alpha={res['alpha']:g} seed={res['seed']}: "
                f"{res['error']}",
                file=sys.stderr,
            )

    _write_losses(out_dir / "losses.csv", results)
    summary = {
        "schema": SUMMARY_SCHEMA,
        "config_file": str(path),
        "config": _jsonable(cfg),
        "seeds": seeds,
        "seed_offset": args.seed_offset,
        "runs": [
            {
                "policy": r["policy"],
                "alpha": r["alpha"],
                "seed": r["seed"],
                "ok": r["ok"],
                **({"total_loss": r["trace"].total_loss, "trace_file": r["trace_file"]}
                   if r["ok"] else {"error": r["error"]}),
                "runtime_seconds": r["runtime_seconds"],
            }
            for r in results
        ],
        **_summarize(results),
    }
    (out_dir / "summary.json").write_text(
        json.dumps(_jsonable(summary), indent=2, sort_keys=False) + "\n", encoding="utf-8"
    )
    n_fail = sum(1 for r in results if not r["ok"])
    print(
        f"wrote {len(results) - n_fail} trace(s), losses.csv, summary.json to {out_dir}"
        + (f" ({n_fail} run(s) failed; see summary.json)" if n_fail else "")
    )
    return 2 if n_fail else 0


def _compare_rows(rows: list[dict]) -> list[dict]:
    groups: dict = {}
    for row in rows:
        groups.setdefault((row["policy"], row["alpha"]), []).append(row["total_loss"])
    table = []
    for (policy, alpha), vals in groups.items():
        arr = np.asarray(vals, dtype=np.float64)
        q1, med, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
        table.append(
            {
                "policy": policy,
                "alpha": alpha,
                "n": int(arr.size),
                "median": float(med),
                "q1": float(q1),
                "q3": float(q3),
                "min": float(arr.min()),
                "max": float(arr.max()),
            }
        )
    table.sort(key=lambda r: (r["median"], r["policy"], r["alpha"]))
    return table


def cmd_compare(args: argparse.Namespace) -> int:
    rows: list[dict] = []
    try:
        for path in args.files:
            rows.extend(read_losses_csv(Path(path)))
    except (OSError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not rows:
        print("error: no data rows in the given loss files", file=sys.stderr)
        return 1
    table = _compare_rows(rows)
    cols = ("policy", "alpha", "n", "median", "q1", "q3", "min", "max")
    if args.format == "csv":
        print(",".join(cols))
        for row in table:
            print(",".join(f"{row[c]:.6f}" if isinstance(row[c], float) else str(row[c])
                           for c in cols))
    else:
        widths = {c: max(len(c), 12) for c in cols}
        widths["policy"] = max(len("policy"), *(len(r["policy"]) for r in table))
        header = "  ".join(c.ljust(widths[c]) for c in cols)
        print(header)
        print("-" * len(header))
        for row in table:
            cells = []
            for c in cols:
                val = row[c]
                text = f"{val:.4f}" if isinstance(val, float) else str(val)
                cells.append(text.ljust(widths[c]))
            print("  ".join(cells))
    return 0


def cmd_plotdata(args: argparse.Namespace) -> int:
    try:
        meta, cols = read_trace_csv(Path(args.trace))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    lines = [f"# {PLOTDATA_SCHEMA}", ",".join(PLOTDATA_COLUMNS)]
    for i in range(cols["t"].size):
        lines.append(
            f"{int(cols['t'][i])},{float(cols['demand'][i])!r},"
            f"{float(cols['target'][i])!r},{int(cols['live_hosts'][i])}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {cols['t'].size} plot rows to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scalesim",
        description="Run auto-scaling policy experiments and reduce their outputs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="experiment config (JSON)")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_run.add_argument("--out", default=None, help="output directory (overrides config)")
    p_run.add_argument(
        "--seed-offset", type=int, default=0, help="added to every master seed"
    )
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="rank policies from losses.csv files")
    p_cmp.add_argument("files", nargs="+", help="losses.csv paths")
    p_cmp.add_argument("--format", choices=("table", "csv"), default="table")
    p_cmp.set_defaults(func=cmd_compare)

    p_plot = sub.add_parser("plotdata", help="plot-ready columns from a trace CSV")
    p_plot.add_argument("trace", help="trace CSV written by `run`")
    p_plot.add_argument("--out", default=None, help="write here instead of stdout")
    p_plot.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - last-resort runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
