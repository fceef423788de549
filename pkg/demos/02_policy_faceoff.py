"""Four scaling policies, same world, head to head.

Runs max-window, reactive, forecast-shifting, and (optionally) the sample-
average optimizer on an identical workload across several seeds, then prints
the loss distribution per policy. Provisioning delays are what separates the
field: the reactive policy only moves after demand has already risen, while
the planners order hosts early enough to be live when the peak arrives.

Run:  python3 demos/02_policy_faceoff.py [--seeds N] [--with-optim]
"""
from __future__ import annotations

import argparse

from scalesim.core import RngSeed
from scalesim.cost import ProviderEstimate
from scalesim.engine import Scenario, evaluate, run
from scalesim.forecaster import NoisyOracleForecaster
from scalesim.policies import (
    ForecastShiftingPolicy,
    MaxWindowPolicy,
    OptimizerConfig,
    OptimizingPolicy,
    ReactivePolicy,
)
from scalesim.provider import DelayDistribution, ProviderConfig
from scalesim.workload import WorkloadModel, WorkloadRecipe

ALPHA = 0.9
SPD = 48  # 30-minute grid -> 48 steps per simulated day


def build_scenario(policy, seed_value: int) -> Scenario:
    recipe = WorkloadRecipe(
        base_level=30.0,
        daily_amplitude=12.0,
        weekly_amplitude=4.0,
        noise_sigma=1.5,
        len_steps=5 * SPD,  # four simulated days + one day of oracle lookahead
        step_minutes=30,
    )
    delay = DelayDistribution((1, 2, 3), (0.5, 0.3, 0.2))
    provider = ProviderConfig(n_slots=2, delay=delay)
    return Scenario(
        recipe=recipe,
        model=WorkloadModel(xi=1.0),
        forecaster=NoisyOracleForecaster(
            rel_noise_at_origin=0.03, rel_noise_at_horizon=0.12, n_samples=16
        ),
        provider_config=provider,
        estimate=ProviderEstimate(delay_hat=delay, rho_hat=provider.implied_throughput),
        policy=policy,
        alpha=ALPHA,
        seed=RngSeed(seed_value, "faceoff"),
        horizon_n=SPD,
        replan_interval=6,
        warmup_steps=SPD,
        sim_length=4 * SPD,
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5, help="seeds per policy")
    parser.add_argument("--with-optim", action="store_true",
                        help="also run the sample-average optimizer (slower)")
    args = parser.parse_args()

    def policies():
        yield MaxWindowPolicy(window=SPD, name="max-day")
        yield ReactivePolicy()
        yield ForecastShiftingPolicy()
        if args.with_optim:
            yield OptimizingPolicy(
                OptimizerConfig(n_samples=8, max_iterations=200,
                                horizon=24, rounding_draws=4),
                seed=RngSeed(99, "faceoff-optim"),
            )

    traces = []
    for policy in policies():
        for s in range(args.seeds):
            # Same seed across policies => identical demand and delay draws,
            # so every policy faces the exact same world.
            traces.append(run(build_scenario(policy, 1000 + s)))
        print(f"ran {args.seeds} seeds of {policy.name}")

    report = evaluate(traces, ALPHA)
    ranked = sorted(report.stats.values(), key=lambda st: st.median)
    print(f"\ntotal pinball loss at alpha={ALPHA} over {args.seeds} seeds")
    print(f"{'policy':<10} {'median':>9} {'q1':>9} {'q3':>9} {'min':>9} {'max':>9}")
    for st in ranked:
        print(f"{st.policy:<10} {st.median:>9.2f} {st.q1:>9.2f}"
              f" {st.q3:>9.2f} {st.min:>9.2f} {st.max:>9.2f}")
    print(f"\nbest by median: {ranked[0].policy}")


if __name__ == "__main__":
    main()
