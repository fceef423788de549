"""Inside one scaling plan: from forecast to actions to live hosts.

Walks the forecast-shifting pipeline by hand on a toy demand spike:

  1. collapse a sampled forecast to its per-step alpha-quantile path,
  2. lift that path to the minimal feasible capacity path -- the envelope a
     throughput-capped provider can actually follow (it must start climbing
     *before* the spike because it can only add rho_hat hosts per step),
  3. turn the envelope into integer request/release actions, and
  4. feed those actions to a real provider to watch live hosts track the plan
     with provisioning lag.

Run:  python3 demos/03_plan_anatomy.py
"""
from __future__ import annotations

import numpy as np

from scalesim.core import Forecast, RngSeed, TimeGrid
from scalesim.cost import ProviderEstimate
from scalesim.policies import PolicyContext, minimal_feasible_path, plan_forecast_shifting
from scalesim.provider import DelayDistribution, Provider, ProviderConfig

ALPHA = 0.9
RHO_HAT = 2.0  # believed sustained provisioning rate, hosts per step


def main() -> None:
    # A flat workload of ~4 hosts with a sharp spike to ~16 at steps 6-8.
    base = np.array([4, 4, 4, 4, 5, 7, 14, 16, 15, 8, 5, 4], dtype=np.float64)
    rng = np.random.default_rng(3)
    samples = np.clip(base + rng.normal(0.0, 0.8, size=(40, base.size)), 0.0, None)
    forecast = Forecast(TimeGrid(0, base.size, 5), samples)

    quantile_path = np.quantile(forecast.samples, ALPHA, axis=0)
    envelope = minimal_feasible_path(quantile_path, RHO_HAT)

    delay = DelayDistribution((1, 2), (0.6, 0.4))
    ctx = PolicyContext(
        now=0,
        live_hosts=4,
        pending_requests=0,
        current_demand_estimate=4.0,
        estimate=ProviderEstimate(delay_hat=delay, rho_hat=RHO_HAT),
        alpha=ALPHA,
        forecast=forecast,
        replan_interval=base.size,
    )
    plan = plan_forecast_shifting(ctx)

    # Execute the plan against a real provider and record live hosts.
    provider = Provider(ProviderConfig(n_slots=2, delay=delay), r_init=4,
                        seed=RngSeed(11, "anatomy"))
    live = []
    for j in range(len(plan)):
        provider.submit(*plan.action_at(j))
        provider.tick()
        live.append(provider.live_hosts)

    print(f"alpha={ALPHA}  rho_hat={RHO_HAT} hosts/step  delays 1-2 steps\n")
    print("  step  q-quantile  envelope  request  release  live after")
    for j in range(base.size):
        q, f = plan.action_at(j)
        print(f"  {j:4d}  {quantile_path[j]:10.2f}  {envelope[j]:8.2f}"
              f"  {q:7d}  {f:7d}  {live[j]:10d}")

    first_rise = int(np.argmax(np.diff(envelope) > 0)) + 1
    spike_step = int(np.argmax(quantile_path))
    print(f"\nThe quantile path peaks at step {spike_step}, but the envelope starts")
    print(f"rising at step {first_rise}: at {RHO_HAT} hosts/step the provider cannot")
    print("jump to the peak in one step, so requests are front-loaded. Releases")
    print("wait until after the spike has passed.")


if __name__ == "__main__":
    main()
