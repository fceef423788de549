"""Quantile (pinball) loss and resource estimation under uncertain delays.

The asymmetric step cost is

    loss(r, z) = (1 - alpha) * (r - z)   if r > z   (idle over-provision)
                 alpha * (z - r)         otherwise  (lost demand)

so the expected cost is minimized by the alpha-quantile of the demand
distribution. Resource estimates propagate planned requests q and releases f
through the provisioning-delay estimate: releases count immediately, requests
count with probability P(tau_hat <= t - i).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Forecast, RngSeed
from .provider import DelayDistribution

__all__ = [
    "RiskAversion",
    "ProviderEstimate",
    "as_alpha",
    "pinball_loss",
    "actual_cost",
    "expected_cost_mc",
    "estimate_resources_expectation",
    "estimate_resources_sampled",
]


@dataclass(frozen=True)
class RiskAversion:
    """Quantile level alpha in (0, 1); high alpha punishes lost demand."""

    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha out of range (0, 1): {self.alpha}")


def as_alpha(alpha) -> float:
    """Accept RiskAversion or a bare float, validated."""
    a = alpha.alpha if isinstance(alpha, RiskAversion) else float(alpha)
    if not 0.0 < a < 1.0:
        raise ValueError(f"alpha out of range (0, 1): {a}")
    return a


@dataclass(frozen=True)
class ProviderEstimate:
    """What policies believe about the provider: delay law and throughput cap."""

    delay_hat: DelayDistribution
    rho_hat: float

    def __post_init__(self) -> None:
        if not self.rho_hat > 0:
            raise ValueError("rho_hat must be > 0 (math.inf allowed)")


def pinball_loss(r, z, alpha):
    """Asymmetric step loss; broadcasts over array inputs."""
    a = as_alpha(alpha)
    r = np.asarray(r, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    out = np.where(r > z, (1.0 - a) * (r - z), a * (z - r))
    return float(out) if out.ndim == 0 else out


def actual_cost(r, z, alpha) -> float:
    """Total realized loss of a capacity path against realized demand."""
    r = np.asarray(r, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if r.shape != z.shape:
        raise ValueError(f"length mismatch: r {r.shape} vs z {z.shape}")
    return float(np.sum(pinball_loss(r, z, alpha)))


def expected_cost_mc(r, forecast: Forecast, alpha) -> float:
    """Monte-Carlo SAA cost: (1/S) sum over sample paths of the total loss."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (forecast.horizon,):
        raise ValueError(
            f"capacity path length {r.shape} does not match horizon {forecast.horizon}"
        )
    return float(np.mean(np.sum(pinball_loss(r[None, :], forecast.samples, alpha), axis=1)))


def _check_actions(q, f):
    q = np.asarray(q, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if q.ndim != 1 or f.ndim != 1:
        raise ValueError("q and f must be 1-D sequences")
    if np.any(q < 0) or np.any(f < 0):
        raise ValueError("q and f must be >= 0")
    return q, f


def estimate_resources_expectation(r_init, q, f, est: ProviderEstimate, t: int) -> float:
    """Expected capacity at step t:

        r_hat_t = r_init + sum_{i<=t} (q_i * P(tau_hat <= t - i) - f_i)

    Actions are indexed from relative step 0; releases are immediate, requests
    are weighted by the delay CDF.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    q, f = _check_actions(q, f)
    r = float(r_init)
    for i in range(min(t + 1, len(q))):
        c = est.delay_hat.cdf(t - i)
        if c > 0:
            r += q[i] * c
    r -= float(np.sum(f[: t + 1]))
    return r


def estimate_resources_sampled(
    r_init, q, f, est: ProviderEstimate, t: int, n_draws: int, seed: RngSeed
) -> np.ndarray:
    """Sampled capacity at step t with independent delays per requested host.

    The count of the q_i hosts requested at step i that have arrived by t is a
    sum of iid indicators 1{i + tau_hat <= t}, i.e. Binomial(q_i, cdf(t - i)),
    which is what gets drawn here.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    q, f = _check_actions(q, f)
    if np.any(q != np.round(q)):
        raise ValueError("sampled estimator needs integer request counts")
    rng = seed.rng()
    base = float(r_init) - float(np.sum(f[: t + 1]))
    out = np.full(n_draws, base, dtype=np.float64)
    for i in range(min(t + 1, len(q))):
        n_req = int(q[i])
        if n_req == 0:
            continue
        c = est.delay_hat.cdf(t - i)
        if c <= 0.0:
            continue
        if c >= 1.0:
            out += n_req
        else:
            out += rng.binomial(n_req, c, n_draws)
    return out
