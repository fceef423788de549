"""Cloud provider model: pending queue, provisioning slots, random delays.

Requests join a pending queue, are admitted into one of n_slots provisioning
slots, and become live hosts after a random delay drawn per request. Releases
are granted instantly, clamped at the current live count. Within one tick,
completions are processed before new fills, so a slot that finishes at t can
start provisioning the next request at t.

A drawn delay of 0 means the host is live within the same tick and the
request never occupies a slot (the instant-provisioning limit).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import RngSeed

__all__ = ["DelayDistribution", "ProviderConfig", "ProviderState", "Provider", "SubmitResult"]


@dataclass(frozen=True)
class DelayDistribution:
    """Discrete provisioning-delay histogram: P(tau = delays[i]) = probs[i]."""

    delays: tuple
    probs: tuple

    def __post_init__(self) -> None:
        delays = tuple(int(d) for d in self.delays)
        probs = tuple(float(p) for p in self.probs)
        if len(delays) != len(probs) or not delays:
            raise ValueError("delays and probs must be non-empty and equal length")
        if any(d != raw for d, raw in zip(delays, self.delays)):
            raise ValueError("delays must be integers (steps)")
        if any(d < 0 for d in delays):
            raise ValueError("delays must be >= 0 steps")
        if len(set(delays)) != len(delays):
            raise ValueError("delays must be distinct")
        if any(p <= 0 for p in probs):
            raise ValueError("probabilities must be > 0")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1, got {sum(probs)!r}")
        order = np.argsort(delays)
        object.__setattr__(self, "delays", tuple(delays[i] for i in order))
        object.__setattr__(self, "probs", tuple(probs[i] for i in order))

    @classmethod
    def deterministic(cls, delay_steps: int) -> "DelayDistribution":
        return cls((delay_steps,), (1.0,))

    def mean(self) -> float:
        return float(sum(d * p for d, p in zip(self.delays, self.probs)))

    def cdf(self, d) -> float:
        """P(tau <= d)."""
        return float(sum(p for dd, p in zip(self.delays, self.probs) if dd <= d))

    @property
    def min_delay(self) -> int:
        return self.delays[0]

    @property
    def max_delay(self) -> int:
        return self.delays[-1]

    def sample(self, rng: np.random.Generator) -> int:
        if len(self.delays) == 1:
            return self.delays[0]
        return int(self.delays[rng.choice(len(self.delays), p=self.probs)])


@dataclass(frozen=True)
class ProviderConfig:
    n_slots: int
    delay: DelayDistribution

    def __post_init__(self) -> None:
        if self.n_slots < 1:
            raise ValueError("n_slots must be >= 1")

    @property
    def implied_throughput(self) -> float:
        """Emergent sustained provisioning rate n_slots / E[tau], hosts per step."""
        m = self.delay.mean()
        return float("inf") if m == 0 else self.n_slots / m


@dataclass
class ProviderState:
    pending: int
    slots: list  # per slot: completion step, or None when free
    live_hosts: int


@dataclass(frozen=True)
class SubmitResult:
    granted_releases: int
    release_shortfall: int


class Provider:
    """Stateful provider owning its delay stream and an auditable event log."""

    def __init__(self, config: ProviderConfig, r_init: int, seed: RngSeed):
        if r_init < 0:
            raise ValueError("r_init must be >= 0")
        self.config = config
        self.r_init = int(r_init)
        self.state = ProviderState(
            pending=0, slots=[None] * config.n_slots, live_hosts=int(r_init)
        )
        self.now = 0
        self._rng = seed.rng()
        # (step, kind, count) with kind in {"request", "release", "arrive"}
        self.event_log: list = []

    @property
    def live_hosts(self) -> int:
        return self.state.live_hosts

    @property
    def pending(self) -> int:
        return self.state.pending

    @property
    def in_flight(self) -> int:
        """Requested but not yet live: queued plus occupying a slot."""
        occupied = sum(1 for c in self.state.slots if c is not None)
        return self.state.pending + occupied

    def submit(self, q: int, f: int) -> SubmitResult:
        """Queue q new host requests and release up to f live hosts instantly."""
        q, f = int(q), int(f)
        if q < 0 or f < 0:
            raise ValueError("q and f must be >= 0")
        if q:
            self.state.pending += q
            self.event_log.append((self.now, "request", q))
        granted = min(f, self.state.live_hosts)
        if granted:
            self.state.live_hosts -= granted
            self.event_log.append((self.now, "release", granted))
        return SubmitResult(granted, f - granted)

    def tick(self) -> int:
        """Advance one step: complete due provisions, then fill free slots."""
        state = self.state
        arrivals = 0
        for i, completion in enumerate(state.slots):
            if completion is not None and completion <= self.now:
                state.slots[i] = None
                arrivals += 1
        if state.pending > 0:
            for i in range(len(state.slots)):
                if state.slots[i] is not None:
                    continue
                while state.pending > 0:
                    tau = self.config.delay.sample(self._rng)
                    state.pending -= 1
                    if tau == 0:
                        arrivals += 1  # instant: never occupies the slot
                    else:
                        state.slots[i] = self.now + tau
                        break
                if state.pending == 0:
                    break
        if arrivals:
            state.live_hosts += arrivals
            self.event_log.append((self.now, "arrive", arrivals))
        self.now += 1
        return arrivals

    def conservation_holds(self) -> bool:
        """live == r_init + arrivals - releases, recomputed from the event log."""
        arrived = sum(c for _, kind, c in self.event_log if kind == "arrive")
        released = sum(c for _, kind, c in self.event_log if kind == "release")
        return self.state.live_hosts == self.r_init + arrived - released
