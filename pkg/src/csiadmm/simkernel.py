"""Simulated latency and communication accounting.

Nothing here reads a wall clock: every duration is drawn from a seeded
stream, so traces are machine independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CsiAdmmError

LINK_LOW = 1e-5
LINK_HIGH = 1e-4


@dataclass(frozen=True)
class LatencyModel:
    """Per-iteration timing law.

    ECN compute time per batch is ``U(mean - jitter, mean + jitter)``.
    Stragglers add ``min(delay, epsilon)`` on top; with the default infinite
    delay a straggler always hits the cap. ``policy`` is ``"fixed"`` (the same
    ECNs straggle at every activation of an agent) or ``"random"`` (fresh
    choice each time).
    """

    compute_mean: float = 1e-3
    compute_jitter: float = 5e-4
    n_stragglers: int = 0
    policy: str = "fixed"
    epsilon: float = 0.0
    delay: float = float("inf")
    link_low: float = LINK_LOW
    link_high: float = LINK_HIGH

    def __post_init__(self):
        if self.epsilon < 0:
            raise CsiAdmmError("epsilon must be >= 0")
        if not 0 < self.link_low < self.link_high:
            raise CsiAdmmError("link bounds need 0 < low < high")
        if not 0 <= self.compute_jitter <= self.compute_mean:
            raise CsiAdmmError("compute jitter must lie in [0, mean]")
        if self.policy not in ("fixed", "random"):
            raise CsiAdmmError(f"unknown straggler policy {self.policy!r}")
        if self.n_stragglers < 0:
            raise CsiAdmmError("n_stragglers must be >= 0")

    def fixed_stragglers(self, n_agents, K, rng):
        """Straggling ECN ids for each agent (1-based keys) under the fixed policy."""
        if self.n_stragglers > K:
            raise CsiAdmmError(f"{self.n_stragglers} stragglers exceed K={K} ECNs")
        return {i: tuple(sorted(rng.choice(K, size=self.n_stragglers, replace=False)))
                for i in range(1, n_agents + 1)}


def sample_ecn_times(model: LatencyModel, K: int, rng, stragglers=None):
    """Draw K ECN response times.

    ``stragglers`` lists the slow ECNs for the fixed policy; under the random
    policy they are drawn here from ``rng``.
    """
    if K < 1:
        raise CsiAdmmError("K must be >= 1")
    lo = model.compute_mean - model.compute_jitter
    hi = model.compute_mean + model.compute_jitter
    times = rng.uniform(lo, hi, size=K)
    if model.policy == "random":
        if model.n_stragglers > K:
            raise CsiAdmmError(f"{model.n_stragglers} stragglers exceed K={K} ECNs")
        stragglers = rng.choice(K, size=model.n_stragglers, replace=False)
    if stragglers is not None and len(stragglers):
        times[np.asarray(stragglers, dtype=np.intp)] += min(model.delay, model.epsilon)
    return times


def iteration_response_time(times, wait="all"):
    """``max(times)`` when waiting for all ECNs, else the ``wait``-th smallest."""
    times = np.asarray(times, dtype=float)
    if wait == "all":
        return float(times.max())
    R = int(wait)
    if not 1 <= R <= len(times):
        raise CsiAdmmError(f"cannot wait for {R} of {len(times)} responses")
    return float(np.partition(times, R - 1)[R - 1])


def arrival_order(times):
    """ECN ids sorted by response time; ties go to the lower id."""
    return np.argsort(np.asarray(times), kind="stable")


def sample_link_time(rng, model: LatencyModel | None = None):
    lo, hi = (LINK_LOW, LINK_HIGH) if model is None else (model.link_low, model.link_high)
    return float(rng.uniform(lo, hi))


@dataclass
class TimingLedger:
    sim_time: float = 0.0
    comm_units: int = field(default=0)

    def charge(self, comm_units=0, elapsed=0.0):
        if comm_units < 0 or elapsed < 0:
            raise CsiAdmmError("cannot charge negative cost")
        self.comm_units += int(comm_units)
        self.sim_time += float(elapsed)
        return self


def charge(ledger: TimingLedger, comm_units=0, elapsed=0.0) -> TimingLedger:
    return ledger.charge(comm_units, elapsed)
