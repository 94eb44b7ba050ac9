"""Channel policies: the bandit side of the scheduler.

Every policy exposes ``select(t, empty, rng) -> channel`` and
``observe(channel, success, empty)``.  Queue-independent policies ignore
``empty`` when selecting; the queue-dependent ones (``optimal``, and
``hybrid`` after its switch slot) use it to explore only while the system
holds no data packet.

Running means are kept as integer success/observation counts so that
``estimates * counts`` is exactly integral.

Random draws are scalar and happen in a fixed order (documented per policy)
because the compiled simulation kernel replays the same sequence and the two
paths are checked against each other slot by slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

DEFAULT_HYBRID_SWITCH = 10_000
DEFAULT_UCB_CONSTANT = 2.0


class PolicyKind(IntEnum):
    EPS_GREEDY = 0
    UCB = 1
    TS = 2
    OPTIMAL = 3
    HYBRID = 4
    GENIE = 5


POLICY_NAMES = {
    "eps-greedy": PolicyKind.EPS_GREEDY,
    "ucb": PolicyKind.UCB,
    "ts": PolicyKind.TS,
    "optimal": PolicyKind.OPTIMAL,
    "hybrid": PolicyKind.HYBRID,
    "genie": PolicyKind.GENIE,
}


@dataclass(frozen=True)
class ChannelPolicySpec:
    """Name plus parameters; hashable and picklable, so it can cross threads.

    ``eps_c`` defaults to ``10 * N`` when left as ``None``.
    ``observe_empty=False`` makes queue-independent policies ignore the
    outcome of dummy transmissions.
    """

    name: str
    eps_c: Optional[float] = None
    ucb_c: float = DEFAULT_UCB_CONSTANT
    switch_slot: int = DEFAULT_HYBRID_SWITCH
    observe_empty: bool = True

    def __post_init__(self):
        if self.name not in POLICY_NAMES:
            raise ValueError(
                f"unknown channel policy {self.name!r}; expected one of {sorted(POLICY_NAMES)}"
            )
        if self.eps_c is not None and self.eps_c <= 0:
            raise ValueError("eps_c must be positive")
        if self.ucb_c <= 0:
            raise ValueError("ucb_c must be positive")
        if self.switch_slot < 0:
            raise ValueError("switch_slot must be non-negative")

    @property
    def kind(self) -> PolicyKind:
        return POLICY_NAMES[self.name]

    def build(self, num_channels: int, best_channel: int) -> ChannelPolicy:
        kind = self.kind
        if kind is PolicyKind.EPS_GREEDY:
            c = 10.0 * num_channels if self.eps_c is None else self.eps_c
            return EpsilonGreedy(num_channels, c=c, observe_empty=self.observe_empty)
        if kind is PolicyKind.UCB:
            return UCB(num_channels, c=self.ucb_c, observe_empty=self.observe_empty)
        if kind is PolicyKind.TS:
            return ThompsonSampling(num_channels, observe_empty=self.observe_empty)
        if kind is PolicyKind.OPTIMAL:
            return EmptySlotExplorer(num_channels)
        if kind is PolicyKind.HYBRID:
            return Hybrid(num_channels, switch_slot=self.switch_slot,
                          observe_empty=self.observe_empty)
        return Genie(num_channels, best_channel)


@dataclass
class ChannelPolicyState:
    successes: np.ndarray
    counts: np.ndarray

    @classmethod
    def fresh(cls, num_channels: int) -> ChannelPolicyState:
        return cls(np.zeros(num_channels, dtype=np.int64), np.zeros(num_channels, dtype=np.int64))

    @property
    def estimates(self) -> np.ndarray:
        return np.divide(self.successes, self.counts, out=np.zeros(len(self.counts)),
                         where=self.counts > 0)

    @property
    def alpha(self) -> np.ndarray:
        return 1 + self.successes

    @property
    def beta(self) -> np.ndarray:
        return 1 + self.counts - self.successes

    def record(self, channel: int, success: bool) -> None:
        self.counts[channel] += 1
        self.successes[channel] += int(bool(success))


class ChannelPolicy:
    kind: PolicyKind
    queue_dependent = False

    def __init__(self, num_channels: int, observe_empty: bool = True):
        self.num_channels = num_channels
        self.observe_empty = observe_empty
        self.state = ChannelPolicyState.fresh(num_channels)

    @property
    def estimates(self) -> np.ndarray:
        return self.state.estimates

    @property
    def counts(self) -> np.ndarray:
        return self.state.counts

    def select(self, t: int, empty: bool, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def observe(self, channel: int, success: bool, empty: bool) -> None:
        if empty and not self.observe_empty:
            return
        self.state.record(channel, success)


def _argmax(values) -> int:
    return int(np.argmax(values))


class EpsilonGreedy(ChannelPolicy):
    """Annealed epsilon-greedy, ``eps_t = min(1, c / t)``.

    Draws one uniform per slot for the explore/exploit coin and a second one
    (``floor(u * N)``) only when exploring.
    """

    kind = PolicyKind.EPS_GREEDY

    def __init__(self, num_channels: int, c: Optional[float] = None, observe_empty: bool = True):
        super().__init__(num_channels, observe_empty)
        self.c = 10.0 * num_channels if c is None else float(c)

    def epsilon(self, t: int) -> float:
        return min(1.0, self.c / t)

    def select(self, t, empty, rng):
        if rng.random() < self.epsilon(t):
            return int(rng.random() * self.num_channels)
        return _argmax(self.estimates)


class UCB(ChannelPolicy):
    """Index ``mean + sqrt(c ln t / T_n)``; unplayed channels first. No draws."""

    kind = PolicyKind.UCB

    def __init__(self, num_channels: int, c: float = DEFAULT_UCB_CONSTANT, observe_empty: bool = True):
        super().__init__(num_channels, observe_empty)
        self.c = float(c)

    def index(self, t: int) -> np.ndarray:
        counts = self.state.counts
        est = self.estimates
        log_t = math.log(t)
        out = np.empty(self.num_channels)
        for n in range(self.num_channels):
            out[n] = est[n] + math.sqrt(self.c * log_t / counts[n]) if counts[n] else math.inf
        return out

    def select(self, t, empty, rng):
        unplayed = np.flatnonzero(self.state.counts == 0)
        if unplayed.size:
            return int(unplayed[0])
        return _argmax(self.index(t))


class ThompsonSampling(ChannelPolicy):
    """Beta-Bernoulli Thompson sampling; one Beta draw per channel, in index order."""

    kind = PolicyKind.TS

    def select(self, t, empty, rng):
        alpha, beta = self.state.alpha, self.state.beta
        theta = [rng.beta(float(alpha[n]), float(beta[n])) for n in range(self.num_channels)]
        return _argmax(theta)


class EmptySlotExplorer(ChannelPolicy):
    """Explores uniformly at random in empty slots, exploits otherwise.

    Estimates are updated only from empty-slot (dummy) transmissions, so the
    exploited channel stays frozen during every busy stretch.  One uniform
    (``floor(u * N)``) per empty slot.
    """

    kind = PolicyKind.OPTIMAL
    queue_dependent = True

    def __init__(self, num_channels: int):
        super().__init__(num_channels, observe_empty=True)

    def select(self, t, empty, rng):
        if empty:
            return int(rng.random() * self.num_channels)
        return _argmax(self.estimates)

    def observe(self, channel, success, empty):
        if empty:
            self.state.record(channel, success)


class Hybrid(ChannelPolicy):
    """Thompson sampling up to ``switch_slot`` (inclusive), then the empty-slot explorer.

    Both phases share one set of counters, so the explorer starts from
    everything learned during the Thompson phase.
    """

    kind = PolicyKind.HYBRID
    queue_dependent = True

    def __init__(self, num_channels: int, switch_slot: int = DEFAULT_HYBRID_SWITCH,
                 observe_empty: bool = True):
        super().__init__(num_channels, observe_empty)
        self.switch_slot = switch_slot
        self.t = 0

    def in_ts_phase(self, t: int) -> bool:
        return t <= self.switch_slot

    def select(self, t, empty, rng):
        self.t = t
        if self.in_ts_phase(t):
            return ThompsonSampling.select(self, t, empty, rng)
        return EmptySlotExplorer.select(self, t, empty, rng)

    def observe(self, channel, success, empty):
        if self.in_ts_phase(self.t):
            ChannelPolicy.observe(self, channel, success, empty)
        elif empty:
            self.state.record(channel, success)


class Genie(ChannelPolicy):
    kind = PolicyKind.GENIE

    def __init__(self, num_channels: int, best_channel: int):
        super().__init__(num_channels)
        self.best_channel = best_channel

    def select(self, t, empty, rng):
        return self.best_channel

    def observe(self, channel, success, empty):
        pass


def make_channel_policy(name: str, num_channels: int, best_channel: int = 0, **params) -> ChannelPolicy:
    return ChannelPolicySpec(name, **params).build(num_channels, best_channel)
