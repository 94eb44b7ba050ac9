"""Network model: configuration, per-slot state and the state-evolution steps.

Indices are 0-based throughout: sources ``0..M-1``, channels ``0..N-1``.
Slots are 1-based, as in the AoI recursion ``h_m(t) = t - tau_m(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

NO_PACKET = -1


class ConfigError(ValueError):
    """Raised when network or experiment parameters are invalid.

    ``field`` names the offending parameter when there is one.
    """

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class InvariantViolation(RuntimeError):
    """A simulation invariant failed; this always indicates a bug."""

    def __init__(self, message: str, seed: Optional[int] = None):
        super().__init__(message if seed is None else f"{message} (seed={seed})")
        self.seed = seed


@dataclass(frozen=True)
class NetworkConfig:
    num_sources: int
    num_channels: int
    arrival_rate: float
    reliabilities: tuple[float, ...]
    horizon: int
    base_seed: int = 0
    replications: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "reliabilities", tuple(float(x) for x in self.reliabilities))
        except (TypeError, ValueError):
            raise ConfigError("reliabilities must be a list of numbers", "reliabilities") from None
        for name in ("num_sources", "num_channels", "horizon", "replications"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}", name)
        if not 0.0 < self.arrival_rate < 1.0:
            raise ConfigError(
                f"arrival_rate must lie strictly inside (0, 1), got {self.arrival_rate!r}; "
                "the model needs slots in which the system is empty",
                "arrival_rate",
            )
        if len(self.reliabilities) != self.num_channels:
            raise ConfigError(
                f"expected {self.num_channels} reliabilities, got {len(self.reliabilities)}",
                "reliabilities",
            )
        for n, mu in enumerate(self.reliabilities):
            if not 0.0 < mu <= 1.0:
                raise ConfigError(f"reliability of channel {n} must lie in (0, 1], got {mu!r}",
                                  "reliabilities")
        mu_max = max(self.reliabilities)
        if self.reliabilities.count(mu_max) > 1:
            raise ConfigError(f"the most reliable channel must be unique, {mu_max} appears twice",
                              "reliabilities")
        if not 0 <= int(self.base_seed) < 1 << 64:
            raise ConfigError(f"base_seed must be an unsigned 64-bit integer, got {self.base_seed!r}",
                              "base_seed")

    @property
    def mu(self) -> np.ndarray:
        return np.asarray(self.reliabilities, dtype=np.float64)

    @property
    def best_channel(self) -> int:
        return int(np.argmax(self.reliabilities))

    @property
    def best_reliability(self) -> float:
        return max(self.reliabilities)

    @property
    def gaps(self) -> np.ndarray:
        """Suboptimality gaps ``mu* - mu_n`` (zero at the best channel)."""
        return self.best_reliability - self.mu

    @property
    def min_gap(self) -> float:
        """Smallest positive gap; ``inf`` for a single channel."""
        gaps = np.delete(self.gaps, self.best_channel)
        return float(gaps.min()) if gaps.size else float("inf")

    def seeds(self) -> list[int]:
        from .rng import replication_seed

        return [replication_seed(self.base_seed, r) for r in range(self.replications)]


@dataclass
class SystemState:
    """State at the beginning of slot ``slot``.

    ``last_delivery[m]`` is the generation time of the freshest packet of
    source ``m`` delivered so far (0 before the first delivery) and
    ``queue[m]`` the generation time of its undelivered packet, or
    ``NO_PACKET``.
    """

    slot: int
    last_delivery: np.ndarray
    queue: np.ndarray

    @classmethod
    def initial(cls, num_sources: int) -> SystemState:
        return cls(
            slot=1,
            last_delivery=np.zeros(num_sources, dtype=np.int64),
            queue=np.full(num_sources, NO_PACKET, dtype=np.int64),
        )

    @property
    def aoi(self) -> np.ndarray:
        return self.slot - self.last_delivery

    @property
    def empty(self) -> bool:
        return bool(np.all(self.queue == NO_PACKET))

    def has_packet(self, source: int) -> bool:
        return self.queue[source] != NO_PACKET

    def copy(self) -> SystemState:
        return SystemState(self.slot, self.last_delivery.copy(), self.queue.copy())

    def check(self) -> None:
        queued = self.queue != NO_PACKET
        if np.any(self.last_delivery < 0) or np.any(self.last_delivery >= self.slot):
            raise InvariantViolation(f"slot {self.slot}: delivery times out of range")
        if np.any(queued & ((self.queue <= self.last_delivery) | (self.queue > self.slot))):
            raise InvariantViolation(f"slot {self.slot}: queued packet not fresher than delivery")


@dataclass(frozen=True)
class ChannelDraw:
    u: float
    states: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Decision:
    source: int
    channel: int
    is_dummy: bool


def draw_arrivals(rng: np.random.Generator, num_sources: int, arrival_rate: float) -> np.ndarray:
    """One Bernoulli(``arrival_rate``) packet generation per source.

    Consumes exactly ``num_sources`` uniforms, in source order.
    """
    return arrivals_from_uniforms(rng.random(num_sources), arrival_rate)


def arrivals_from_uniforms(u: np.ndarray, arrival_rate: float) -> np.ndarray:
    return np.asarray(u) < arrival_rate


def apply_arrivals(state: SystemState, arrivals: Sequence[bool]) -> SystemState:
    """Queue the packets generated at the start of the slot, dropping older ones."""
    new = state.copy()
    new.queue[np.asarray(arrivals, dtype=bool)] = state.slot
    return new


def realize_channels(rng: np.random.Generator, reliabilities: Sequence[float]) -> ChannelDraw:
    """Coupled ON/OFF states of all channels from a single uniform draw."""
    return channels_from_uniform(rng.random(), reliabilities)


def channels_from_uniform(u: float, reliabilities: Sequence[float]) -> ChannelDraw:
    return ChannelDraw(float(u), float(u) <= np.asarray(reliabilities, dtype=np.float64))


def advance_aoi(state: SystemState, delivered: Optional[tuple[int, int]] = None) -> SystemState:
    """Move to the next slot, optionally delivering ``(source, generation_time)``.

    A delivered packet must still be queued and fresher than the source's
    last delivery; anything else means the scheduler delivered a stale or
    phantom packet.
    """
    new = state.copy()
    if delivered is not None:
        m, g = delivered
        if g <= state.last_delivery[m] or g > state.slot:
            raise InvariantViolation(
                f"slot {state.slot}: stale delivery for source {m} "
                f"(generated {g}, last delivered {state.last_delivery[m]})"
            )
        if state.queue[m] != g:
            raise InvariantViolation(f"slot {state.slot}: source {m} has no packet generated at {g}")
        new.last_delivery[m] = g
        new.queue[m] = NO_PACKET
    new.slot = state.slot + 1
    return new
