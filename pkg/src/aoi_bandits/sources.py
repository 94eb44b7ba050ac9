"""Source policies: which source transmits in a slot."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import NO_PACKET, SystemState

SOURCE_POLICIES = ("abmw", "roundrobin")


@dataclass(frozen=True)
class SourceSelectionInput:
    slot: int
    aoi: np.ndarray
    queue: np.ndarray
    last_delivery: np.ndarray

    @classmethod
    def from_state(cls, state: SystemState) -> SourceSelectionInput:
        return cls(state.slot, state.aoi, state.queue, state.last_delivery)


def abmw_select(inp: SourceSelectionInput) -> int:
    """Age-Based Max-Weight.

    Among sources holding a packet, pick the one whose delivery would cut its
    AoI the most, i.e. the largest ``queue[m] - last_delivery[m]``.  With
    every queue empty the slot carries a dummy packet and the oldest source
    is picked.  Ties go to the lowest index.
    """
    queued = inp.queue != NO_PACKET
    if not queued.any():
        return int(np.argmax(inp.aoi))
    weights = np.where(queued, inp.queue - inp.last_delivery, -1)
    return int(np.argmax(weights))


def roundrobin_select(inp: SourceSelectionInput, cursor: Optional[int]) -> int:
    """Next source after ``cursor`` (the previously selected one), ignoring queues."""
    num_sources = len(inp.queue)
    return 0 if cursor is None else (cursor + 1) % num_sources


class RoundRobin:
    def __init__(self):
        self.cursor: Optional[int] = None

    def __call__(self, inp: SourceSelectionInput) -> int:
        self.cursor = roundrobin_select(inp, self.cursor)
        return self.cursor


def make_source_policy(name: str):
    """Return a callable ``SourceSelectionInput -> source index``."""
    if name == "abmw":
        return abmw_select
    if name == "roundrobin":
        return RoundRobin()
    raise ValueError(f"unknown source policy {name!r}; expected one of {SOURCE_POLICIES}")
