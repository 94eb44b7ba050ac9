"""Seeded random streams.

Every replication owns a handful of independent PCG64 substreams, keyed by
``(seed, stream_id)`` through :class:`numpy.random.SeedSequence`.  PCG64 and
SeedSequence produce the same output on every platform numpy supports, so a
``(base_seed, replication)`` pair fully determines a run.

Environment draws (arrivals and the shared channel uniform) live on their own
stream, so swapping the channel policy never reshuffles packet arrivals.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

SEED_MASK = (1 << 64) - 1


class Stream(IntEnum):
    ENVIRONMENT = 0
    LEARNER = 1
    GENIE = 2
    # environment of the genie when common random numbers are switched off
    GENIE_ENVIRONMENT = 3


def replication_seed(base_seed: int, replication: int) -> int:
    return (int(base_seed) + int(replication)) & SEED_MASK


def stream(seed: int, stream_id: Stream | int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def environment_uniforms(rng: np.random.Generator, horizon: int, num_sources: int) -> np.ndarray:
    """Pre-draw the environment for ``horizon`` slots.

    Row ``t-1`` holds the ``num_sources`` arrival uniforms of slot ``t`` in
    source order followed by the slot's channel uniform ``U(t)``.  numpy fills
    the array in row-major order, so this consumes the stream exactly as
    slot-by-slot scalar draws would.
    """
    return rng.random((horizon, num_sources + 1))
