import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from aoi_bandits.model import NO_PACKET, SystemState, advance_aoi
from aoi_bandits.sources import (
    RoundRobin,
    SourceSelectionInput,
    abmw_select,
    make_source_policy,
    roundrobin_select,
)


def inp(t, tau, queue):
    tau = np.asarray(tau, dtype=np.int64)
    queue = np.asarray([NO_PACKET if g is None else g for g in queue], dtype=np.int64)
    return SourceSelectionInput(t, t - tau, queue, tau)


def test_abmw_picks_largest_reduction():
    assert abmw_select(inp(20, [10, 16], [15, 20])) == 0


def test_abmw_singleton_feasible_set():
    assert abmw_select(inp(20, [1, 2, 19], [None, None, 19])) == 2


def test_abmw_empty_system_uses_max_aoi_lowest_index():
    # h = [7, 2, 7]
    assert abmw_select(inp(10, [3, 8, 3], [None, None, None])) == 0


def test_abmw_tie_goes_to_lowest_index():
    assert abmw_select(inp(10, [2, 4, 2], [6, 8, 6])) == 0


def test_roundrobin_cycle():
    x = inp(5, [0, 0, 0], [None, None, None])
    assert roundrobin_select(x, 1) == 2
    assert roundrobin_select(x, 2) == 0
    single = inp(5, [0], [None])
    assert roundrobin_select(single, None) == 0
    assert roundrobin_select(single, 0) == 0


def test_roundrobin_object_keeps_cursor():
    rr = make_source_policy("roundrobin")
    assert isinstance(rr, RoundRobin)
    x = inp(5, [0, 0, 0], [4, None, None])
    assert [rr(x) for _ in range(5)] == [0, 1, 2, 0, 1]


queue_strategy = st.integers(1, 6).flatmap(
    lambda m: st.tuples(
        st.lists(st.integers(0, 40), min_size=m, max_size=m),
        st.lists(st.one_of(st.none(), st.integers(0, 40)), min_size=m, max_size=m),
    )
)


@given(queue_strategy)
def test_abmw_is_work_conserving_and_weight_matches_reduction(data):
    tau, gen = data
    t = 50
    # a queued packet is always fresher than the last delivery
    gen = [None if g is None else max(g, d + 1) for g, d in zip(gen, tau)]
    x = inp(t, tau, gen)
    m = abmw_select(x)
    if any(g is not None for g in gen):
        assert gen[m] is not None
        state = SystemState(t, x.last_delivery.copy(), x.queue.copy())
        after = advance_aoi(state, (m, gen[m]))
        # AoI drop relative to no delivery equals w_m = g_m - tau_m
        assert (state.aoi[m] + 1) - after.aoi[m] == gen[m] - tau[m]
        weights = [g - d for g, d in zip(gen, tau) if g is not None]
        assert gen[m] - tau[m] == max(weights)
    else:
        assert x.aoi[m] == x.aoi.max()
