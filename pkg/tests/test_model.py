import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoi_bandits.model import (
    NO_PACKET,
    ConfigError,
    InvariantViolation,
    NetworkConfig,
    SystemState,
    advance_aoi,
    apply_arrivals,
    channels_from_uniform,
    draw_arrivals,
    realize_channels,
)

MU = (0.4, 0.45, 0.5, 0.55, 0.6)


def make_config(**kw):
    base = dict(num_sources=3, num_channels=5, arrival_rate=0.1, reliabilities=MU, horizon=100)
    base.update(kw)
    return NetworkConfig(**base)


class TestNetworkConfig:
    def test_derived_quantities(self):
        cfg = make_config()
        assert cfg.best_channel == 4
        assert cfg.best_reliability == 0.6
        np.testing.assert_allclose(cfg.gaps, [0.2, 0.15, 0.1, 0.05, 0.0])
        assert cfg.min_gap == pytest.approx(0.05)

    @pytest.mark.parametrize("lam", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_arrival_rate_outside_open_interval(self, lam):
        with pytest.raises(ConfigError) as err:
            make_config(arrival_rate=lam)
        assert err.value.field == "arrival_rate"

    def test_rejects_tied_best_channel(self):
        with pytest.raises(ConfigError, match="unique"):
            make_config(num_channels=3, reliabilities=(0.2, 0.6, 0.6))

    @pytest.mark.parametrize("mu", [(0.0, 0.5), (0.5, 1.2)])
    def test_rejects_reliability_outside_unit_interval(self, mu):
        with pytest.raises(ConfigError):
            make_config(num_channels=2, reliabilities=mu)

    def test_reliability_one_is_allowed(self):
        assert make_config(num_channels=2, reliabilities=(0.5, 1.0)).best_channel == 1

    @pytest.mark.parametrize("field", ["num_sources", "num_channels", "horizon", "replications"])
    def test_rejects_non_positive_counts(self, field):
        with pytest.raises(ConfigError):
            make_config(**{field: 0})

    def test_rejects_length_mismatch(self):
        with pytest.raises(ConfigError):
            make_config(num_channels=4)

    def test_seeds_are_consecutive(self):
        assert make_config(base_seed=10, replications=3).seeds() == [10, 11, 12]


class TestArrivals:
    def test_zero_rate_never_arrives(self):
        rng = np.random.default_rng(0)
        assert not any(draw_arrivals(rng, 5, 0.0).any() for _ in range(100))

    def test_near_one_rate(self):
        rng = np.random.default_rng(1)
        misses = sum(not draw_arrivals(rng, 1, 0.999999)[0] for _ in range(20_000))
        assert misses / 20_000 < 1e-3

    def test_consumes_one_uniform_per_source_in_order(self):
        a, b = np.random.default_rng(5), np.random.default_rng(5)
        for _ in range(50):
            np.testing.assert_array_equal(draw_arrivals(a, 3, 0.4), b.random(3) < 0.4)
        assert a.random() == b.random()

    def test_binomial_mean(self):
        # M=3, lam=0.1: E[sum a_m] = 0.3; stderr over 1e6 slots is ~5e-4
        rng = np.random.default_rng(2)
        total = sum(int(draw_arrivals(rng, 3, 0.1).sum()) for _ in range(200_000))
        u = np.random.default_rng(3).random((800_000, 3))
        total += int((u < 0.1).sum())
        assert total / 1_000_000 == pytest.approx(0.3, abs=0.01)

    def test_freshest_packet_replaces_older(self):
        s = SystemState(9, np.zeros(3, np.int64), np.array([5, NO_PACKET, NO_PACKET]))
        s2 = apply_arrivals(s, [True, False, False])
        assert s2.queue[0] == 9
        assert s.queue[0] == 5  # input untouched

    def test_no_arrival_keeps_empty_queue(self):
        s = SystemState.initial(2)
        s2 = apply_arrivals(s, [False, False])
        assert s2.queue.tolist() == [NO_PACKET, NO_PACKET]
        assert s2.empty and s.empty

    def test_arrival_clears_empty_flag(self):
        s = SystemState(4, np.zeros(3, np.int64), np.full(3, NO_PACKET))
        s2 = apply_arrivals(s, [False, True, False])
        assert s2.queue[1] == 4
        assert not s2.empty


class TestChannels:
    def test_threshold_example(self):
        draw = channels_from_uniform(0.47, MU)
        assert draw.states.tolist() == [False, False, True, True, True]

    def test_zero_turns_everything_on(self):
        assert channels_from_uniform(0.0, MU).states.all()

    def test_one_turns_everything_off(self):
        assert not channels_from_uniform(1.0, MU).states.any()

    def test_single_draw_per_slot(self):
        a, b = np.random.default_rng(9), np.random.default_rng(9)
        draw = realize_channels(a, MU)
        assert draw.u == b.random()
        assert a.random() == b.random()

    @given(st.floats(0, 1), st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8))
    def test_coupling_is_monotone(self, u, mu):
        states = channels_from_uniform(u, mu).states
        for i in range(len(mu)):
            for j in range(len(mu)):
                if mu[i] <= mu[j] and states[i]:
                    assert states[j]

    def test_marginals(self):
        R = 200_000
        rng = np.random.default_rng(4)
        u = rng.random(R)
        on = u[:, None] <= np.asarray(MU)
        freq = on.mean(axis=0)
        for n, mu in enumerate(MU):
            assert abs(freq[n] - mu) <= 3 * np.sqrt(mu * (1 - mu) / R)


class TestAdvance:
    def test_increment_without_delivery(self):
        s = SystemState(10, np.array([5]), np.array([NO_PACKET]))
        assert s.aoi[0] == 5
        assert advance_aoi(s).aoi[0] == 6

    def test_delivery_resets_to_slot_minus_generation(self):
        s = SystemState(20, np.array([3]), np.array([18]))
        s2 = advance_aoi(s, (0, 18))
        assert s2.slot == 21 and s2.aoi[0] == 3
        assert s2.queue[0] == NO_PACKET and s2.empty

    def test_same_slot_generate_and_deliver(self):
        s = apply_arrivals(SystemState(7, np.array([2]), np.array([NO_PACKET])), [True])
        assert advance_aoi(s, (0, 7)).aoi[0] == 1

    def test_other_sources_age(self):
        s = SystemState(5, np.array([1, 2]), np.array([4, 5]))
        s2 = advance_aoi(s, (1, 5))
        assert s2.aoi.tolist() == [5, 1]

    def test_stale_delivery_is_rejected(self):
        s = SystemState(20, np.array([18]), np.array([NO_PACKET]))
        with pytest.raises(InvariantViolation):
            advance_aoi(s, (0, 17))

    def test_phantom_delivery_is_rejected(self):
        s = SystemState(20, np.array([10]), np.array([NO_PACKET]))
        with pytest.raises(InvariantViolation):
            advance_aoi(s, (0, 15))

    def test_initial_state(self):
        s = SystemState.initial(4)
        assert s.slot == 1
        assert s.aoi.tolist() == [1, 1, 1, 1]
        assert s.empty


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 4),
    st.lists(st.tuples(st.lists(st.booleans(), min_size=4, max_size=4), st.booleans(),
                       st.integers(0, 3)), min_size=1, max_size=60),
)
def test_random_paths_keep_age_identity(num_sources, steps):
    """h = t - tau, unit increments, resets never below 1, queues fresher than deliveries."""
    s = SystemState.initial(num_sources)
    prev = s.aoi.copy()
    for arrivals, success, pick in steps:
        s = apply_arrivals(s, arrivals[:num_sources])
        s.check()
        m = pick % num_sources
        delivered = (m, int(s.queue[m])) if success and s.has_packet(m) else None
        s = advance_aoi(s, delivered)
        s.check()
        np.testing.assert_array_equal(s.aoi, s.slot - s.last_delivery)
        step = s.aoi - prev
        assert np.all(s.aoi >= 1)
        assert np.all(step <= 1)
        if delivered is None:
            assert np.all(step == 1)
        prev = s.aoi.copy()
