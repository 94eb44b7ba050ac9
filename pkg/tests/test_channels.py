import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoi_bandits.channels import (
    UCB,
    ChannelPolicySpec,
    EmptySlotExplorer,
    EpsilonGreedy,
    Genie,
    Hybrid,
    ThompsonSampling,
    make_channel_policy,
)

from oracles import beta_win_probability


def preset(policy, successes, counts):
    policy.state.successes[:] = successes
    policy.state.counts[:] = counts
    return policy


def within_3_sigma(hits, trials, p):
    return abs(hits / trials - p) <= 3 * math.sqrt(p * (1 - p) / trials)


class TestThompson:
    def test_success_increments_alpha(self):
        ts = ThompsonSampling(2)
        ts.observe(0, True, empty=False)
        assert ts.state.alpha[0] == 2 and ts.state.beta[0] == 1

    def test_failure_increments_beta(self):
        ts = ThompsonSampling(2)
        ts.observe(1, False, empty=True)
        assert ts.state.alpha[1] == 1 and ts.state.beta[1] == 2

    def test_symmetric_priors_select_uniformly(self):
        N, R = 4, 100_000
        ts = ThompsonSampling(N)
        rng = np.random.default_rng(11)
        picks = np.bincount([ts.select(1, False, rng) for _ in range(R)], minlength=N)
        for n in range(N):
            assert within_3_sigma(picks[n], R, 1 / N)

    def test_confident_posteriors(self):
        # alpha/beta = (100, 1) and (1, 100)
        ts = preset(ThompsonSampling(2), [99, 0], [99, 99])
        assert list(ts.state.alpha) == [100, 1] and list(ts.state.beta) == [1, 100]
        rng = np.random.default_rng(12)
        freq = np.mean([ts.select(1, False, rng) == 0 for _ in range(10_000)])
        oracle = beta_win_probability(100, 1, 1, 100)
        assert oracle > 0.999
        assert freq > 0.99

    def test_beta_draw_order(self):
        ts = preset(ThompsonSampling(3), [1, 4, 0], [3, 5, 2])
        a, b = np.random.default_rng(3), np.random.default_rng(3)
        n = ts.select(1, False, a)
        theta = [b.beta(2, 3), b.beta(5, 2), b.beta(1, 3)]
        assert n == int(np.argmax(theta))
        assert a.random() == b.random()


class TestUCB:
    def test_unplayed_first(self):
        assert preset(UCB(2), [0, 3], [0, 5]).select(7, False, None) == 0

    def test_equal_bonus_takes_best_mean(self):
        assert preset(UCB(2), [5, 6], [10, 10]).select(20, False, None) == 1

    def test_index_values(self):
        ucb = preset(UCB(2), [60, 1], [100, 2])
        idx = ucb.index(1000)
        assert idx[1] == pytest.approx(0.5 + math.sqrt(2 * math.log(1000) / 2))
        assert idx[0] == pytest.approx(0.6 + math.sqrt(2 * math.log(1000) / 100))
        assert idx[1] == pytest.approx(3.128, abs=5e-4)
        assert idx[0] == pytest.approx(0.972, abs=5e-4)
        assert ucb.select(1000, False, None) == 1


class TestEpsilonGreedy:
    def test_default_constant(self):
        assert EpsilonGreedy(5).c == 50
        assert make_channel_policy("eps-greedy", 3).c == 30

    def test_first_slot_always_explores(self):
        eg = EpsilonGreedy(5)
        assert eg.epsilon(1) == 1.0
        rng = np.random.default_rng(0)
        picks = np.bincount([eg.select(1, False, rng) for _ in range(50_000)], minlength=5)
        for n in range(5):
            assert within_3_sigma(picks[n], 50_000, 0.2)

    def test_late_exploration_rate(self):
        eg = preset(EpsilonGreedy(5, c=50), [9, 0, 0, 0, 0], [10, 10, 10, 10, 10])
        assert eg.epsilon(10**6) == pytest.approx(5e-5)
        rng = np.random.default_rng(5)
        R = 400_000
        # an exploration lands on channel 0 a fifth of the time
        off = sum(eg.select(10**6, False, rng) != 0 for _ in range(R))
        assert within_3_sigma(off, R, 5e-5 * 0.8)

    def test_exploit_branch(self):
        eg = preset(EpsilonGreedy(2), [9, 1], [10, 10])
        assert eg.select(10**12, False, np.random.default_rng(0)) == 0


class TestOptimal:
    def test_uniform_on_empty_slots(self):
        opt = EmptySlotExplorer(5)
        rng = np.random.default_rng(21)
        R = 100_000
        picks = np.bincount([opt.select(1, True, rng) for _ in range(R)], minlength=5)
        for n in range(5):
            assert within_3_sigma(picks[n], R, 0.2)

    def test_busy_slots_exploit_and_discard(self):
        opt = preset(EmptySlotExplorer(2), [3, 7], [10, 10])
        assert opt.select(5, False, None) == 1
        opt.observe(1, False, empty=False)
        assert list(opt.counts) == [10, 10]
        np.testing.assert_allclose(opt.estimates, [0.3, 0.7])

    def test_cold_start_takes_lowest_index(self):
        assert EmptySlotExplorer(3).select(1, False, None) == 0

    def test_empty_slot_updates(self):
        opt = EmptySlotExplorer(2)
        opt.observe(1, True, empty=True)
        assert list(opt.counts) == [0, 1]

    def test_busy_choice_frozen_between_empty_slots(self):
        rng = np.random.default_rng(2)
        opt = EmptySlotExplorer(4)
        stream = np.random.default_rng(3)
        for _ in range(200):
            empty = stream.random() < 0.3
            if empty:
                n = opt.select(1, True, rng)
                opt.observe(n, stream.random() < 0.5, True)
                frozen = None
            else:
                n = opt.select(1, False, rng)
                if frozen is None:
                    frozen = n
                assert n == frozen
                opt.observe(n, stream.random() < 0.5, False)


class TestHybrid:
    def test_switch_boundary(self):
        hy = preset(Hybrid(2, switch_slot=100), [1, 9], [10, 10])
        assert hy.in_ts_phase(100) and not hy.in_ts_phase(101)
        assert hy.select(101, False, None) == 1

    def test_ts_phase_matches_ts(self):
        hy, ts = Hybrid(3, switch_slot=50), ThompsonSampling(3)
        a, b = np.random.default_rng(8), np.random.default_rng(8)
        env = np.random.default_rng(9)
        for t in range(1, 51):
            empty = env.random() < 0.4
            ok = env.random() < 0.5
            n1, n2 = hy.select(t, empty, a), ts.select(t, empty, b)
            assert n1 == n2
            hy.observe(n1, ok, empty)
            ts.observe(n2, ok, empty)
        np.testing.assert_array_equal(hy.counts, ts.counts)

    def test_after_switch_only_empty_slots_update(self):
        hy = Hybrid(2, switch_slot=1)
        hy.select(2, False, None)
        hy.observe(0, True, False)
        assert hy.counts.sum() == 0
        hy.select(3, True, np.random.default_rng(0))
        hy.observe(0, True, True)
        assert hy.counts.sum() == 1


class TestGenie:
    def test_constant_and_deaf(self):
        g = make_channel_policy("genie", 5, best_channel=3)
        assert isinstance(g, Genie)
        for t in range(1, 20):
            assert g.select(t, t % 2 == 0, None) == 3
            g.observe(0, True, t % 2 == 0)
        assert g.counts.sum() == 0


def test_spec_validation():
    with pytest.raises(ValueError, match="unknown channel policy"):
        ChannelPolicySpec("softmax")
    with pytest.raises(ValueError):
        ChannelPolicySpec("ucb", ucb_c=0)


def test_dummy_observation_switch():
    ts = make_channel_policy("ts", 2, observe_empty=False)
    ts.observe(0, True, empty=True)
    ts.observe(0, True, empty=False)
    assert ts.counts[0] == 1


@settings(max_examples=50, deadline=None)
@given(
    st.sampled_from(["eps-greedy", "ucb", "ts", "hybrid"]),
    st.lists(st.tuples(st.integers(0, 2), st.booleans(), st.booleans()), max_size=80),
)
def test_bookkeeping(name, events):
    policy = make_channel_policy(name, 3, switch_slot=40)
    seen = {n: [] for n in range(3)}
    for t, (n, ok, empty) in enumerate(events, start=1):
        policy.select(t, empty, np.random.default_rng(t))
        before = policy.counts[n]
        policy.observe(n, ok, empty)
        if policy.counts[n] > before:
            seen[n].append(ok)
    for n in range(3):
        outcomes = seen[n]
        assert policy.counts[n] == len(outcomes)
        if outcomes:
            assert Fraction(int(policy.state.successes[n]), len(outcomes)) == Fraction(sum(outcomes), len(outcomes))
            assert policy.estimates[n] == pytest.approx(sum(outcomes) / len(outcomes))
        alpha, beta = policy.state.alpha[n], policy.state.beta[n]
        assert alpha - 1 == sum(outcomes)
        assert beta - 1 == len(outcomes) - sum(outcomes)
        assert alpha + beta == 2 + len(outcomes)
        assert (policy.estimates[n] * policy.counts[n]) == pytest.approx(round(policy.estimates[n] * policy.counts[n]))


@given(
    st.lists(st.integers(0, 20), min_size=3, max_size=3),
    st.integers(2, 7),
)
def test_argmax_selection_depends_only_on_order(succ, k):
    counts = [20, 20, 20]
    for cls in (EmptySlotExplorer,):
        a = preset(cls(3), succ, counts)
        b = preset(cls(3), [s * k for s in succ], [c * k for c in counts])
        assert a.select(5, False, None) == b.select(5, False, None)
    eg_a = preset(EpsilonGreedy(3, c=1e-9), succ, counts)
    eg_b = preset(EpsilonGreedy(3, c=1e-9), [s * k for s in succ], [c * k for c in counts])
    rng_a, rng_b = np.random.default_rng(0), np.random.default_rng(0)
    assert eg_a.select(10, False, rng_a) == eg_b.select(10, False, rng_b)
