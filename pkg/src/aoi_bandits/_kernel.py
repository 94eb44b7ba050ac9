"""Compiled per-slot loop for one replication (learner and genie side by side).

Mirrors ``simulator._simulate_python`` operation for operation, including
the order of random draws; the test-suite checks the two against each other.
"""

from __future__ import annotations

import math

import numba
import numpy as np

# source policy kinds
ABMW = 0
ROUNDROBIN = 1

# channel policy kinds, same values as channels.PolicyKind
EPS_GREEDY = 0
UCB = 1
TS = 2
OPTIMAL = 3
HYBRID = 4
GENIE = 5


@numba.njit(cache=True, nogil=True)
def _select_source(kind, t, queue, last_delivery):
    M = queue.shape[0]
    if kind == ROUNDROBIN:
        return (t - 1) % M
    best = -1
    best_w = 0
    for m in range(M):
        if queue[m] >= 0:
            w = queue[m] - last_delivery[m]
            if best < 0 or w > best_w:
                best = m
                best_w = w
    if best >= 0:
        return best
    # dummy slot: largest AoI is the smallest delivery time
    best = 0
    for m in range(1, M):
        if last_delivery[m] < last_delivery[best]:
            best = m
    return best


@numba.njit(cache=True, nogil=True)
def _argmax_estimate(succ, cnt):
    best = 0
    best_v = -1.0
    for n in range(succ.shape[0]):
        v = succ[n] / cnt[n] if cnt[n] > 0 else 0.0
        if v > best_v:
            best = n
            best_v = v
    return best


@numba.njit(cache=True, nogil=True)
def _ts_select(succ, cnt, rng):
    best = 0
    best_v = -1.0
    for n in range(succ.shape[0]):
        v = rng.beta(1.0 + succ[n], 1.0 + cnt[n] - succ[n])
        if v > best_v:
            best = n
            best_v = v
    return best


@numba.njit(cache=True, nogil=True)
def _select_channel(kind, t, empty, succ, cnt, rng, eps_c, ucb_c, switch_slot, best_channel):
    N = succ.shape[0]
    if kind == GENIE:
        return best_channel
    if kind == TS or (kind == HYBRID and t <= switch_slot):
        return _ts_select(succ, cnt, rng)
    if kind == OPTIMAL or kind == HYBRID:
        if empty:
            return int(rng.random() * N)
        return _argmax_estimate(succ, cnt)
    if kind == EPS_GREEDY:
        if rng.random() < min(1.0, eps_c / t):
            return int(rng.random() * N)
        return _argmax_estimate(succ, cnt)
    # UCB
    for n in range(N):
        if cnt[n] == 0:
            return n
    log_t = math.log(t)
    best = 0
    best_v = -math.inf
    for n in range(N):
        v = succ[n] / cnt[n] + math.sqrt(ucb_c * log_t / cnt[n])
        if v > best_v:
            best = n
            best_v = v
    return best


@numba.njit(cache=True, nogil=True)
def _observes(kind, t, empty, observe_empty, switch_slot):
    if kind == GENIE:
        return False
    if kind == OPTIMAL or (kind == HYBRID and t > switch_slot):
        return empty
    return observe_empty or not empty


@numba.njit(cache=True, nogil=True)
def simulate(env, genie_env, lam, mu, best_channel, source_kind, channel_kind,
             eps_c, ucb_c, switch_slot, observe_empty, mirrored, rng, grid, record):
    """Run slots ``1..T`` (``T = env.shape[0]``).

    ``env[t-1]`` holds the arrival uniforms of slot ``t`` then ``U(t)``;
    ``genie_env`` is the genie's copy (the same array under common random
    numbers).  ``grid`` lists 1-based slots at which cumulative quantities
    are sampled.  Per-slot arrays are filled only when ``record`` is true.
    """
    T = env.shape[0]
    M = env.shape[1] - 1
    N = mu.shape[0]
    G = grid.shape[0]

    q_l = np.full(M, -1, np.int64)
    d_l = np.zeros(M, np.int64)
    q_g = np.full(M, -1, np.int64)
    d_g = np.zeros(M, np.int64)
    succ = np.zeros(N, np.int64)
    cnt = np.zeros(N, np.int64)
    pulls = np.zeros(N, np.int64)

    cum_l = 0
    cum_g = 0
    g_cum_l = np.zeros(G, np.int64)
    g_cum_g = np.zeros(G, np.int64)
    g_pulls = np.zeros((G, N), np.int64)
    g_est = np.zeros((G, N), np.float64)
    g_cnt = np.zeros((G, N), np.int64)
    gi = 0
    min_gap = np.iinfo(np.int64).max

    # periods start in slots t with E(t-1)=0 and E(t)=1, taking E(0)=0
    cap = T // 2 + 2
    p_start = np.zeros(cap, np.int64)
    p_end = np.zeros(cap, np.int64)
    p_chan = np.full(cap, -1, np.int64)
    p_unique = np.ones(cap, np.bool_)
    p_y = np.zeros((cap, M), np.int64)
    p_gap_sum = np.zeros(cap, np.int64)
    p_gap_max = np.zeros(cap, np.int64)
    P = 0
    open_p = -1
    prev_empty = False

    R = T if record else 0
    tr_arr = np.zeros((R, M), np.bool_)
    tr_u = np.zeros(R, np.float64)
    tr_empty = np.zeros((R, 2), np.bool_)
    tr_src = np.zeros((R, 2), np.int64)
    tr_chan = np.zeros((R, 2), np.int64)
    tr_dummy = np.zeros((R, 2), np.bool_)
    tr_succ = np.zeros((R, 2), np.bool_)
    tr_deliv = np.zeros((R, 2), np.bool_)
    tr_aoi = np.zeros((R, 2, M), np.int64)
    tr_est = np.zeros((R, N), np.float64)

    for t in range(1, T + 1):
        row = env[t - 1]
        grow = genie_env[t - 1]
        for m in range(M):
            if row[m] < lam:
                q_l[m] = t
            if grow[m] < lam:
                q_g[m] = t
        empty_l = True
        empty_g = True
        for m in range(M):
            if q_l[m] >= 0:
                empty_l = False
            if q_g[m] >= 0:
                empty_g = False

        m_l = _select_source(source_kind, t, q_l, d_l)
        if mirrored:
            m_g = m_l
        else:
            m_g = _select_source(source_kind, t, q_g, d_g)
        n_l = _select_channel(channel_kind, t, empty_l, succ, cnt, rng,
                              eps_c, ucb_c, switch_slot, best_channel)
        n_g = best_channel

        u = row[M]
        b_l = u <= mu[n_l]
        b_g = grow[M] <= mu[n_g]

        # AoI at the beginning of slot t
        s_l = 0
        s_g = 0
        gap_sum = 0
        gap_abs = 0
        for m in range(M):
            h_l = t - d_l[m]
            h_g = t - d_g[m]
            s_l += h_l
            s_g += h_g
            gap = h_l - h_g
            gap_sum += gap
            if gap < min_gap:
                min_gap = gap
            if abs(gap) > gap_abs:
                gap_abs = abs(gap)
        cum_l += s_l
        cum_g += s_g

        if empty_l and not prev_empty:
            if open_p >= 0:
                p_end[open_p] = t - 1
            open_p = P
            p_start[P] = t
            P += 1
        if open_p >= 0:
            for m in range(M):
                p_y[open_p, m] += t - d_l[m]
            p_gap_sum[open_p] += gap_sum
            if gap_abs > p_gap_max[open_p]:
                p_gap_max[open_p] = gap_abs
            if not empty_l:
                if p_chan[open_p] < 0:
                    p_chan[open_p] = n_l
                elif p_chan[open_p] != n_l:
                    p_unique[open_p] = False
        prev_empty = empty_l

        if record:
            i = t - 1
            for m in range(M):
                tr_arr[i, m] = row[m] < lam
                tr_aoi[i, 0, m] = t - d_l[m]
                tr_aoi[i, 1, m] = t - d_g[m]
            tr_u[i] = u
            tr_empty[i, 0] = empty_l
            tr_empty[i, 1] = empty_g
            tr_src[i, 0] = m_l
            tr_src[i, 1] = m_g
            tr_chan[i, 0] = n_l
            tr_chan[i, 1] = n_g
            tr_dummy[i, 0] = q_l[m_l] < 0
            tr_dummy[i, 1] = q_g[m_g] < 0
            tr_succ[i, 0] = b_l
            tr_succ[i, 1] = b_g
            tr_deliv[i, 0] = b_l and q_l[m_l] >= 0
            tr_deliv[i, 1] = b_g and q_g[m_g] >= 0

        if b_l and q_l[m_l] >= 0:
            d_l[m_l] = q_l[m_l]
            q_l[m_l] = -1
        if b_g and q_g[m_g] >= 0:
            d_g[m_g] = q_g[m_g]
            q_g[m_g] = -1

        pulls[n_l] += 1
        if _observes(channel_kind, t, empty_l, observe_empty, switch_slot):
            cnt[n_l] += 1
            if b_l:
                succ[n_l] += 1

        if record:
            for n in range(N):
                tr_est[t - 1, n] = succ[n] / cnt[n] if cnt[n] > 0 else 0.0

        while gi < G and grid[gi] == t:
            g_cum_l[gi] = cum_l
            g_cum_g[gi] = cum_g
            for n in range(N):
                g_pulls[gi, n] = pulls[n]
                g_cnt[gi, n] = cnt[n]
                g_est[gi, n] = succ[n] / cnt[n] if cnt[n] > 0 else 0.0
            gi += 1

    # the period still open at T is an incomplete tail
    n_complete = P - 1 if open_p >= 0 else 0
    return (g_cum_l, g_cum_g, g_pulls, g_est, g_cnt, min_gap,
            p_start[:n_complete].copy(), p_end[:n_complete].copy(), p_chan[:n_complete].copy(),
            p_unique[:n_complete].copy(), p_y[:n_complete].copy(),
            p_gap_sum[:n_complete].copy(), p_gap_max[:n_complete].copy(),
            tr_arr, tr_u, tr_empty, tr_src, tr_chan, tr_dummy, tr_succ, tr_deliv, tr_aoi, tr_est)
