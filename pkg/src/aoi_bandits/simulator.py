"""Replication driver: a learner and a genie on shared randomness.

The genie runs the same source policy as the learner and always transmits on
the most reliable channel.  Two run modes are supported:

``independent``
    the genie picks its own sources from its own state;
``mirrored``
    the genie transmits from whichever source the learner picked, the
    auxiliary construction under which learner AoI dominates genie AoI
    slot by slot.

Under common random numbers (the default) learner and genie see the same
arrivals and the same channel uniform ``U(t)``.  Switching them off gives the
genie its own environment stream, i.e. two independent runs.

Each slot follows a fixed order: arrivals, empty flag, source choice,
channel choice, one channel uniform, delivery, AoI update, and finally the
learner's channel policy sees ``(channel, success)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernel
from .channels import ChannelPolicySpec, PolicyKind
from .model import (
    InvariantViolation,
    NetworkConfig,
    SystemState,
    advance_aoi,
    apply_arrivals,
    arrivals_from_uniforms,
    channels_from_uniform,
)
from .rng import Stream, environment_uniforms, replication_seed, stream
from .sources import SourceSelectionInput, make_source_policy

_SOURCE_KINDS = {"abmw": _kernel.ABMW, "roundrobin": _kernel.ROUNDROBIN}


class RunMode(str, Enum):
    INDEPENDENT = "independent"
    MIRRORED = "mirrored"


def default_grid(horizon: int, points: int = 200) -> np.ndarray:
    """Log-spaced slots in ``[1, horizon]`` plus every power of ten and the horizon."""
    logs = np.geomspace(1, horizon, points).round().astype(np.int64)
    decades = 10 ** np.arange(int(np.log10(horizon)) + 1, dtype=np.int64)
    return np.unique(np.concatenate([logs, decades, [horizon]]))


@dataclass
class SlotRecords:
    """Per-slot log of one scheduler (row ``t-1`` is slot ``t``)."""

    empty: np.ndarray
    source: np.ndarray
    channel: np.ndarray
    dummy: np.ndarray
    success: np.ndarray
    delivered: np.ndarray
    aoi: np.ndarray  # (T, M), AoI at the beginning of each slot


@dataclass
class Periods:
    """Complete periods of the learner, as recorded by the kernel.

    ``channel`` is the single channel used throughout the nonempty phase, or
    -1 if the phase used several.  ``cumulative_aoi[p, m]`` sums the
    learner's AoI of source ``m`` over the period.  ``gap_sum`` and
    ``gap_max`` are the summed and the largest absolute learner-minus-genie
    AoI difference inside the period.
    """

    start: np.ndarray
    end: np.ndarray
    channel: np.ndarray
    cumulative_aoi: np.ndarray
    gap_sum: np.ndarray
    gap_max: np.ndarray

    def __len__(self):
        return len(self.start)


@dataclass
class ReplicationTrace:
    config: NetworkConfig
    policy: ChannelPolicySpec
    source_policy: str
    mode: RunMode
    seed: int
    grid: np.ndarray
    cum_aoi: np.ndarray  # (G,) learner total AoI summed over slots <= grid
    cum_aoi_genie: np.ndarray
    pulls: np.ndarray  # (G, N) selections per channel
    estimates: np.ndarray  # (G, N)
    observations: np.ndarray  # (G, N) outcomes folded into the estimates
    min_aoi_gap: int
    period_channels: np.ndarray  # int8, one entry per complete period
    period_stats: dict = field(default_factory=dict)
    periods: Optional[Periods] = None
    arrivals: Optional[np.ndarray] = None
    uniforms: Optional[np.ndarray] = None
    learner: Optional[SlotRecords] = None
    genie: Optional[SlotRecords] = None
    estimate_path: Optional[np.ndarray] = None  # (T, N) estimates after each slot

    @property
    def regret(self) -> np.ndarray:
        return self.cum_aoi - self.cum_aoi_genie

    @property
    def suboptimal_choices(self) -> np.ndarray:
        best = self.config.best_channel
        return self.pulls.sum(axis=1) - self.pulls[:, best]

    def slot_rows(self) -> Iterable[dict]:
        """One plain dict per slot, for line-delimited dumps."""
        if self.learner is None:
            raise ValueError("trace was run without per-slot recording")
        for i in range(len(self.uniforms)):
            row = {"t": i + 1, "arrivals": self.arrivals[i].astype(int).tolist(),
                   "u": float(self.uniforms[i])}
            for side, rec in (("learner", self.learner), ("genie", self.genie)):
                row[side] = {
                    "empty": bool(rec.empty[i]), "source": int(rec.source[i]),
                    "channel": int(rec.channel[i]), "dummy": bool(rec.dummy[i]),
                    "success": bool(rec.success[i]), "delivered": bool(rec.delivered[i]),
                    "aoi": rec.aoi[i].tolist(),
                }
            yield row


def _simulate_python(env, genie_env, lam, mu, best_channel, source_name, spec,
                     mirrored, rng, grid, record):
    """Reference implementation built from the model-level steps.

    Slow; returns the same tuple layout as ``_kernel.simulate``.
    """
    T, M = env.shape[0], env.shape[1] - 1
    N = len(mu)
    policy = spec.build(N, best_channel)
    src_l = make_source_policy(source_name)
    src_g = make_source_policy(source_name)
    learner = SystemState.initial(M)
    genie = SystemState.initial(M)
    grid = list(grid)

    cum = [0, 0]
    out_grid = {k: [] for k in ("cum_l", "cum_g", "pulls", "est", "cnt")}
    pulls = np.zeros(N, dtype=np.int64)
    min_gap = np.iinfo(np.int64).max
    periods = []
    prev_empty = False
    trace = {k: [] for k in ("arr", "u", "empty", "src", "chan", "dummy", "succ", "deliv", "aoi", "est")}

    for t in range(1, T + 1):
        a_l = arrivals_from_uniforms(env[t - 1, :M], lam)
        a_g = arrivals_from_uniforms(genie_env[t - 1, :M], lam)
        learner = apply_arrivals(learner, a_l)
        genie = apply_arrivals(genie, a_g)
        e_l, e_g = learner.empty, genie.empty
        m_l = src_l(SourceSelectionInput.from_state(learner))
        m_g = m_l if mirrored else src_g(SourceSelectionInput.from_state(genie))
        n_l = policy.select(t, e_l, rng)
        n_g = best_channel
        draw_l = channels_from_uniform(env[t - 1, M], mu)
        draw_g = channels_from_uniform(genie_env[t - 1, M], mu)
        b_l, b_g = bool(draw_l.states[n_l]), bool(draw_g.states[n_g])

        h_l, h_g = learner.aoi, genie.aoi
        cum[0] += int(h_l.sum())
        cum[1] += int(h_g.sum())
        gap = h_l - h_g
        min_gap = min(min_gap, int(gap.min()))
        if e_l and not prev_empty:
            if periods:
                periods[-1]["end"] = t - 1
            periods.append({"start": t, "end": None, "chan": -1, "unique": True,
                            "y": np.zeros(M, dtype=np.int64), "gap_sum": 0, "gap_max": 0})
        if periods:
            p = periods[-1]
            p["y"] += h_l
            p["gap_sum"] += int(gap.sum())
            p["gap_max"] = max(p["gap_max"], int(np.abs(gap).max()))
            if not e_l:
                if p["chan"] < 0:
                    p["chan"] = n_l
                elif p["chan"] != n_l:
                    p["unique"] = False
        prev_empty = e_l

        deliv_l = b_l and learner.has_packet(m_l)
        deliv_g = b_g and genie.has_packet(m_g)
        if record:
            trace["arr"].append(a_l)
            trace["u"].append(draw_l.u)
            trace["empty"].append((e_l, e_g))
            trace["src"].append((m_l, m_g))
            trace["chan"].append((n_l, n_g))
            trace["dummy"].append((not learner.has_packet(m_l), not genie.has_packet(m_g)))
            trace["succ"].append((b_l, b_g))
            trace["deliv"].append((deliv_l, deliv_g))
            trace["aoi"].append((h_l, h_g))
        learner = advance_aoi(learner, (m_l, int(learner.queue[m_l])) if deliv_l else None)
        genie = advance_aoi(genie, (m_g, int(genie.queue[m_g])) if deliv_g else None)

        pulls[n_l] += 1
        policy.observe(n_l, b_l, e_l)
        if record:
            trace["est"].append(policy.estimates)
        while grid and grid[0] == t:
            grid.pop(0)
            out_grid["cum_l"].append(cum[0])
            out_grid["cum_g"].append(cum[1])
            out_grid["pulls"].append(pulls.copy())
            out_grid["est"].append(policy.estimates)
            out_grid["cnt"].append(policy.counts.copy())

    complete = periods[:-1] if periods else []
    as_arr = lambda key, dtype: np.array([p[key] for p in complete], dtype=dtype)
    chans = as_arr("chan", np.int64)
    unique = as_arr("unique", bool)
    y = np.array([p["y"] for p in complete], dtype=np.int64).reshape(len(complete), M)

    def stack(key, dtype, shape):
        return np.array(trace[key], dtype=dtype).reshape(shape) if record else np.zeros((0,) + shape[1:], dtype)

    R = T if record else 0
    return (
        np.array(out_grid["cum_l"], dtype=np.int64), np.array(out_grid["cum_g"], dtype=np.int64),
        np.array(out_grid["pulls"], dtype=np.int64).reshape(-1, N),
        np.array(out_grid["est"], dtype=np.float64).reshape(-1, N),
        np.array(out_grid["cnt"], dtype=np.int64).reshape(-1, N),
        min_gap,
        as_arr("start", np.int64), as_arr("end", np.int64), chans, unique, y,
        as_arr("gap_sum", np.int64), as_arr("gap_max", np.int64),
        stack("arr", bool, (R, M)), stack("u", np.float64, (R,)), stack("empty", bool, (R, 2)),
        stack("src", np.int64, (R, 2)), stack("chan", np.int64, (R, 2)),
        stack("dummy", bool, (R, 2)), stack("succ", bool, (R, 2)), stack("deliv", bool, (R, 2)),
        stack("aoi", np.int64, (R, 2, M)), stack("est", np.float64, (R, N)),
    )


def _environments(config: NetworkConfig, seed: int, common_random_numbers: bool):
    env = environment_uniforms(stream(seed, Stream.ENVIRONMENT), config.horizon, config.num_sources)
    if common_random_numbers:
        return env, env
    genie_env = environment_uniforms(stream(seed, Stream.GENIE_ENVIRONMENT),
                                     config.horizon, config.num_sources)
    return env, genie_env


def simulate_environment(config: NetworkConfig, policy: ChannelPolicySpec, env: np.ndarray,
                         genie_env: Optional[np.ndarray] = None, *, source_policy: str = "abmw",
                         mode: RunMode | str = RunMode.INDEPENDENT,
                         rng: Optional[np.random.Generator] = None,
                         grid: Optional[Sequence[int]] = None, record: bool = False,
                         backend: str = "numba", seed: int = -1,
                         keep_periods: bool = True) -> ReplicationTrace:
    """Run one replication on an explicit environment array.

    ``env`` has shape ``(T, M + 1)``: arrival uniforms of each slot followed by
    its channel uniform.  This is the entry point for scripted or enumerated
    environments; :func:`run_replication` draws ``env`` from the seed.
    """
    mode = RunMode(mode)
    if source_policy not in _SOURCE_KINDS:
        raise ValueError(f"unknown source policy {source_policy!r}")
    env = np.ascontiguousarray(env, dtype=np.float64)
    genie_env = env if genie_env is None else np.ascontiguousarray(genie_env, dtype=np.float64)
    T, M = env.shape[0], env.shape[1] - 1
    if M != config.num_sources or genie_env.shape != env.shape:
        raise ValueError("environment shape does not match the configuration")
    if mode is RunMode.MIRRORED and genie_env is not env and not np.array_equal(genie_env, env):
        raise ValueError("mirrored mode needs common random numbers")
    grid = default_grid(T) if grid is None else np.asarray(grid, dtype=np.int64)
    if grid.size and (np.any(np.diff(grid) <= 0) or grid[0] < 1 or grid[-1] > T):
        raise ValueError("grid must be strictly increasing slots within [1, T]")
    rng = np.random.default_rng(0) if rng is None else rng
    spec = policy
    eps_c = 10.0 * config.num_channels if spec.eps_c is None else float(spec.eps_c)
    mirrored = mode is RunMode.MIRRORED

    if backend == "numba":
        out = _kernel.simulate(env, genie_env, float(config.arrival_rate), config.mu,
                               config.best_channel, _SOURCE_KINDS[source_policy], int(spec.kind),
                               eps_c, float(spec.ucb_c), int(spec.switch_slot),
                               bool(spec.observe_empty), mirrored, rng, grid, bool(record))
    elif backend == "python":
        out = _simulate_python(env, genie_env, float(config.arrival_rate), config.mu,
                               config.best_channel, source_policy, spec, mirrored, rng, grid,
                               bool(record))
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return _assemble(config, spec, source_policy, mode, seed, grid, out, record, keep_periods)


def _assemble(config, spec, source_policy, mode, seed, grid, out, record, keep_periods):
    (cum_l, cum_g, pulls, est, cnt, min_gap, p_start, p_end, p_chan, p_unique, p_y,
     p_gap_sum, p_gap_max, tr_arr, tr_u, tr_empty, tr_src, tr_chan, tr_dummy, tr_succ,
     tr_deliv, tr_aoi, tr_est) = out
    channels = np.where(p_unique, p_chan, -1)
    best = config.best_channel
    optimal = channels == best
    suboptimal = (channels >= 0) & ~optimal
    stats = {
        "count": int(len(channels)),
        "optimal": int(optimal.sum()),
        "suboptimal": int(suboptimal.sum()),
        "mixed": int((channels < 0).sum()),
        "optimal_with_gap": int((optimal & (p_gap_max != 0)).sum()),
        "optimal_gap_sum": int(p_gap_sum[optimal].sum()),
        "suboptimal_gap_sum": int(p_gap_sum[suboptimal].sum()),
        "y_suboptimal_sum": p_y[suboptimal].sum(axis=0),
        "y_optimal_sum": p_y[optimal].sum(axis=0),
    }
    trace = ReplicationTrace(
        config=config, policy=spec, source_policy=source_policy, mode=mode, seed=seed,
        grid=grid, cum_aoi=cum_l, cum_aoi_genie=cum_g, pulls=pulls, estimates=est,
        observations=cnt, min_aoi_gap=int(min_gap), period_channels=channels.astype(np.int8),
        period_stats=stats,
    )
    if keep_periods or record:
        trace.periods = Periods(p_start, p_end, channels, p_y, p_gap_sum, p_gap_max)
    if record:
        trace.arrivals = tr_arr
        trace.uniforms = tr_u
        trace.learner = SlotRecords(tr_empty[:, 0], tr_src[:, 0], tr_chan[:, 0], tr_dummy[:, 0],
                                    tr_succ[:, 0], tr_deliv[:, 0], tr_aoi[:, 0])
        trace.genie = SlotRecords(tr_empty[:, 1], tr_src[:, 1], tr_chan[:, 1], tr_dummy[:, 1],
                                  tr_succ[:, 1], tr_deliv[:, 1], tr_aoi[:, 1])
        trace.estimate_path = tr_est
    return trace


def run_replication(config: NetworkConfig, policy: ChannelPolicySpec | str,
                    mode: RunMode | str = RunMode.INDEPENDENT, seed: Optional[int] = None, *,
                    source_policy: str = "abmw", grid: Optional[Sequence[int]] = None,
                    record: bool = False, common_random_numbers: bool = True,
                    backend: str = "numba", keep_periods: bool = True) -> ReplicationTrace:
    """Simulate one replication; a pure function of its arguments.

    ``seed`` defaults to the configuration's base seed (replication 0).
    """
    if isinstance(policy, str):
        policy = ChannelPolicySpec(policy)
    mode = RunMode(mode)
    if mode is RunMode.MIRRORED and not common_random_numbers:
        raise ValueError("mirrored mode needs common random numbers")
    seed = replication_seed(config.base_seed, 0) if seed is None else int(seed)
    env, genie_env = _environments(config, seed, common_random_numbers)
    return simulate_environment(
        config, policy, env, genie_env, source_policy=source_policy, mode=mode,
        rng=stream(seed, Stream.LEARNER), grid=grid, record=record, backend=backend,
        seed=seed, keep_periods=keep_periods,
    )


def check_invariants(trace: ReplicationTrace) -> None:
    """Raise :class:`InvariantViolation` for any broken runtime guarantee."""
    if trace.mode is RunMode.MIRRORED and trace.min_aoi_gap < 0:
        raise InvariantViolation("learner AoI fell below mirrored genie AoI", trace.seed)
    if trace.policy.kind is PolicyKind.OPTIMAL:
        if trace.period_stats["mixed"]:
            raise InvariantViolation("channel changed inside a nonempty phase", trace.seed)
        if trace.mode is RunMode.MIRRORED and trace.period_stats["optimal_with_gap"]:
            raise InvariantViolation("optimal period with nonzero AoI difference", trace.seed)
    if trace.learner is not None:
        for rec in (trace.learner, trace.genie):
            steps = np.diff(rec.aoi, axis=0)
            if np.any(rec.aoi < 1) or np.any(steps > 1):
                raise InvariantViolation("AoI path is not a unit-step sawtooth", trace.seed)
            if np.any(rec.delivered & rec.dummy):
                raise InvariantViolation("dummy transmission delivered a packet", trace.seed)


def run_batch(config: NetworkConfig, policy: ChannelPolicySpec | str,
              mode: RunMode | str = RunMode.INDEPENDENT, *, source_policy: str = "abmw",
              grid: Optional[Sequence[int]] = None, replications: Optional[int] = None,
              common_random_numbers: bool = True, threads: int = 1, check: bool = True,
              progress=None) -> list[ReplicationTrace]:
    """Run replications ``0..R-1`` with seeds ``base_seed + r``.

    Results come back in seed order whatever the thread count.  Full period
    tables are dropped to keep memory flat; per-period channels and
    aggregated period statistics are kept.
    """
    if isinstance(policy, str):
        policy = ChannelPolicySpec(policy)
    grid = default_grid(config.horizon) if grid is None else np.asarray(grid, dtype=np.int64)
    count = config.replications if replications is None else replications
    seeds = [replication_seed(config.base_seed, r) for r in range(count)]

    def one(seed):
        trace = run_replication(config, policy, mode, seed, source_policy=source_policy,
                                grid=grid, common_random_numbers=common_random_numbers,
                                keep_periods=False)
        if check:
            check_invariants(trace)
        if progress is not None:
            progress(seed)
        return trace

    if threads <= 1:
        return [one(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, seeds))


def segment_periods(trace: ReplicationTrace, require_unique: Optional[bool] = None) -> Periods:
    """Split a recorded trace into periods from its per-slot records.

    A period starts at every slot ``t`` with ``E(t-1)=0`` and ``E(t)=1``
    (``E(0)`` counts as 0, so a run opening on an empty slot starts period 1
    at ``t=1``).  Slots before the first period are preamble; the period
    still open at the horizon is an incomplete tail.  Both are left out.

    ``require_unique`` (default: on for the empty-slot explorer) raises when
    a nonempty phase uses more than one channel.
    """
    if trace.learner is None:
        raise ValueError("segment_periods needs a trace recorded with record=True")
    rec, gen = trace.learner, trace.genie
    if require_unique is None:
        require_unique = trace.policy.kind is PolicyKind.OPTIMAL
    empty = rec.empty.astype(bool)
    prev = np.concatenate([[False], empty[:-1]])
    starts = np.flatnonzero(empty & ~prev) + 1
    M = rec.aoi.shape[1]
    if len(starts) < 2:
        z = np.zeros(0, dtype=np.int64)
        return Periods(z, z.copy(), z.copy(), np.zeros((0, M), dtype=np.int64), z.copy(), z.copy())
    ends = starts[1:] - 1
    starts = starts[:-1]
    channel, y, gap_sum, gap_max = [], [], [], []
    for s, f in zip(starts, ends):
        sl = slice(s - 1, f)
        busy = ~empty[sl]
        used = np.unique(rec.channel[sl][busy])
        if len(used) == 1:
            channel.append(int(used[0]))
        elif require_unique:
            raise InvariantViolation(f"period [{s}, {f}] used channels {used.tolist()}", trace.seed)
        else:
            channel.append(-1)
        y.append(rec.aoi[sl].sum(axis=0))
        diff = rec.aoi[sl] - gen.aoi[sl]
        gap_sum.append(int(diff.sum()))
        gap_max.append(int(np.abs(diff).max()))
    return Periods(starts.astype(np.int64), ends.astype(np.int64), np.array(channel, dtype=np.int64),
                   np.array(y, dtype=np.int64).reshape(-1, M), np.array(gap_sum, dtype=np.int64),
                   np.array(gap_max, dtype=np.int64))
