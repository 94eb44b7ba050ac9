"""Regret curves, learning diagnostics and the closed-form period bounds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import NetworkConfig

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class BoundInputs:
    num_channels: int
    gaps: tuple[float, ...]  # mu* - mu_n, zero at the best channel
    best_channel: int

    @classmethod
    def from_config(cls, config: NetworkConfig) -> BoundInputs:
        return cls(config.num_channels, tuple(float(g) for g in config.gaps), config.best_channel)

    @classmethod
    def from_reliabilities(cls, reliabilities: Sequence[float]) -> BoundInputs:
        mu = np.asarray(reliabilities, dtype=np.float64)
        best = int(np.argmax(mu))
        return cls(len(mu), tuple(float(g) for g in mu[best] - mu), best)

    @property
    def suboptimal(self) -> list[int]:
        return [n for n in range(self.num_channels) if n != self.best_channel]

    @property
    def min_gap(self) -> float:
        gaps = [self.gaps[n] for n in self.suboptimal]
        return min(gaps) if gaps else math.inf


def hoeffding_bound(p, inputs: BoundInputs, n: int, clamp: bool = True):
    """Bound on the chance that period ``p`` exploits suboptimal channel ``n``.

    ``2 exp(-p / (2 N^2)) + 2 exp(-gap_n^2 p / (4 N))``, clamped to 1 unless
    ``clamp`` is false.  ``p`` may be an array.
    """
    gap = inputs.gaps[n]
    if gap <= 0:
        raise ValueError(f"channel {n} has gap {gap}; the bound needs a positive gap")
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 1):
        raise ValueError("period index starts at 1")
    N = inputs.num_channels
    value = 2.0 * np.exp(-p / (2.0 * N * N)) + 2.0 * np.exp(-gap * gap * p / (4.0 * N))
    if clamp:
        value = np.minimum(value, 1.0)
    return float(value) if value.ndim == 0 else value


def suboptimal_bound(p, inputs: BoundInputs):
    """Union over suboptimal channels of :func:`hoeffding_bound`, clamped to 1."""
    total = sum(hoeffding_bound(p, inputs, n, clamp=False) for n in inputs.suboptimal)
    return np.minimum(total, 1.0) if inputs.suboptimal else 0.0 * np.asarray(p, dtype=np.float64)


def cp_constant(inputs: BoundInputs) -> float:
    """Sum over all periods of the suboptimal-period bound (with the smallest gap)."""
    N = inputs.num_channels
    if N == 1:
        return 0.0
    dmin = inputs.min_gap
    if dmin <= 0:
        raise ValueError("the smallest gap must be positive")
    return 2 * (N - 1) / math.expm1(1 / (2 * N * N)) + 2 * (N - 1) / math.expm1(dmin * dmin / (4 * N))


@dataclass
class PeriodRates:
    """Per-period-index frequency of suboptimal periods across replications.

    Index ``i`` of each array is period ``p = i + 1``.
    """

    samples: np.ndarray
    suboptimal: np.ndarray
    per_channel: np.ndarray  # (P, N) periods exploiting each channel

    @property
    def rate(self) -> np.ndarray:
        return np.divide(self.suboptimal, self.samples, out=np.zeros(len(self.samples)),
                         where=self.samples > 0)

    @property
    def stderr(self) -> np.ndarray:
        r = self.rate
        return np.sqrt(np.divide(r * (1 - r), self.samples, out=np.zeros(len(r)),
                                 where=self.samples > 0))

    def wilson(self, z: float = 1.96) -> tuple[np.ndarray, np.ndarray]:
        n = np.maximum(self.samples, 1)
        r = self.rate
        centre = (r + z * z / (2 * n)) / (1 + z * z / n)
        half = z * np.sqrt(r * (1 - r) / n + z * z / (4 * n * n)) / (1 + z * z / n)
        return np.clip(centre - half, 0, 1), np.clip(centre + half, 0, 1)

    @property
    def partial_sum(self) -> float:
        return float(self.rate.sum())


def suboptimal_period_rate(traces, best_channel: Optional[int] = None) -> PeriodRates:
    """Empirical ``P(period p exploits a channel other than the best)``."""
    if not traces:
        raise ValueError("no traces")
    config = traces[0].config
    best = config.best_channel if best_channel is None else best_channel
    N = config.num_channels
    lengths = [len(tr.period_channels) for tr in traces]
    P = max(lengths, default=0)
    samples = np.zeros(P, dtype=np.int64)
    per_channel = np.zeros((P, N), dtype=np.int64)
    for tr in traces:
        ch = tr.period_channels.astype(np.int64)
        samples[: len(ch)] += 1
        ok = ch >= 0
        np.add.at(per_channel, (np.flatnonzero(ok), ch[ok]), 1)
    # periods that switched channels count as suboptimal
    suboptimal = samples - per_channel[:, best]
    return PeriodRates(samples, suboptimal, per_channel)


@dataclass
class MetricsRecord:
    policy: str
    grid: np.ndarray
    replications: int
    regret_mean: np.ndarray
    regret_stderr: np.ndarray
    total_aoi_mean: np.ndarray
    genie_total_aoi_mean: np.ndarray
    suboptimal_choices_mean: np.ndarray
    pulls_mean: np.ndarray
    estimates_mean: np.ndarray
    estimates_stderr: np.ndarray
    period_stats: dict = field(default_factory=dict)

    def at(self, t: int) -> int:
        """Grid column of slot ``t``."""
        i = int(np.searchsorted(self.grid, t))
        if i >= len(self.grid) or self.grid[i] != t:
            raise KeyError(f"slot {t} is not on the grid")
        return i

    def regret_at(self, t: int) -> float:
        return float(self.regret_mean[self.at(t)])


def _stderr(x: np.ndarray) -> np.ndarray:
    if x.shape[0] < 2:
        return np.zeros(x.shape[1:])
    return x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])


def regret_curve(traces, grid: Optional[Sequence[int]] = None) -> MetricsRecord:
    """Average regret, suboptimal choices and estimates over replications.

    ``grid`` must be a subset of the slots the traces were sampled on; it
    defaults to all of them.
    """
    if not traces:
        raise ValueError("no traces")
    first = traces[0]
    for tr in traces[1:]:
        if (tr.config != first.config or tr.policy != first.policy or tr.mode != first.mode
                or tr.source_policy != first.source_policy or not np.array_equal(tr.grid, first.grid)):
            raise ValueError("traces come from different experiment settings")
    cols = np.arange(len(first.grid))
    if grid is not None:
        grid = np.asarray(grid, dtype=np.int64)
        cols = np.searchsorted(first.grid, grid)
        if np.any(cols >= len(first.grid)) or not np.array_equal(first.grid[cols], grid):
            raise ValueError("requested grid is not a subset of the recorded grid")

    regret = np.stack([tr.regret[cols] for tr in traces]).astype(np.float64)
    cum_l = np.stack([tr.cum_aoi[cols] for tr in traces]).astype(np.float64)
    cum_g = np.stack([tr.cum_aoi_genie[cols] for tr in traces]).astype(np.float64)
    pulls = np.stack([tr.pulls[cols] for tr in traces]).astype(np.float64)
    est = np.stack([tr.estimates[cols] for tr in traces])
    best = first.config.best_channel
    K = pulls.sum(axis=2) - pulls[:, :, best]

    stats = _period_stats(traces)
    return MetricsRecord(
        policy=first.policy.name, grid=first.grid[cols].copy(), replications=len(traces),
        regret_mean=regret.mean(axis=0), regret_stderr=_stderr(regret),
        total_aoi_mean=cum_l.mean(axis=0), genie_total_aoi_mean=cum_g.mean(axis=0),
        suboptimal_choices_mean=K.mean(axis=0), pulls_mean=pulls.mean(axis=0),
        estimates_mean=est.mean(axis=0), estimates_stderr=_stderr(est), period_stats=stats,
    )


def _period_stats(traces) -> dict:
    keys = ("count", "optimal", "suboptimal", "mixed", "optimal_with_gap")
    totals = {k: int(sum(tr.period_stats[k] for tr in traces)) for k in keys}
    y_sub = sum(tr.period_stats["y_suboptimal_sum"] for tr in traces)
    y_opt = sum(tr.period_stats["y_optimal_sum"] for tr in traces)
    totals["mean_periods_per_replication"] = totals["count"] / len(traces)
    totals["y_mean_suboptimal"] = (np.asarray(y_sub) / totals["suboptimal"]).tolist() \
        if totals["suboptimal"] else None
    totals["y_mean_optimal"] = (np.asarray(y_opt) / totals["optimal"]).tolist() \
        if totals["optimal"] else None
    return totals


def estimate_coverage(traces, channel: int, z: float = 3.0) -> float:
    """Fraction of replications whose final estimate of ``channel`` lies
    within ``z`` binomial standard errors of the true reliability.

    Replications that never observed the channel count as misses.
    """
    mu = traces[0].config.reliabilities[channel]
    hits = 0
    for tr in traces:
        count = tr.observations[-1, channel]
        if count == 0:
            continue
        radius = z * math.sqrt(mu * (1 - mu) / count)
        hits += abs(tr.estimates[-1, channel] - mu) <= radius
    return hits / len(traces)


def _fmt(x) -> str:
    return format(float(x), ".9g")


REGRET_COLUMNS = ("t", "R_mean", "R_stderr", "K_mean")


def write_regret_csv(record: MetricsRecord, path) -> None:
    """``t, R_mean, R_stderr, K_mean, pulls_0 .. pulls_{N-1}``."""
    N = record.pulls_mean.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(REGRET_COLUMNS) + [f"pulls_{n}" for n in range(N)])
        for i, t in enumerate(record.grid):
            w.writerow([int(t), _fmt(record.regret_mean[i]), _fmt(record.regret_stderr[i]),
                        _fmt(record.suboptimal_choices_mean[i])]
                       + [_fmt(v) for v in record.pulls_mean[i]])


def write_estimates_csv(record: MetricsRecord, path) -> None:
    """``t, est_0 .. est_{N-1}, est_stderr_0 .. est_stderr_{N-1}``."""
    N = record.estimates_mean.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"est_{n}" for n in range(N)] + [f"est_stderr_{n}" for n in range(N)])
        for i, t in enumerate(record.grid):
            w.writerow([int(t)] + [_fmt(v) for v in record.estimates_mean[i]]
                       + [_fmt(v) for v in record.estimates_stderr[i]])


def bound_table(inputs: BoundInputs, periods=(1, 10, 100, 1000, 10000)) -> dict:
    return {
        "min_gap": inputs.min_gap if inputs.suboptimal else None,
        "cp_constant": cp_constant(inputs),
        "periods": list(periods),
        "hoeffding": {
            str(n): {
                "gap": inputs.gaps[n],
                "raw": [hoeffding_bound(p, inputs, n, clamp=False) for p in periods],
                "clamped": [hoeffding_bound(p, inputs, n) for p in periods],
            }
            for n in inputs.suboptimal
        },
    }


def periods_report(traces, record: MetricsRecord, min_samples: int = 100) -> dict:
    """JSON-ready period statistics plus the bound comparison."""
    config = traces[0].config
    inputs = BoundInputs.from_config(config)
    rates = suboptimal_period_rate(traces)
    enough = rates.samples >= min_samples
    p = np.arange(1, len(rates.samples) + 1)
    bound = suboptimal_bound(p, inputs) if len(p) else np.zeros(0)
    excess = rates.rate - (bound + 3 * rates.stderr)
    return {
        "schema_version": SCHEMA_VERSION,
        "policy": record.policy,
        "replications": record.replications,
        "period_stats": record.period_stats,
        "bounds": bound_table(inputs),
        "suboptimal_rate": {
            "periods_with_min_samples": int(enough.sum()),
            "min_samples": min_samples,
            "partial_sum": rates.partial_sum,
            "partial_sum_min_samples": float(rates.rate[enough].sum()),
            "max_excess_over_bound": float(excess[enough].max()) if enough.any() else None,
            "first_rates": rates.rate[:20].tolist(),
        },
    }
