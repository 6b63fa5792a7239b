"""Source-side update statistics and the cached-copy freshness model.

A source keeps an ordered log of its write times. From the inter-update
intervals it derives the mean time between updates (MTBU), the population
standard deviation of those intervals, and the time of the last update.
Assuming normally distributed inter-update times, the probability that a
cached copy has been modified after an elapsed time t since the last source
write is the normal CDF evaluated at t; its complement is the probability
the copy is still current (P_NM), which is compared against a per-user,
per-object QoS setting in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class InsufficientHistory(Exception):
    """Fewer than two inter-update intervals: no basis for a probability."""


class NonMonotonicUpdate(ValueError):
    """An update was recorded at or before the previously recorded one."""


@dataclass(frozen=True)
class FreshnessStats:
    """Update statistics a source hands out alongside every payload.

    mtbu and stdv_mtbu are in simulation time units; stdv_mtbu is the
    population standard deviation (divide by n) of the recorded intervals.
    """

    mtbu: float
    stdv_mtbu: float
    t_last_update: float
    n_intervals: int


@dataclass
class UpdateLog:
    """Strictly increasing write times for one object at its source."""

    update_times: list[float] = field(default_factory=list)

    def record_update(self, t: float) -> "UpdateLog":
        if self.update_times and t <= self.update_times[-1]:
            raise NonMonotonicUpdate(
                f"update at t={t} not after previous t={self.update_times[-1]}"
            )
        self.update_times.append(float(t))
        return self

    @property
    def n_intervals(self) -> int:
        return max(0, len(self.update_times) - 1)

    def stats(self) -> FreshnessStats:
        """Derive MTBU / STDV / time-of-last-update from the log."""
        if not self.update_times:
            raise InsufficientHistory("empty update log")
        times = self.update_times
        if len(times) == 1:
            return FreshnessStats(0.0, 0.0, times[-1], 0)
        intervals = [b - a for a, b in zip(times, times[1:])]
        n = len(intervals)
        mtbu = sum(intervals) / n
        var = sum((x - mtbu) ** 2 for x in intervals) / n
        return FreshnessStats(mtbu, math.sqrt(var), times[-1], n)


def record_update(log: UpdateLog, t: float) -> UpdateLog:
    """Append a source write time to the log (monotonicity enforced)."""
    return log.record_update(t)


def p_modified(stats: FreshnessStats, now: float) -> float:
    """Probability the object changed since its last recorded source write.

    Computed as the standard normal CDF of (t - MTBU) / STDV with
    t = now - t_last_update. With zero spread the normal family degenerates
    to a step at the mean: 0 before MTBU has elapsed, 1 at or after.
    """
    if stats.n_intervals < 2:
        raise InsufficientHistory(
            f"{stats.n_intervals} interval(s) recorded; need at least 2"
        )
    t = now - stats.t_last_update
    if t < 0:
        raise ValueError(f"now={now} precedes last update at {stats.t_last_update}")
    if stats.stdv_mtbu == 0.0:
        return 0.0 if t < stats.mtbu else 1.0
    z = (t - stats.mtbu) / stats.stdv_mtbu
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def p_not_modified(stats: FreshnessStats, now: float) -> float:
    """Complement of p_modified; P_NM + P_M is exactly 1."""
    return 1.0 - p_modified(stats, now)


def p_not_modified_or_zero(stats: FreshnessStats, now: float) -> float:
    """P_NM, with insufficient history treated as certainly-modified (0.0).

    Cached copies without a usable probability estimate are then acceptable
    only under a QoS setting of 0, which is the intended degenerate rule.
    """
    try:
        return p_not_modified(stats, now)
    except InsufficientHistory:
        return 0.0


def accepts(qos: float, p_nm: float) -> bool:
    """True when a copy's not-modified probability meets the QoS setting."""
    return p_nm >= qos


@dataclass
class SourceObject:
    """A data object at its source: current payload plus update history.

    The payload encodes the write time that produced it, so consumers can
    account staleness without a side channel. ``reachable`` models a source
    that cannot currently be queried directly.
    """

    object_id: str
    log: UpdateLog = field(default_factory=UpdateLog)
    reachable: bool = True

    def write(self, t: float) -> None:
        self.log.record_update(t)

    @property
    def t_last_update(self) -> float:
        if not self.log.update_times:
            raise InsufficientHistory(f"{self.object_id}: no writes recorded")
        return self.log.update_times[-1]

    def payload(self) -> bytes:
        return f"{self.object_id}@{self.t_last_update!r}".encode()

    def read(self, now: float) -> tuple[bytes, FreshnessStats]:
        """A fresh source read: current payload and the stats snapshot."""
        del now  # reads always reflect the latest write
        return self.payload(), self.log.stats()
