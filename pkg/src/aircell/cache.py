"""Per-client bounded cache with freshness-aware replacement policies.

Policies:
  LRU          evict the least recently used entry
  TTL_DROP     drop entries older than their time-to-live
  TTL_REQUERY  flag expired entries for a refresh instead of dropping
  CQF          keep the entries with the highest MTBU / MTBR ratio
  ACQF         keep the entries with the highest F_R * (P_NM - QoS)

Score-based policies admit a new entry into a full cache only when its
score strictly exceeds the current minimum; the minimum-score entry is
evicted, oldest first on ties. Read statistics (MTBR and the read-share
F_R) come from a sliding window over the client's own reads.
"""

from __future__ import annotations

from collections import OrderedDict, deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .freshness import FreshnessStats, p_not_modified_or_zero


class PolicyKind(str, Enum):
    LRU = "lru"
    TTL_DROP = "ttl_drop"
    TTL_REQUERY = "ttl_requery"
    CQF = "cqf"
    ACQF = "acqf"


@dataclass(frozen=True)
class ReadStats:
    """Windowed read statistics for one object on one client."""

    mtbr: float | None  # mean time between reads; None with < 2 reads
    f_r: float  # this object's share of the window's reads
    n_reads: int


@dataclass
class CacheEntry:
    object_id: str
    payload: bytes
    source_stats_snapshot: FreshnessStats
    cached_at: float
    ttl: float | None = None
    requery_pending: bool = False

    def __post_init__(self) -> None:
        # clocks are global in-sim, so a copy can never predate its write
        assert self.cached_at >= self.source_stats_snapshot.t_last_update


class ReadTracker:
    """Sliding window over a client's reads, shared by all its entries."""

    def __init__(self, window: int = 256):
        if window < 2:
            raise ValueError("window must hold at least 2 reads")
        self._reads: deque[tuple[float, str]] = deque(maxlen=window)

    def record(self, t: float, object_id: str) -> None:
        self._reads.append((t, object_id))

    def stats_for(self, object_id: str) -> ReadStats:
        times = [t for t, o in self._reads if o == object_id]
        total = len(self._reads)
        f_r = len(times) / total if total else 0.0
        if len(times) < 2:
            return ReadStats(None, f_r, len(times))
        gaps = [b - a for a, b in zip(times, times[1:])]
        return ReadStats(sum(gaps) / len(gaps), f_r, len(times))


def cqf(stats: FreshnessStats, reads: ReadStats) -> float:
    """Caching quality: update interval over read interval (0 if unread)."""
    if reads.mtbr is None or reads.mtbr <= 0:
        return 0.0
    return stats.mtbu / reads.mtbr


def acqf(f_r: float, p_nm: float, qos: float) -> float:
    """User-centric caching quality: read share times the QoS margin.

    Negative exactly when a read object fails its owner's QoS test.
    """
    return f_r * (p_nm - qos)


@dataclass(frozen=True)
class EvictionReport:
    admitted: bool
    evicted: str | None = None
    incoming_score: float | None = None
    min_score: float | None = None


@dataclass(frozen=True)
class TickAction:
    action: str  # "drop" | "requery"
    object_id: str


class ClientCache:
    """Count-bounded cache owned by a single client.

    ``qos_for`` supplies the owner's QoS setting per object (ACQF scoring);
    ``default_ttl`` applies to entries without their own ttl under the TTL
    policies. Only the owner's reads (get) update recency and read stats;
    remote serves should use ``peek``.
    """

    def __init__(
        self,
        capacity: int,
        policy: PolicyKind,
        qos_for: Callable[[str], float] | None = None,
        default_ttl: float | None = None,
        read_window: int = 256,
    ):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.policy = policy
        self.qos_for = qos_for or (lambda _obj: 0.0)
        self.default_ttl = default_ttl
        self.entries: OrderedDict[str, CacheEntry] = OrderedDict()
        self.reads = ReadTracker(read_window)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, object_id: str) -> bool:
        return object_id in self.entries

    def record_read(self, object_id: str, now: float) -> None:
        """Count a local request for an object toward its read statistics."""
        self.reads.record(now, object_id)

    def get(self, object_id: str, now: float) -> CacheEntry | None:
        """Owner read: returns the entry and refreshes its recency."""
        entry = self.entries.get(object_id)
        if entry is not None:
            self.entries.move_to_end(object_id)
        return entry

    def peek(self, object_id: str) -> CacheEntry | None:
        """Recency-neutral lookup used when serving other clients."""
        return self.entries.get(object_id)

    def score(self, entry: CacheEntry, now: float) -> float:
        if self.policy is PolicyKind.CQF:
            return cqf(entry.source_stats_snapshot, self.reads.stats_for(entry.object_id))
        if self.policy is PolicyKind.ACQF:
            p_nm = p_not_modified_or_zero(entry.source_stats_snapshot, now)
            return acqf(
                self.reads.stats_for(entry.object_id).f_r,
                p_nm,
                self.qos_for(entry.object_id),
            )
        raise ValueError(f"policy {self.policy} has no score")

    def insert(self, entry: CacheEntry, now: float) -> EvictionReport:
        """Admit an entry, evicting per policy when the cache is full."""
        if entry.object_id in self.entries:
            self.entries[entry.object_id] = entry
            self.entries.move_to_end(entry.object_id)
            return EvictionReport(admitted=True)
        if len(self.entries) < self.capacity:
            self.entries[entry.object_id] = entry
            return EvictionReport(admitted=True)

        if self.policy in (PolicyKind.CQF, PolicyKind.ACQF):
            incoming = self.score(entry, now)
            scored = [(self.score(e, now), e.cached_at, oid)
                      for oid, e in self.entries.items()]
            min_score, _, _ = min(scored)
            if incoming <= min_score:
                return EvictionReport(False, None, incoming, min_score)
            victims = [(at, oid) for sc, at, oid in scored if sc == min_score]
            _, victim = min(victims)  # oldest cached_at first
            del self.entries[victim]
            self.entries[entry.object_id] = entry
            return EvictionReport(True, victim, incoming, min_score)

        victim, _ = self.entries.popitem(last=False)  # least recently used
        self.entries[entry.object_id] = entry
        return EvictionReport(True, victim)

    def tick(self, now: float) -> list[TickAction]:
        """Expire entries under the TTL policies (strict age > ttl)."""
        if self.policy not in (PolicyKind.TTL_DROP, PolicyKind.TTL_REQUERY):
            return []
        actions: list[TickAction] = []
        for object_id in list(self.entries):
            entry = self.entries[object_id]
            ttl = entry.ttl if entry.ttl is not None else self.default_ttl
            if ttl is None or now - entry.cached_at <= ttl:
                continue
            if self.policy is PolicyKind.TTL_DROP:
                del self.entries[object_id]
                actions.append(TickAction("drop", object_id))
            elif not entry.requery_pending:
                entry.requery_pending = True
                actions.append(TickAction("requery", object_id))
        return actions
