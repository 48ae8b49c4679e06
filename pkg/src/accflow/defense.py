"""AccFlow controller: per-period flow statistics, Uniform Loss Rate
detection, the Early Drop policy, and source-address flow aggregation.

The controller accumulates per-key arrival and drop counts in fixed
detection periods (default 0.5 s). At each period boundary it freezes a
snapshot; every decision during the following period uses that snapshot,
so the first period runs on all-zero statistics.

Two modules act on the snapshot:

* Aggressive Detection permanently blocks a key whose ULR (loss rate times
  usage share) is both above an absolute floor and far above the median
  ULR of all other keys.
* Early Drop, gated on the aggregate loss rate, drops packets of
  accountable keys (previous usage above a small floor) with probability
  equal to their previous-period loss rate; low-loss keys are only dropped
  while the queue is already filling.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional

from .engine import EventKind, EventLoop, RngStream

# Floor for the median ULR term so an all-zero background never divides out.
MEDIAN_ULR_FLOOR = 1e-6


class FlowKeyMode(Enum):
    CONNECTION = "connection"
    SOURCE = "source"


def aggregate_key(pkt, mode: FlowKeyMode) -> str:
    """Accountability key of a packet: its connection id, or its source
    address when flows sharing a source are folded together."""
    if mode is FlowKeyMode.SOURCE:
        return pkt.src_addr
    return pkt.flow_id


@dataclass(frozen=True)
class FlowStats:
    """One key's counters for one detection period."""

    key: str
    usage: int        # packets arrived at the bottleneck
    drops: int        # of those, dropped (tail or defense)
    loss_rate: float  # drops / usage, 0 when idle
    usage_rate: float  # usage / total arrivals, 0 when the period was idle

    @property
    def ulr(self) -> float:
        return uniform_loss_rate(self)


def uniform_loss_rate(stats: FlowStats) -> float:
    """Product of a flow's loss rate and its usage share; summed over keys
    this equals the aggregate loss rate."""
    return stats.loss_rate * stats.usage_rate


def zero_stats(key: str) -> FlowStats:
    return FlowStats(key=key, usage=0, drops=0, loss_rate=0.0, usage_rate=0.0)


@dataclass(frozen=True)
class PeriodSnapshot:
    """Frozen statistics governing one detection period.

    `index` is the period being governed; the counters were measured during
    period index-1. Keys with no arrivals in that period are absent and
    read as all-zero.
    """

    index: int
    aggregate_loss: float
    stats: Mapping[str, FlowStats]
    blocked: frozenset[str]

    def flow(self, key: str) -> FlowStats:
        got = self.stats.get(key)
        return got if got is not None else zero_stats(key)


@dataclass(frozen=True)
class DefenseConfig:
    detection_period_us: int = 500_000
    aggregate_loss_threshold: float = 0.30   # gate below which Early Drop is idle
    min_accountable_usage: int = 5           # packets; at or below, never dropped
    queue_threshold_fraction: float = 0.10   # of the router buffer
    aggressive_ulr_threshold: float = 0.05
    aggressive_median_gap: float = 10.0
    aggregation: FlowKeyMode = FlowKeyMode.CONNECTION
    dropping_enabled: bool = True
    aggressive_enabled: bool = True
    block_duration_us: Optional[int] = None  # None blocks for the rest of the run

    def __post_init__(self):
        if not 0.0 < self.aggregate_loss_threshold < 1.0:
            raise ValueError("aggregate_loss_threshold must be in (0, 1)")
        if self.min_accountable_usage < 1:
            raise ValueError("min_accountable_usage must be >= 1")
        if not 0.0 < self.queue_threshold_fraction < 1.0:
            raise ValueError("queue_threshold_fraction must be in (0, 1)")


def early_drop_decision(key: str, snapshot: PeriodSnapshot, queue_occupancy: int,
                        buffer_capacity: int, rng: RngStream,
                        config: DefenseConfig) -> bool:
    """Per-packet Early Drop verdict; True means drop.

    Keeps everything while the previous period's aggregate loss is at or
    below the gate, and keeps unaccountable keys (previous usage at or
    below the floor). High-loss keys (loss above half the aggregate) are
    dropped with probability equal to their loss rate; low-loss keys the
    same, but only while the queue is over its occupancy threshold. At most
    one draw is taken, and only when the drop probability is positive.
    """
    agg = snapshot.aggregate_loss
    if agg <= config.aggregate_loss_threshold:
        return False
    stats = snapshot.flow(key)
    if stats.usage <= config.min_accountable_usage:
        return False
    if stats.loss_rate <= 0.0:
        return False
    if stats.loss_rate > 0.5 * agg:
        return rng.random() < stats.loss_rate
    if queue_occupancy > config.queue_threshold_fraction * buffer_capacity:
        return rng.random() < stats.loss_rate
    return False


def aggressive_detect(snapshot: PeriodSnapshot, config: DefenseConfig) -> set[str]:
    """Keys whose ULR is an outlier: at least the absolute threshold and at
    least `aggressive_median_gap` times the median ULR of all other keys
    (median floored so a uniformly silent background cannot zero it out)."""
    ulrs = [(key, stats.ulr) for key, stats in snapshot.stats.items()]
    flagged: set[str] = set()
    for key, ulr in ulrs:
        if ulr < config.aggressive_ulr_threshold:
            continue
        others = [u for k, u in ulrs if k != key]
        median = statistics.median(others) if others else 0.0
        if ulr >= config.aggressive_median_gap * max(median, MEDIAN_ULR_FLOOR):
            flagged.add(key)
    return flagged


@dataclass
class PeriodRecord:
    """History row for one measured detection period."""

    index: int
    aggregate_loss: float
    arrivals: int
    drops: int
    stats: dict[str, FlowStats]
    blocked_after: tuple[str, ...]
    newly_blocked: tuple[str, ...]
    defense_drops: int  # early drops decided during this period


class AccFlowController:
    """Passive per-run defense state machine, invoked synchronously from the
    event loop. With dropping disabled it still keeps full statistics, so
    undefended runs report the same per-period data."""

    def __init__(self, loop: EventLoop, config: DefenseConfig, buffer_capacity: int):
        self.loop = loop
        self.config = config
        self.buffer_capacity = buffer_capacity
        self.rng = loop.rng("early-drop")
        self.snapshot = PeriodSnapshot(index=0, aggregate_loss=0.0, stats={},
                                       blocked=frozenset())
        self.blocked: dict[str, int] = {}  # key -> time it was blocked
        self.history: list[PeriodRecord] = []
        self._usage: dict[str, int] = {}
        self._drops: dict[str, int] = {}
        self._early_drops = 0
        # Self-audit counters; both stay zero unless the decision logic is broken.
        self.gate_violations = 0
        self.floor_violations = 0

    def start(self) -> None:
        """Arm the first period boundary."""
        self._schedule_boundary(self.config.detection_period_us)

    def key_for(self, pkt) -> str:
        return aggregate_key(pkt, self.config.aggregation)

    # -- per-packet path -------------------------------------------------

    def admission(self, key: str, queue_occupancy: int, now: int) -> str:
        """Verdict for an arriving packet: 'blocked', 'drop', or 'keep'."""
        block_time = self.blocked.get(key)
        if block_time is not None:
            duration = self.config.block_duration_us
            if duration is None or now - block_time < duration:
                return "blocked"
            del self.blocked[key]
        if not self.config.dropping_enabled:
            return "keep"
        if early_drop_decision(key, self.snapshot, queue_occupancy,
                               self.buffer_capacity, self.rng, self.config):
            self._early_drops += 1
            stats = self.snapshot.flow(key)
            if self.snapshot.aggregate_loss <= self.config.aggregate_loss_threshold:
                self.gate_violations += 1
            if stats.usage <= self.config.min_accountable_usage:
                self.floor_violations += 1
            return "drop"
        return "keep"

    def record_arrival(self, key: str, dropped: bool, now: int) -> None:
        """Count one packet that reached the bottleneck router."""
        self._usage[key] = self._usage.get(key, 0) + 1
        if dropped:
            self._drops[key] = self._drops.get(key, 0) + 1

    # -- period boundary -------------------------------------------------

    def finalize_period(self, now: int) -> PeriodSnapshot:
        """Freeze the just-finished period's counters into the snapshot that
        governs the period starting at `now`, and reset the accumulators."""
        total = sum(self._usage.values())
        total_drops = sum(self._drops.values())
        stats: dict[str, FlowStats] = {}
        for key, usage in self._usage.items():
            drops = self._drops.get(key, 0)
            stats[key] = FlowStats(
                key=key,
                usage=usage,
                drops=drops,
                loss_rate=drops / usage if usage else 0.0,
                usage_rate=usage / total if total else 0.0,
            )
        aggregate = total_drops / total if total else 0.0
        index = now // self.config.detection_period_us
        self.snapshot = PeriodSnapshot(index=index, aggregate_loss=aggregate,
                                       stats=stats,
                                       blocked=frozenset(self.blocked))
        self._usage = {}
        self._drops = {}
        return self.snapshot

    def _on_boundary(self, now: int) -> Optional[str]:
        early_drops = self._early_drops
        self._early_drops = 0
        snap = self.finalize_period(now)
        newly: tuple[str, ...] = ()
        if self.config.dropping_enabled and self.config.aggressive_enabled:
            found = aggressive_detect(snap, self.config) - set(self.blocked)
            if found:
                newly = tuple(sorted(found))
                for key in newly:
                    self.blocked[key] = now
                    if self.loop.trace:
                        self.loop.note(f"block key={key}")
                self.snapshot = replace(snap, blocked=frozenset(self.blocked))
                snap = self.snapshot
        self.history.append(PeriodRecord(
            index=snap.index - 1,
            aggregate_loss=snap.aggregate_loss,
            arrivals=sum(s.usage for s in snap.stats.values()),
            drops=sum(s.drops for s in snap.stats.values()),
            stats=dict(snap.stats),
            blocked_after=tuple(sorted(self.blocked)),
            newly_blocked=newly,
            defense_drops=early_drops,
        ))
        self._schedule_boundary(now + self.config.detection_period_us)
        if self.loop.trace:
            return (f"period index={snap.index} aggregate_loss={snap.aggregate_loss:.6f} "
                    f"arrivals={self.history[-1].arrivals} drops={self.history[-1].drops}")
        return None

    def _schedule_boundary(self, at_us: int) -> None:
        self.loop.schedule(at_us, EventKind.PERIOD_BOUNDARY, self._on_boundary,
                           key="controller")
