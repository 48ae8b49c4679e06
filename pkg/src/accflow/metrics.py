"""Run measurement: delivered-rate time series, per-flow packet totals,
convergence extraction, and an independent event-log recount.

The recount functions re-derive the per-period flow statistics and the
throughput bins by scanning the text trace. They share no code with the
online accumulators, so the two can cross-check each other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .defense import PeriodRecord
from .engine import US_PER_S


class TotalsBook:
    """Per-flow packet accounting: emitted, delivered, and where drops
    happened. Emitted always equals delivered + drops + in flight."""

    FIELDS = ("emitted", "delivered", "dropped_tail", "dropped_defense")

    def __init__(self):
        self._book: dict[str, list[int]] = {}

    def _row(self, flow_id: str) -> list[int]:
        row = self._book.get(flow_id)
        if row is None:
            row = self._book[flow_id] = [0, 0, 0, 0]
        return row

    def emit(self, flow_id: str) -> None:
        self._row(flow_id)[0] += 1

    def deliver(self, flow_id: str) -> None:
        self._row(flow_id)[1] += 1

    def drop_tail(self, flow_id: str) -> None:
        self._row(flow_id)[2] += 1

    def drop_defense(self, flow_id: str) -> None:
        self._row(flow_id)[3] += 1

    def as_dict(self) -> dict[str, dict[str, int]]:
        return {flow: dict(zip(self.FIELDS, row)) for flow, row in self._book.items()}

    def in_flight(self, flow_id: str) -> int:
        row = self._row(flow_id)
        return row[0] - row[1] - row[2] - row[3]


@dataclass
class ThroughputSeries:
    """Delivered bits per fixed-width bin at the receiver, for one label."""

    label: str
    bin_us: int
    bits: np.ndarray

    @property
    def mbps(self) -> np.ndarray:
        # bits per microsecond is numerically megabits per second
        return self.bits / self.bin_us


class ThroughputRecorder:
    """Online per-bin delivery counter, filled as packets reach receivers."""

    def __init__(self, labels: Iterable[str], duration_us: int, bin_us: int = 500_000):
        self.bin_us = bin_us
        self.n_bins = (duration_us + bin_us - 1) // bin_us
        self._bits: dict[str, np.ndarray] = {
            label: np.zeros(self.n_bins, dtype=np.int64) for label in labels}

    def on_deliver(self, label: str, bits: int, now: int) -> None:
        bins = self._bits.get(label)
        if bins is None:
            bins = self._bits[label] = np.zeros(self.n_bins, dtype=np.int64)
        index = now // self.bin_us
        if index < self.n_bins:
            bins[index] += bits

    def series(self, label: str) -> ThroughputSeries:
        return ThroughputSeries(label=label, bin_us=self.bin_us,
                                bits=self._bits[label])

    def labels(self) -> list[str]:
        return list(self._bits)


def mean_goodput_bps(series: ThroughputSeries, t0_us: int, t1_us: int) -> float:
    """Delivered bits in [t0, t1) divided by the window length, with
    partial bins counted pro rata."""
    if t1_us <= t0_us:
        raise ValueError("empty goodput window")
    bin_us = series.bin_us
    total = 0.0
    first = t0_us // bin_us
    last = min((t1_us - 1) // bin_us, len(series.bits) - 1)
    for index in range(first, last + 1):
        lo = index * bin_us
        hi = lo + bin_us
        overlap = min(hi, t1_us) - max(lo, t0_us)
        if overlap >= bin_us:
            total += float(series.bits[index])
        else:
            total += float(series.bits[index]) * overlap / bin_us
    return total * US_PER_S / (t1_us - t0_us)


@dataclass
class RunReport:
    """Structured result of one run; serializes deterministically."""

    scenario: dict
    flow_totals: dict[str, dict[str, int]]
    throughput_bin_us: int
    throughput_bits: dict[str, list[int]]
    periods: list[PeriodRecord]
    legit_keys: dict[str, str]  # legit flow label -> accountability key
    convergence_time_us: Optional[int]
    attack_offered_mbps: Optional[float]
    gate_violations: int = 0
    floor_violations: int = 0
    events: Optional[list[str]] = None  # populated only when tracing; not serialized

    def series(self, label: str) -> ThroughputSeries:
        return ThroughputSeries(label=label, bin_us=self.throughput_bin_us,
                                bits=np.asarray(self.throughput_bits[label], dtype=np.int64))

    def to_jsonable(self) -> dict:
        return {
            "scenario": self.scenario,
            "flow_totals": self.flow_totals,
            "throughput": {
                "bin_s": self.throughput_bin_us / US_PER_S,
                "bits": self.throughput_bits,
            },
            "periods": [
                {
                    "index": p.index,
                    "aggregate_loss": p.aggregate_loss,
                    "arrivals": p.arrivals,
                    "drops": p.drops,
                    "defense_drops": p.defense_drops,
                    "newly_blocked": list(p.newly_blocked),
                    "blocked": list(p.blocked_after),
                    "flows": {k: [s.usage, s.drops] for k, s in p.stats.items()},
                }
                for p in self.periods
            ],
            "legit_keys": self.legit_keys,
            "convergence_time_s": (None if self.convergence_time_us is None
                                   else self.convergence_time_us / US_PER_S),
            "attack_offered_mbps": self.attack_offered_mbps,
            "defense_audit": {
                "gate_violations": self.gate_violations,
                "floor_violations": self.floor_violations,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable(), sort_keys=True, indent=1)


def convergence_time_us(periods: list[PeriodRecord], legit_keys: Iterable[str],
                        attack_start_us: int, period_us: int,
                        hold: int = 3) -> Optional[int]:
    """Start time of the earliest detection period at or after attack_start
    from which every legitimate key shows zero loss for `hold` consecutive
    measured periods; a key with no arrivals counts as zero loss."""
    keys = list(legit_keys)
    first_index = -(-attack_start_us // period_us)  # ceil division
    by_index = {p.index: p for p in periods}
    if not by_index:
        return None
    last_index = max(by_index)
    for start in range(first_index, last_index - hold + 2):
        ok = True
        for index in range(start, start + hold):
            record = by_index.get(index)
            if record is None:
                ok = False
                break
            for key in keys:
                stats = record.stats.get(key)
                if stats is not None and stats.drops > 0:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return start * period_us
    return None


def convergence_time(report: RunReport, attack_start_us: int,
                     hold: int = 3, period_us: int = 500_000) -> Optional[int]:
    """Convenience wrapper over a finished report."""
    return convergence_time_us(report.periods, report.legit_keys.values(),
                               attack_start_us, period_us, hold=hold)


# -- independent trace recount ---------------------------------------------


def _detail_fields(detail: str) -> dict[str, str]:
    out = {}
    for token in detail.split(" "):
        if "=" in token:
            name, value = token.split("=", 1)
            out[name] = value
    return out


def recount_flow_stats(trace_lines: Iterable[str], period_us: int
                       ) -> dict[int, dict[str, tuple[int, int]]]:
    """Per measured period, per key: (arrivals, drops) re-derived from the
    trace. Blocked-key discards are excluded, matching the online counters."""
    periods: dict[int, dict[str, tuple[int, int]]] = {}
    for line in trace_lines:
        time_s, _seq, _kind, _key, detail = line.split("\t")
        for fragment in detail.split("; "):
            if not fragment.startswith("router "):
                continue
            fields = _detail_fields(fragment)
            outcome = fields["outcome"]
            if outcome == "blocked":
                continue
            index = int(time_s) // period_us
            bucket = periods.setdefault(index, {})
            usage, drops = bucket.get(fields["key"], (0, 0))
            usage += 1
            if outcome in ("tail", "early"):
                drops += 1
            bucket[fields["key"]] = (usage, drops)
    return periods


def recount_throughput(trace_lines: Iterable[str], bin_us: int,
                       duration_us: int) -> dict[str, np.ndarray]:
    """Delivered bits per bin per label, re-derived from the trace."""
    n_bins = (duration_us + bin_us - 1) // bin_us
    bits: dict[str, np.ndarray] = {}
    for line in trace_lines:
        time_s, _seq, _kind, _key, detail = line.split("\t")
        for fragment in detail.split("; "):
            if not fragment.startswith("deliver "):
                continue
            fields = _detail_fields(fragment)
            label = fields["label"]
            bins = bits.get(label)
            if bins is None:
                bins = bits[label] = np.zeros(n_bins, dtype=np.int64)
            index = int(time_s) // bin_us
            if index < n_bins:
                bins[index] += int(fields["bytes"]) * 8
    return bits
