"""Packet sources: compliant application-limited TCP senders, the on-off
square-wave attacker, the constant-rate attacker, the short-selfish-flow
spawner, and the benign periodic (chunked) flow.

Emission times are computed from integer slot formulas rather than by
accumulating a rounded gap, so paced rates are drift-free. A compliant
source releases application data as paced tokens into a small send buffer
and lets the TCP machine gate actual emission; attackers emit on their
schedule regardless of loss and never back off.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Optional

from .engine import EventKind, EventLoop, US_PER_S
from .fabric import BottleneckRouter, Link, Packet, PACKET_BITS, PACKET_BYTES
from .tcp import (TcpConfig, TcpPhase, TcpState, apply_ack,
                  apply_fast_retransmit, apply_timeout)


def emission_slot_us(index: int, rate_bps: int, scale: int = 1) -> int:
    """Time offset of the index-th packet at rate rate_bps/scale."""
    return (index * PACKET_BITS * US_PER_S * scale) // rate_bps


def next_slot_after(offset_us: int, rate_bps: int, scale: int = 1) -> int:
    """Earliest emission slot strictly after offset_us."""
    index = (offset_us * rate_bps) // (PACKET_BITS * US_PER_S * scale) + 1
    while emission_slot_us(index, rate_bps, scale) <= offset_us:
        index += 1
    return emission_slot_us(index, rate_bps, scale)


class AttackKind(Enum):
    SQUARE_WAVE = "square-wave"
    CONSTANT = "constant"


@dataclass(frozen=True)
class AttackProfile:
    """On-off or constant attack traffic, split over synchronized subflows.

    peak_rate_bps is the aggregate across subflows; each subflow paces at
    peak_rate_bps / n_subflows. With spoof_sources each subflow claims its
    own source address, otherwise all share one.
    """

    kind: AttackKind
    peak_rate_bps: int
    period_us: int = 200_000
    burst_us: int = 67_000
    n_subflows: int = 1
    spoof_sources: bool = True
    start_us: int = 0

    def __post_init__(self):
        if self.n_subflows < 1:
            raise ValueError("n_subflows must be >= 1")
        if self.kind is AttackKind.SQUARE_WAVE and self.burst_us > self.period_us:
            raise ValueError("burst duration cannot exceed the period")


@dataclass(frozen=True)
class SstfProfile:
    """Short-selfish-flow attack: every spawn interval, each attacker opens
    one fresh short TCP flow which itself behaves compliantly."""

    n_attackers: int = 10
    per_flow_rate_bps: int = 3_000_000
    spawn_interval_us: int = 200_000
    flow_payload_packets: int = 75
    spoof_sources: bool = False
    start_us: int = 0


@dataclass(frozen=True)
class PeriodicBenignProfile:
    """Chunked periodic flow (video-style): one chunk per period, released
    into the TCP send buffer at the peak rate."""

    peak_rate_bps: int = 3_000_000
    period_us: int = 200_000
    chunk_bytes: int = 25_000
    start_us: int = 0


def squarewave_next_emission(profile: AttackProfile, elapsed_us: int) -> tuple[int, bool]:
    """For one subflow: (next emission offset after elapsed_us, whether
    elapsed_us falls inside a burst). Offsets are relative to attack start;
    bursts occupy [k*period, k*period + burst)."""
    period, burst = profile.period_us, profile.burst_us
    phase = elapsed_us % period
    cycle_start = elapsed_us - phase
    active = phase < burst
    if active:
        slot = next_slot_after(phase, profile.peak_rate_bps, profile.n_subflows)
        if slot < burst:
            return cycle_start + slot, True
    return cycle_start + period, active


def constant_rate_emission(profile: AttackProfile, elapsed_us: int) -> Optional[int]:
    """Next emission offset after elapsed_us for one constant-rate subflow;
    None when the profile rate is zero."""
    if profile.peak_rate_bps <= 0:
        return None
    return next_slot_after(elapsed_us, profile.peak_rate_bps, profile.n_subflows)


# -- application token schedules -----------------------------------------


def steady_tokens(start_us: int, rate_bps: int, rng=None,
                  jitter_frac: float = 0.25) -> Iterator[int]:
    """Paced app data at rate_bps. Offsets are slot-indexed, so the long-run
    rate is exact; with an rng each token moves by a bounded random offset,
    which keeps one flow's emission phases from locking to any external
    period (such as an attack cycle)."""
    gap = emission_slot_us(1, rate_bps)
    span = int(gap * jitter_frac)
    index = 0
    while True:
        jitter = int(rng.random() * span) if rng is not None and span > 0 else 0
        yield start_us + emission_slot_us(index, rate_bps) + jitter
        index += 1


def finite_tokens(start_us: int, rate_bps: int, count: int) -> Iterator[int]:
    for index in range(count):
        yield start_us + emission_slot_us(index, rate_bps)


def periodic_chunk_tokens(profile: PeriodicBenignProfile, start_us: int) -> Iterator[int]:
    chunk_packets = max(profile.chunk_bytes // PACKET_BYTES, 1)
    cycle = 0
    while True:
        base = start_us + cycle * profile.period_us
        for index in range(chunk_packets):
            offset = emission_slot_us(index, profile.peak_rate_bps)
            if offset >= profile.period_us:
                break
            yield base + offset
        cycle += 1


# -- sources ---------------------------------------------------------------


class _WireSource:
    """Shared emission plumbing: builds uniquely numbered packets, counts
    them, and pushes them through the host's access link to the router."""

    def __init__(self, loop: EventLoop, router: BottleneckRouter, link: Link,
                 flow_id: str, src_addr: str, totals=None):
        self.loop = loop
        self.router = router
        self.link = link
        self.flow_id = flow_id
        self.src_addr = src_addr
        self.totals = totals
        self._pkt_seq = 0

    def emit_packet(self, data_id: int, now: int) -> Packet:
        pkt = Packet(flow_id=self.flow_id, src_addr=self.src_addr,
                     seq=self._pkt_seq, data_id=data_id, emitted_at=now)
        self._pkt_seq += 1
        if self.totals is not None:
            self.totals.emit(self.flow_id)
        if self.loop.trace:
            self.loop.note(f"emit flow={self.flow_id} pkt={pkt.seq} data={data_id}")
        self.router.receive_after(pkt, self.link.transit(pkt.size_bytes, now))
        return pkt


class TcpSender(_WireSource):
    """Application-limited compliant sender.

    Tokens arrive on the app's schedule into a capped send buffer; emission
    is gated by the congestion window and fully suspended in timeout-wait.
    After the post-timeout probe, the units that were outstanding at probe
    time are re-sent one per acknowledgement, ahead of fresh data.
    """

    def __init__(self, loop: EventLoop, router: BottleneckRouter, link: Link,
                 flow_id: str, src_addr: str, tcp_config: TcpConfig,
                 tokens: Iterator[int], buffer_cap: int = 16, totals=None,
                 pace_gap_us: int = 0, pace_rng=None):
        super().__init__(loop, router, link, flow_id, src_addr, totals)
        self.tcp_config = tcp_config
        self.state = TcpState.initial(tcp_config)
        self.app_buffer = 0
        self.buffer_cap = buffer_cap
        self._tokens = tokens
        self._lost: list[int] = []
        self._retx_handle = None
        self._probe_handle = None
        self._dupacks = 0
        self._fr_unit: Optional[int] = None
        # Fresh data never leaves faster than the app rate: buffered backlog
        # drains paced, not in line-rate trains.
        self._pace_gap_us = pace_gap_us
        self._pace_rng = pace_rng
        self._next_pace_us = 0
        self._pace_handle = None
        self.timeouts = 0
        self.fast_retransmits = 0

    def start(self) -> None:
        self._schedule_next_token()

    # -- app side ---------------------------------------------------------

    def _schedule_next_token(self) -> None:
        t = next(self._tokens, None)
        if t is None:
            return
        fire = t if t >= self.loop.now else self.loop.now
        self.loop.schedule(fire, EventKind.SOURCE_WAKEUP, self._on_token,
                           key=self.flow_id)

    def _on_token(self, now: int) -> Optional[str]:
        if self.app_buffer < self.buffer_cap:
            self.app_buffer += 1
        self._schedule_next_token()
        self.try_send(now)
        return None

    # -- emission ---------------------------------------------------------

    def try_send(self, now: int) -> None:
        """Emit fresh application data as far as the window and the
        emission pacing allow."""
        st = self.state
        if st.phase is TcpPhase.TIMEOUT_WAIT:
            return
        while self.app_buffer > 0 and len(st.inflight) < st.cwnd:
            if self._pace_gap_us > 0 and now < self._next_pace_us:
                self._schedule_pace(self._next_pace_us)
                return
            data_id = st.next_seq
            st.next_seq += 1
            st.inflight.add(data_id)
            self.app_buffer -= 1
            self._emit_unit(data_id, now)
            if self._pace_gap_us > 0:
                gap = self._pace_gap_us
                if self._pace_rng is not None:
                    # Mean-preserving spread so emission phases never lock
                    # to an external period.
                    gap += int((self._pace_rng.random() - 0.5) * 0.5 * gap)
                self._next_pace_us = now + gap

    def _schedule_pace(self, at_us: int) -> None:
        if self._pace_handle is None:
            self._pace_handle = self.loop.schedule(
                at_us, EventKind.SOURCE_WAKEUP, self._on_pace, key=self.flow_id)

    def _on_pace(self, now: int) -> Optional[str]:
        self._pace_handle = None
        self.try_send(now)
        return None

    def _resend_one_lost(self, now: int) -> bool:
        """Re-send at most one unit from the loss list; ack-clocked, so
        recovery retransmissions are gated by successful deliveries and a
        recovering flow never sprays into a still-congested path."""
        st = self.state
        while self._lost:
            data_id = self._lost.pop(0)
            if data_id not in st.inflight:
                continue
            self._emit_unit(data_id, now)
            return True
        return False

    def _emit_unit(self, data_id: int, now: int) -> None:
        self.emit_packet(data_id, now)
        if self._retx_handle is None:
            self._arm_retx(now)

    # -- timers -----------------------------------------------------------

    def _arm_retx(self, now: int) -> None:
        self._retx_handle = self.loop.schedule(
            now + self.state.rto_us, EventKind.TIMER_EXPIRY, self._on_retx_timer,
            key=self.flow_id)

    def _cancel_retx(self) -> None:
        if self._retx_handle is not None:
            self.loop.cancel(self._retx_handle)
            self._retx_handle = None

    def _on_retx_timer(self, now: int) -> Optional[str]:
        self._retx_handle = None
        if not self.state.inflight:
            return None  # everything was acknowledged in the meantime
        apply_timeout(self.state, self.tcp_config)
        self._dupacks = 0
        self._fr_unit = None
        self.timeouts += 1
        self._probe_handle = self.loop.schedule(
            now + self.state.rto_us, EventKind.TIMER_EXPIRY, self._on_probe_timer,
            key=self.flow_id)
        if self.loop.trace:
            return f"timeout flow={self.flow_id} rto_us={self.state.rto_us}"
        return None

    def _on_probe_timer(self, now: int) -> Optional[str]:
        self._probe_handle = None
        st = self.state
        st.phase = TcpPhase.SLOW_START
        if st.inflight:
            # By now every surviving ack has arrived (the worst-case round
            # trip is below min_rto), so the rest of inflight is truly lost.
            self._lost = sorted(st.inflight)
            probe = self._lost.pop(0)
            self._emit_unit(probe, now)
        else:
            self.try_send(now)
        if self.loop.trace:
            return f"probe flow={self.flow_id}"
        return None

    # -- ack side ----------------------------------------------------------

    def handle_ack(self, data_id: int, emitted_at: int, now: int) -> Optional[str]:
        st = self.state
        was_lowest = bool(st.inflight) and data_id == min(st.inflight)
        if not apply_ack(st, self.tcp_config, data_id, now - emitted_at):
            if self.loop.trace:
                return f"ack-dup flow={self.flow_id} data={data_id}"
            return None
        if st.phase is TcpPhase.TIMEOUT_WAIT:
            pass  # the probe timer is the only timer allowed while waiting
        else:
            if not st.inflight:
                self._cancel_retx()
                self._dupacks = 0
                self._fr_unit = None
            elif was_lowest:
                self._cancel_retx()
                self._arm_retx(now)
                self._dupacks = 0
                self._fr_unit = None
            else:
                self._maybe_fast_retransmit(now)
            self._resend_one_lost(now)
            self.try_send(now)
        if self.loop.trace:
            return f"ack flow={self.flow_id} data={data_id}"
        return None

    def _maybe_fast_retransmit(self, now: int) -> None:
        # Deliveries are in per-flow emission order here, so acks arriving
        # past an outstanding unit mean that unit was dropped.
        cfg = self.tcp_config
        if not cfg.fast_retransmit:
            return
        self._dupacks += 1
        hole = min(self.state.inflight)
        if self._dupacks < cfg.dupack_threshold or self._fr_unit == hole:
            return
        self._fr_unit = hole
        self._dupacks = 0
        apply_fast_retransmit(self.state, cfg)
        self.fast_retransmits += 1
        if hole in self._lost:
            self._lost.remove(hole)
        if self.loop.trace:
            self.loop.note(f"fast-retransmit flow={self.flow_id} data={hole}")
        self._emit_unit(hole, now)
        self._cancel_retx()
        self._arm_retx(now)


class SquareWaveSource(_WireSource):
    """One subflow of the on-off attack; emission is a pure function of the
    clock and never reacts to loss.

    Subflows are synchronized at the burst level. phase_offset_us shifts
    one subflow's packet slots so separate attacking hosts interleave
    instead of emitting in the same microsecond.
    """

    def __init__(self, loop, router, link, flow_id, src_addr,
                 profile: AttackProfile, totals=None, phase_offset_us: int = 0):
        super().__init__(loop, router, link, flow_id, src_addr, totals)
        self.profile = profile
        self.phase_offset_us = phase_offset_us

    @property
    def _origin(self) -> int:
        return self.profile.start_us + self.phase_offset_us

    def start(self) -> None:
        self.loop.schedule(self._origin, EventKind.SOURCE_WAKEUP,
                           self._on_wakeup, key=self.flow_id)

    def _on_wakeup(self, now: int) -> Optional[str]:
        elapsed = now - self._origin
        if elapsed % self.profile.period_us < self.profile.burst_us:
            self.emit_packet(self._pkt_seq, now)
        next_offset, _ = squarewave_next_emission(self.profile, elapsed)
        self.loop.schedule(self._origin + next_offset,
                           EventKind.SOURCE_WAKEUP, self._on_wakeup,
                           key=self.flow_id)
        return None


class ConstantRateSource(_WireSource):
    """One subflow of a general flooding attack: uniformly paced packets,
    no pauses, no backoff."""

    def __init__(self, loop, router, link, flow_id, src_addr,
                 profile: AttackProfile, totals=None, phase_offset_us: int = 0):
        super().__init__(loop, router, link, flow_id, src_addr, totals)
        self.profile = profile
        self.phase_offset_us = phase_offset_us

    def start(self) -> None:
        if self.profile.peak_rate_bps <= 0:
            return
        self.loop.schedule(self.profile.start_us + self.phase_offset_us,
                           EventKind.SOURCE_WAKEUP, self._on_wakeup,
                           key=self.flow_id)

    def _on_wakeup(self, now: int) -> Optional[str]:
        self.emit_packet(self._pkt_seq, now)
        origin = self.profile.start_us + self.phase_offset_us
        next_offset = constant_rate_emission(self.profile, now - origin)
        if next_offset is not None:
            self.loop.schedule(origin + next_offset,
                               EventKind.SOURCE_WAKEUP, self._on_wakeup,
                               key=self.flow_id)
        return None


class SstfSpawner:
    """Periodically opens fresh short TCP flows for each attacker host.

    The flows themselves are compliant TcpSenders; the attack lives in the
    spawning, which keys fresh accountability records unless flows are
    aggregated by source address.
    """

    def __init__(self, loop: EventLoop, profile: SstfProfile,
                 make_flow: Callable[[int, int, int], object]):
        self.loop = loop
        self.profile = profile
        self.make_flow = make_flow
        self.spawned = 0
        self._round = 0

    def start(self) -> None:
        if self.profile.n_attackers < 1:
            return
        self.loop.schedule(self.profile.start_us, EventKind.SOURCE_WAKEUP,
                           self._on_tick, key="sstf-spawner")

    def tick(self, now: int) -> list:
        """Spawn one fresh flow per attacker; returns the new flow objects."""
        flows = []
        for attacker in range(self.profile.n_attackers):
            flows.append(self.make_flow(attacker, self._round, now))
            self.spawned += 1
        self._round += 1
        return flows

    def _on_tick(self, now: int) -> Optional[str]:
        flows = self.tick(now)
        self.loop.schedule(now + self.profile.spawn_interval_us,
                           EventKind.SOURCE_WAKEUP, self._on_tick,
                           key="sstf-spawner")
        if self.loop.trace:
            return f"sstf-spawn count={len(flows)} round={self._round - 1}"
        return None
