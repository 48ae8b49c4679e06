"""Dumbbell fabric: access links, the bottleneck link, and the bottleneck
router's finite drop-tail queue with a pre-enqueue defense hook.

All sources use a fixed 1000-byte packet so per-flow usage counters are
comparable. The defense hook is consulted before the tail-drop check, and
packets it drops still count as arrivals in the flow statistics; packets of
a blocked key are discarded without touching the statistics.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import partial
from typing import Callable, Optional

from .engine import EventKind, EventLoop, US_PER_S

PACKET_BYTES = 1000
PACKET_BITS = PACKET_BYTES * 8


@dataclass(frozen=True)
class Packet:
    """One wire packet. (flow_id, seq) is unique per run; data_id names the
    transport-level unit and is shared by retransmissions of the same unit."""

    flow_id: str
    src_addr: str
    seq: int
    data_id: int
    emitted_at: int
    size_bytes: int = PACKET_BYTES


def serialization_us(size_bytes: int, bandwidth_bps: int) -> int:
    """Ceil of the transmit time for size_bytes at bandwidth_bps."""
    bits = size_bytes * 8
    return (bits * US_PER_S + bandwidth_bps - 1) // bandwidth_bps


class Link:
    """Point-to-point FIFO link: serialization at fixed bandwidth plus a
    fixed propagation delay. busy_until enforces packet ordering."""

    def __init__(self, bandwidth_bps: int, prop_delay_us: int):
        self.bandwidth_bps = bandwidth_bps
        self.prop_delay_us = prop_delay_us
        self.busy_until = 0

    def transit(self, size_bytes: int, now: int) -> int:
        """Accept one packet at `now`; returns its arrival time at the far end."""
        start = now if now > self.busy_until else self.busy_until
        self.busy_until = start + serialization_us(size_bytes, self.bandwidth_bps)
        return self.busy_until + self.prop_delay_us


class AdmitOutcome(Enum):
    ENQUEUED = "enq"
    DROPPED_TAIL = "tail"
    DROPPED_BY_DEFENSE = "defense"


class BottleneckRouter:
    """Finite drop-tail FIFO queue feeding the bottleneck link.

    Admission order per arriving packet: (1) blocked-key check and the
    defense's early-drop decision, (2) tail drop when the queue is full,
    (3) enqueue. The queue occupancy counts waiting packets only; the head
    packet leaves the count when its serialization begins.
    """

    def __init__(self, loop: EventLoop, capacity: int, bandwidth_bps: int,
                 deliver_delay_us: int, sink: Callable[[Packet, int], Optional[str]],
                 controller=None, totals=None):
        self.loop = loop
        self.capacity = capacity
        self.bandwidth_bps = bandwidth_bps
        self.deliver_delay_us = deliver_delay_us
        self.sink = sink
        self.controller = controller
        self.totals = totals
        self.queue: deque[Packet] = deque()
        self.busy = False

    @property
    def occupancy(self) -> int:
        return len(self.queue)

    def key_for(self, pkt: Packet) -> str:
        if self.controller is not None:
            return self.controller.key_for(pkt)
        return pkt.flow_id

    def receive_after(self, pkt: Packet, arrival_us: int) -> None:
        """Schedule the packet's arrival at this router."""
        self.loop.schedule(arrival_us, EventKind.PACKET_ARRIVAL,
                           partial(self._arrival, pkt), key=self.key_for(pkt))

    def _arrival(self, pkt: Packet, now: int) -> None:
        self.admit(pkt, now)

    def _note_router(self, reason: str, key: str, pkt: Packet) -> None:
        if self.loop.trace:
            self.loop.note(f"router outcome={reason} key={key} "
                           f"flow={pkt.flow_id} pkt={pkt.seq}")

    def admit(self, pkt: Packet, now: int) -> AdmitOutcome:
        ctl = self.controller
        key = ctl.key_for(pkt) if ctl is not None else pkt.flow_id
        if ctl is not None:
            verdict = ctl.admission(key, len(self.queue), now)
            if verdict == "blocked":
                # Blocked keys never reach the queue and are kept out of the
                # period statistics so they cannot dominate usage forever.
                if self.totals is not None:
                    self.totals.drop_defense(pkt.flow_id)
                self._note_router("blocked", key, pkt)
                return AdmitOutcome.DROPPED_BY_DEFENSE
            if verdict == "drop":
                ctl.record_arrival(key, dropped=True, now=now)
                if self.totals is not None:
                    self.totals.drop_defense(pkt.flow_id)
                self._note_router("early", key, pkt)
                return AdmitOutcome.DROPPED_BY_DEFENSE
        if len(self.queue) >= self.capacity:
            if ctl is not None:
                ctl.record_arrival(key, dropped=True, now=now)
            if self.totals is not None:
                self.totals.drop_tail(pkt.flow_id)
            self._note_router("tail", key, pkt)
            return AdmitOutcome.DROPPED_TAIL
        self.queue.append(pkt)
        if ctl is not None:
            ctl.record_arrival(key, dropped=False, now=now)
        if not self.busy:
            self._start_service(now)
        self._note_router("enq", key, pkt)
        return AdmitOutcome.ENQUEUED

    def dequeue(self, now: int) -> Optional[Packet]:
        """Pop the head-of-line packet for serialization; None when empty."""
        if not self.queue:
            return None
        return self.queue.popleft()

    def _start_service(self, now: int) -> None:
        pkt = self.dequeue(now)
        if pkt is None:
            self.busy = False
            return
        self.busy = True
        done = now + serialization_us(pkt.size_bytes, self.bandwidth_bps)
        self.loop.schedule(done, EventKind.PACKET_DEPARTURE,
                           lambda t, p=pkt: self._on_departure(p, t),
                           key=pkt.flow_id)

    def _on_departure(self, pkt: Packet, now: int) -> Optional[str]:
        self.loop.schedule(now + self.deliver_delay_us, EventKind.PACKET_ARRIVAL,
                           lambda t, p=pkt: self.sink(p, t),
                           key=pkt.flow_id)
        if self.queue:
            self._start_service(now)
        else:
            self.busy = False
        if self.loop.trace:
            return f"depart flow={pkt.flow_id} pkt={pkt.seq}"
        return None
