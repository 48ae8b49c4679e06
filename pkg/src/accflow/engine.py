"""Deterministic discrete-event core: simulated clock, ordered event queue,
named pseudo-random streams, and an optional text trace of every dispatch.

Simulated time is an integer count of microseconds since run start. Events
with equal fire times dispatch in insertion order, so a whole run is a pure
function of its scenario and seed. One EventLoop owns all mutable state of
one run; separate runs share nothing.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

US_PER_MS = 1_000
US_PER_S = 1_000_000


def ms_us(x: float) -> int:
    """Milliseconds to integer microseconds."""
    return round(x * US_PER_MS)


def s_us(x: float) -> int:
    """Seconds to integer microseconds."""
    return round(x * US_PER_S)


class SchedulingError(Exception):
    """Contract violation against the scheduler (past event, foreign handle)."""


class EventKind(Enum):
    PACKET_ARRIVAL = "packet-arrival"
    PACKET_DEPARTURE = "packet-departure"
    TIMER_EXPIRY = "timer-expiry"
    PERIOD_BOUNDARY = "period-boundary"
    SOURCE_WAKEUP = "source-wakeup"


@dataclass(frozen=True)
class Event:
    fire_at: int
    seq: int
    kind: EventKind


class CancelResult(Enum):
    CANCELLED = "cancelled"
    ALREADY_FIRED = "already-fired"


class EventHandle:
    """Returned by schedule(); lets the owner cancel a pending event."""

    __slots__ = ("event", "cancelled", "fired", "owner")

    def __init__(self, event: Event, owner: "EventLoop"):
        self.event = event
        self.cancelled = False
        self.fired = False
        self.owner = owner


class RngStream:
    """Named PRNG stream: (seed, stream_id, draw index) fully determine a value.

    Each component gets its own stream so adding or removing one consumer
    never perturbs another's draws.
    """

    def __init__(self, seed: int, stream_id: str):
        self.seed = seed
        self.stream_id = stream_id
        digest = hashlib.sha256(f"{seed}/{stream_id}".encode()).digest()
        self._rng = random.Random(int.from_bytes(digest[:8], "big"))

    def random(self) -> float:
        return self._rng.random()

    def uniform(self, a: float, b: float) -> float:
        return self._rng.uniform(a, b)


Callback = Callable[[int], Optional[str]]


class EventLoop:
    """Single-threaded event loop for one run.

    Dispatch order is the total order (fire_at, seq). Cancellation is lazy:
    cancelled entries are skipped on pop and never dispatch. When `trace` is
    on, every dispatched event becomes one tab-separated line
    ``time_us  seq  kind  flow_key  detail``; handlers add detail fragments
    through note().
    """

    def __init__(self, seed: int = 0, trace: bool = False):
        self.seed = seed
        self.now = 0
        self.trace = trace
        self.trace_lines: list[str] = []
        self.dispatched = 0
        self._heap: list[tuple[int, int, EventHandle, Callback, str]] = []
        self._next_seq = 0
        self._streams: dict[str, RngStream] = {}
        self._notes: list[str] = []

    def rng(self, stream_id: str) -> RngStream:
        stream = self._streams.get(stream_id)
        if stream is None:
            stream = self._streams[stream_id] = RngStream(self.seed, stream_id)
        return stream

    def schedule(self, fire_at: int, kind: EventKind, callback: Callback,
                 key: str = "-") -> EventHandle:
        if fire_at < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.value} at {fire_at} us: clock is already {self.now} us")
        event = Event(fire_at, self._next_seq, kind)
        self._next_seq += 1
        handle = EventHandle(event, self)
        heapq.heappush(self._heap, (fire_at, event.seq, handle, callback, key))
        return handle

    def cancel(self, handle: EventHandle) -> CancelResult:
        if not isinstance(handle, EventHandle) or handle.owner is not self:
            raise SchedulingError("cancel() called with a handle not issued by this run")
        if handle.fired:
            return CancelResult.ALREADY_FIRED
        handle.cancelled = True
        return CancelResult.CANCELLED

    def note(self, text: str) -> None:
        """Attach a detail fragment to the trace line of the current dispatch."""
        if self.trace:
            self._notes.append(text)

    def run_until(self, t_end: int) -> int:
        """Dispatch every pending event with fire_at <= t_end; clock ends at t_end.

        Returns the number of events dispatched by this call.
        """
        count = 0
        heap = self._heap
        trace = self.trace
        while heap and heap[0][0] <= t_end:
            fire_at, seq, handle, callback, key = heapq.heappop(heap)
            if handle.cancelled:
                continue
            handle.fired = True
            self.now = fire_at
            if trace:
                self._notes = []
                detail = callback(fire_at)
                parts = ([detail] if detail else []) + self._notes
                self.trace_lines.append(
                    f"{fire_at}\t{seq}\t{handle.event.kind.value}\t{key}\t{'; '.join(parts)}")
            else:
                callback(fire_at)
            count += 1
        if t_end > self.now:
            self.now = t_end
        self.dispatched += count
        return count
