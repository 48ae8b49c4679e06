"""Timeout-driven TCP congestion machine.

Reno-style slow start and congestion avoidance with loss recovery through
retransmission timeouts only (no fast retransmit / fast recovery; the
low-rate attack and the defense both hinge on the timeout mechanism).

The retransmission timeout is min_rto doubled once per consecutive timeout
and capped at max_rto. A sender that times out suspends all transmission
(timeout-wait), waits the backed-off timeout, then probes with a single
packet; any acknowledged data resets the backoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class TcpPhase(Enum):
    SLOW_START = "slow-start"
    CONGESTION_AVOIDANCE = "congestion-avoidance"
    TIMEOUT_WAIT = "timeout-wait"


@dataclass(frozen=True)
class TcpConfig:
    min_rto_us: int = 200_000
    max_rto_us: int = 60_000_000
    initial_cwnd: int = 2
    initial_ssthresh: int = 64
    # Dup-ack-triggered retransmission. Off by default; the experiment
    # presets enable it, since isolated single losses otherwise cost a full
    # doubled-timeout stall that no deployed TCP pays.
    fast_retransmit: bool = False
    dupack_threshold: int = 3


@dataclass
class TcpState:
    """Per-connection congestion state.

    `inflight` holds transport-level data units awaiting acknowledgement;
    a retransmission re-sends a unit under a fresh wire packet, so wire
    sequence numbers stay unique per flow. cwnd is an integer packet count,
    never below 1. In congestion avoidance `ack_credit` counts acks toward
    the next +1, which grows cwnd by one packet per round trip.
    """

    cwnd: int = 2
    ssthresh: int = 64
    phase: TcpPhase = TcpPhase.SLOW_START
    rto_us: int = 200_000
    srtt_us: int = 0  # 0 until the first sample
    backoff_exponent: int = 0
    next_seq: int = 0
    inflight: set[int] = field(default_factory=set)
    ack_credit: int = 0

    @classmethod
    def initial(cls, config: TcpConfig) -> "TcpState":
        return cls(cwnd=config.initial_cwnd, ssthresh=config.initial_ssthresh,
                   rto_us=config.min_rto_us)


def apply_ack(state: TcpState, config: TcpConfig, acked_seq: int,
              rtt_sample_us: int) -> bool:
    """Process one acknowledgement; returns False for a duplicate.

    An ack for an unknown unit is ignored entirely. Otherwise the smoothed
    RTT moves by 1/8 toward the sample, the timeout backoff resets, and the
    window grows: +1 per ack in slow start (switching to avoidance once
    cwnd reaches ssthresh), +1 per window of acks in avoidance.
    """
    if acked_seq not in state.inflight:
        return False
    state.inflight.discard(acked_seq)
    if state.srtt_us == 0:
        state.srtt_us = rtt_sample_us
    else:
        state.srtt_us += (rtt_sample_us - state.srtt_us) // 8
    state.backoff_exponent = 0
    state.rto_us = config.min_rto_us
    if state.phase is TcpPhase.SLOW_START:
        state.cwnd += 1
        if state.cwnd >= state.ssthresh:
            state.phase = TcpPhase.CONGESTION_AVOIDANCE
    elif state.phase is TcpPhase.CONGESTION_AVOIDANCE:
        state.ack_credit += 1
        if state.ack_credit >= state.cwnd:
            state.cwnd += 1
            state.ack_credit = 0
    return True


def apply_timeout(state: TcpState, config: TcpConfig) -> None:
    """Retransmission timer fired: halve ssthresh, collapse the window,
    double the timeout, and suspend transmission until the probe."""
    state.ssthresh = max(state.cwnd // 2, 2)
    state.cwnd = 1
    state.backoff_exponent += 1
    state.rto_us = min(config.min_rto_us << state.backoff_exponent, config.max_rto_us)
    state.phase = TcpPhase.TIMEOUT_WAIT
    state.ack_credit = 0


def apply_fast_retransmit(state: TcpState, config: TcpConfig) -> None:
    """Loss inferred from acks arriving past a hole: halve the window and
    continue in congestion avoidance, without touching the timeout backoff.
    The caller re-sends the lost unit."""
    state.ssthresh = max(state.cwnd // 2, 2)
    state.cwnd = state.ssthresh
    state.phase = TcpPhase.CONGESTION_AVOIDANCE
    state.ack_credit = 0
