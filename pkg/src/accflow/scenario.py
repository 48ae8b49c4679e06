"""Declarative experiment input: scenario files, strict validation with
defaults, the named presets for the standard experiment setups, and sweep
derivation.

Scenario files are JSON with human units (seconds, milliseconds, Mbps);
unknown fields are rejected by name. A loaded scenario has every default
filled in, so echoing it back reproduces the exact run configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional, Union

from .defense import DefenseConfig, FlowKeyMode
from .engine import ms_us, s_us
from .fabric import PACKET_BYTES
from .sources import AttackKind, AttackProfile, PeriodicBenignProfile, SstfProfile
from .tcp import TcpConfig


class ScenarioError(ValueError):
    """Scenario file or preset parameters violate the schema."""


# -- schema sections --------------------------------------------------------


@dataclass(frozen=True)
class TopologySpec:
    # No-load round trip is about 71 ms, safely below the 200 ms minimum
    # timeout even with a full queue adding 28 ms.
    bottleneck_mbps: float = 10.0
    access_mbps: float = 100.0
    access_delay_ms: float = 20.0
    access_delay_jitter_ms: float = 8.0
    bottleneck_delay_ms: float = 10.0
    egress_delay_ms: float = 10.0
    ack_delay_ms: float = 30.0
    buffer_packets: int = 35


@dataclass(frozen=True)
class TcpSpec:
    min_rto_ms: float = 200.0
    max_rto_s: float = 60.0
    initial_cwnd: int = 2
    initial_ssthresh: int = 64
    # Application data the window cannot take immediately is retained up to
    # this many packets; as long as a backlog exists the sender keeps
    # offering at its full (paced) rate, like a real socket buffer.
    send_buffer_packets: int = 16
    fast_retransmit: bool = False


@dataclass(frozen=True)
class LegitFlowSpec:
    label: str
    rate_mbps: float
    start_s: float = 0.0


@dataclass(frozen=True)
class SquareWaveAttackSpec:
    kind: str = "square-wave"
    aggregate_mbps: float = 30.0
    period_ms: float = 200.0
    burst_ms: float = 67.0
    subflows: int = 1
    spoof_sources: bool = True
    start_s: float = 5.0


@dataclass(frozen=True)
class ConstantRateAttackSpec:
    kind: str = "constant"
    aggregate_mbps: float = 30.0
    subflows: int = 5
    spoof_sources: bool = True
    start_s: float = 5.0


@dataclass(frozen=True)
class SstfAttackSpec:
    kind: str = "sstf"
    attackers: int = 10
    flow_mbps: float = 3.0
    spawn_interval_ms: float = 200.0
    flow_payload_packets: int = 75
    spoof_sources: bool = False
    start_s: float = 5.0


AttackSpec = Union[SquareWaveAttackSpec, ConstantRateAttackSpec, SstfAttackSpec]


@dataclass(frozen=True)
class PeriodicFlowSpec:
    peak_mbps: float = 3.0
    period_ms: float = 200.0
    # One third duty cycle by default: chunk = peak * period / 3.
    chunk_bytes: Optional[int] = None
    start_s: float = 0.0


@dataclass(frozen=True)
class DefenseSpec:
    enabled: bool = True
    detection_period_ms: float = 500.0
    aggregate_loss_threshold: float = 0.30
    min_accountable_packets: int = 5
    queue_fraction_threshold: float = 0.10
    aggressive_ulr_threshold: float = 0.05
    aggressive_median_gap: float = 10.0
    aggregation: str = "connection"
    block_duration_s: Optional[float] = None


@dataclass(frozen=True)
class OutputSpec:
    dir: Optional[str] = None
    events_log: bool = False


@dataclass(frozen=True)
class Scenario:
    duration_s: float = 60.0
    seed: int = 1
    topology: TopologySpec = TopologySpec()
    tcp: TcpSpec = TcpSpec()
    legit_flows: tuple[LegitFlowSpec, ...] = ()
    attack: Optional[AttackSpec] = None
    benign_periodic: Optional[PeriodicFlowSpec] = None
    defense: Optional[DefenseSpec] = None
    outputs: OutputSpec = OutputSpec()

    @property
    def duration_us(self) -> int:
        return s_us(self.duration_s)


# -- strict parsing ---------------------------------------------------------


def _require_mapping(section: str, data) -> dict:
    if not isinstance(data, dict):
        raise ScenarioError(f"'{section}' must be an object")
    return data


def _check_unknown(section: str, data: dict, allowed: set[str]) -> None:
    for name in data:
        if name not in allowed:
            raise ScenarioError(f"unknown field '{section}.{name}'" if section
                                else f"unknown field '{name}'")


def _num(section: str, data: dict, name: str, default, positive=False,
         nonneg=False):
    value = data.get(name, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"field '{section}.{name}' must be a number")
    if positive and value <= 0:
        raise ScenarioError(f"field '{section}.{name}' must be > 0")
    if nonneg and value < 0:
        raise ScenarioError(f"field '{section}.{name}' must be >= 0")
    return value


def _int(section: str, data: dict, name: str, default, minimum=None):
    value = data.get(name, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"field '{section}.{name}' must be an integer")
    if minimum is not None and value < minimum:
        raise ScenarioError(f"field '{section}.{name}' must be >= {minimum}")
    return value


def _bool(section: str, data: dict, name: str, default):
    value = data.get(name, default)
    if not isinstance(value, bool):
        raise ScenarioError(f"field '{section}.{name}' must be a boolean")
    return value


def _parse_topology(data: dict) -> TopologySpec:
    section = "topology"
    _check_unknown(section, data, {
        "bottleneck_mbps", "access_mbps", "access_delay_ms",
        "access_delay_jitter_ms", "bottleneck_delay_ms", "egress_delay_ms",
        "ack_delay_ms", "buffer_packets"})
    d = TopologySpec()
    return TopologySpec(
        bottleneck_mbps=_num(section, data, "bottleneck_mbps", d.bottleneck_mbps, positive=True),
        access_mbps=_num(section, data, "access_mbps", d.access_mbps, positive=True),
        access_delay_ms=_num(section, data, "access_delay_ms", d.access_delay_ms, nonneg=True),
        access_delay_jitter_ms=_num(section, data, "access_delay_jitter_ms",
                                    d.access_delay_jitter_ms, nonneg=True),
        bottleneck_delay_ms=_num(section, data, "bottleneck_delay_ms",
                                 d.bottleneck_delay_ms, nonneg=True),
        egress_delay_ms=_num(section, data, "egress_delay_ms", d.egress_delay_ms, nonneg=True),
        ack_delay_ms=_num(section, data, "ack_delay_ms", d.ack_delay_ms, nonneg=True),
        buffer_packets=_int(section, data, "buffer_packets", d.buffer_packets, minimum=1),
    )


def _parse_tcp(data: dict) -> TcpSpec:
    section = "tcp"
    _check_unknown(section, data, {
        "min_rto_ms", "max_rto_s", "initial_cwnd", "initial_ssthresh",
        "send_buffer_packets", "fast_retransmit"})
    d = TcpSpec()
    return TcpSpec(
        min_rto_ms=_num(section, data, "min_rto_ms", d.min_rto_ms, positive=True),
        max_rto_s=_num(section, data, "max_rto_s", d.max_rto_s, positive=True),
        initial_cwnd=_int(section, data, "initial_cwnd", d.initial_cwnd, minimum=1),
        initial_ssthresh=_int(section, data, "initial_ssthresh", d.initial_ssthresh, minimum=2),
        send_buffer_packets=_int(section, data, "send_buffer_packets",
                                 d.send_buffer_packets, minimum=1),
        fast_retransmit=_bool(section, data, "fast_retransmit", d.fast_retransmit),
    )


def _parse_legit_flow(index: int, data: dict) -> LegitFlowSpec:
    section = f"legit_flows[{index}]"
    _check_unknown(section, data, {"label", "rate_mbps", "start_s"})
    label = data.get("label", f"legit-{index}")
    if not isinstance(label, str) or not label:
        raise ScenarioError(f"field '{section}.label' must be a non-empty string")
    return LegitFlowSpec(
        label=label,
        rate_mbps=_num(section, data, "rate_mbps", None, positive=True)
        if "rate_mbps" in data else _missing(section, "rate_mbps"),
        start_s=_num(section, data, "start_s", 0.0, nonneg=True),
    )


def _missing(section: str, name: str):
    raise ScenarioError(f"missing required field '{section}.{name}'")


def _parse_attack(data: dict) -> AttackSpec:
    section = "attack"
    kind = data.get("kind", "square-wave")
    if kind == "square-wave":
        _check_unknown(section, data, {"kind", "aggregate_mbps", "period_ms",
                                       "burst_ms", "subflows", "spoof_sources",
                                       "start_s"})
        d = SquareWaveAttackSpec()
        spec = SquareWaveAttackSpec(
            aggregate_mbps=_num(section, data, "aggregate_mbps", d.aggregate_mbps, positive=True),
            period_ms=_num(section, data, "period_ms", d.period_ms, positive=True),
            burst_ms=_num(section, data, "burst_ms", d.burst_ms, positive=True),
            subflows=_int(section, data, "subflows", d.subflows, minimum=1),
            spoof_sources=_bool(section, data, "spoof_sources", d.spoof_sources),
            start_s=_num(section, data, "start_s", d.start_s, nonneg=True),
        )
        if spec.burst_ms > spec.period_ms:
            raise ScenarioError("field 'attack.burst_ms' cannot exceed 'attack.period_ms'")
        return spec
    if kind == "constant":
        _check_unknown(section, data, {"kind", "aggregate_mbps", "subflows",
                                       "spoof_sources", "start_s"})
        d = ConstantRateAttackSpec()
        return ConstantRateAttackSpec(
            aggregate_mbps=_num(section, data, "aggregate_mbps", d.aggregate_mbps, positive=True),
            subflows=_int(section, data, "subflows", d.subflows, minimum=1),
            spoof_sources=_bool(section, data, "spoof_sources", d.spoof_sources),
            start_s=_num(section, data, "start_s", d.start_s, nonneg=True),
        )
    if kind == "sstf":
        _check_unknown(section, data, {"kind", "attackers", "flow_mbps",
                                       "spawn_interval_ms", "flow_payload_packets",
                                       "spoof_sources", "start_s"})
        d = SstfAttackSpec()
        return SstfAttackSpec(
            attackers=_int(section, data, "attackers", d.attackers, minimum=1),
            flow_mbps=_num(section, data, "flow_mbps", d.flow_mbps, positive=True),
            spawn_interval_ms=_num(section, data, "spawn_interval_ms",
                                   d.spawn_interval_ms, positive=True),
            flow_payload_packets=_int(section, data, "flow_payload_packets",
                                      d.flow_payload_packets, minimum=1),
            spoof_sources=_bool(section, data, "spoof_sources", d.spoof_sources),
            start_s=_num(section, data, "start_s", d.start_s, nonneg=True),
        )
    raise ScenarioError(f"field 'attack.kind' must be one of "
                        f"'square-wave', 'constant', 'sstf' (got {kind!r})")


def _parse_periodic(data: dict) -> PeriodicFlowSpec:
    section = "benign_periodic"
    _check_unknown(section, data, {"peak_mbps", "period_ms", "chunk_bytes", "start_s"})
    d = PeriodicFlowSpec()
    peak_mbps = _num(section, data, "peak_mbps", d.peak_mbps, positive=True)
    period_ms = _num(section, data, "period_ms", d.period_ms, positive=True)
    chunk = data.get("chunk_bytes")
    if chunk is None:
        chunk = round(peak_mbps * 1e6 * (period_ms / 1e3) / 3 / 8)
    elif isinstance(chunk, bool) or not isinstance(chunk, int) or chunk < PACKET_BYTES:
        raise ScenarioError(
            f"field '{section}.chunk_bytes' must be an integer >= {PACKET_BYTES}")
    return PeriodicFlowSpec(
        peak_mbps=peak_mbps,
        period_ms=period_ms,
        chunk_bytes=chunk,
        start_s=_num(section, data, "start_s", d.start_s, nonneg=True),
    )


def _parse_defense(data: dict) -> DefenseSpec:
    section = "defense"
    _check_unknown(section, data, {
        "enabled", "detection_period_ms", "aggregate_loss_threshold",
        "min_accountable_packets", "queue_fraction_threshold",
        "aggressive_ulr_threshold", "aggressive_median_gap", "aggregation",
        "block_duration_s"})
    d = DefenseSpec()
    aggregation = data.get("aggregation", d.aggregation)
    if aggregation not in ("connection", "source"):
        raise ScenarioError("field 'defense.aggregation' must be 'connection' or 'source'")
    block = data.get("block_duration_s", d.block_duration_s)
    if block is not None and (isinstance(block, bool)
                              or not isinstance(block, (int, float)) or block <= 0):
        raise ScenarioError("field 'defense.block_duration_s' must be null or > 0")
    spec = DefenseSpec(
        enabled=_bool(section, data, "enabled", d.enabled),
        detection_period_ms=_num(section, data, "detection_period_ms",
                                 d.detection_period_ms, positive=True),
        aggregate_loss_threshold=_num(section, data, "aggregate_loss_threshold",
                                      d.aggregate_loss_threshold, positive=True),
        min_accountable_packets=_int(section, data, "min_accountable_packets",
                                     d.min_accountable_packets, minimum=1),
        queue_fraction_threshold=_num(section, data, "queue_fraction_threshold",
                                      d.queue_fraction_threshold, positive=True),
        aggressive_ulr_threshold=_num(section, data, "aggressive_ulr_threshold",
                                      d.aggressive_ulr_threshold, positive=True),
        aggressive_median_gap=_num(section, data, "aggressive_median_gap",
                                   d.aggressive_median_gap, positive=True),
        aggregation=aggregation,
        block_duration_s=block,
    )
    if spec.aggregate_loss_threshold >= 1.0:
        raise ScenarioError("field 'defense.aggregate_loss_threshold' must be < 1")
    if spec.queue_fraction_threshold >= 1.0:
        raise ScenarioError("field 'defense.queue_fraction_threshold' must be < 1")
    return spec


def _parse_outputs(data: dict) -> OutputSpec:
    section = "outputs"
    _check_unknown(section, data, {"dir", "events_log"})
    out_dir = data.get("dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ScenarioError("field 'outputs.dir' must be a string or null")
    return OutputSpec(dir=out_dir,
                      events_log=_bool(section, data, "events_log", False))


def scenario_from_jsonable(data: dict) -> Scenario:
    data = _require_mapping("scenario", data)
    _check_unknown("", data, {"duration_s", "seed", "topology", "tcp",
                              "legit_flows", "attack", "benign_periodic",
                              "defense", "outputs"})
    duration_s = _num("", data, "duration_s", 60.0, positive=True)
    seed = _int("", data, "seed", 1, minimum=0)
    topology = _parse_topology(_require_mapping("topology", data.get("topology", {})))
    tcp = _parse_tcp(_require_mapping("tcp", data.get("tcp", {})))
    flows_raw = data.get("legit_flows", [])
    if not isinstance(flows_raw, list):
        raise ScenarioError("'legit_flows' must be a list")
    flows = tuple(_parse_legit_flow(i, _require_mapping(f"legit_flows[{i}]", f))
                  for i, f in enumerate(flows_raw))
    labels = [f.label for f in flows]
    if len(set(labels)) != len(labels):
        raise ScenarioError("'legit_flows' labels must be unique")
    for reserved in ("attack", "benign"):
        if reserved in labels:
            raise ScenarioError(f"legit flow label {reserved!r} is reserved")
    attack = data.get("attack")
    attack_spec = None if attack is None else _parse_attack(_require_mapping("attack", attack))
    periodic = data.get("benign_periodic")
    periodic_spec = (None if periodic is None
                     else _parse_periodic(_require_mapping("benign_periodic", periodic)))
    defense = data.get("defense")
    defense_spec = None if defense is None else _parse_defense(_require_mapping("defense", defense))
    outputs = _parse_outputs(_require_mapping("outputs", data.get("outputs", {})))
    scenario = Scenario(duration_s=duration_s, seed=seed, topology=topology,
                        tcp=tcp, legit_flows=flows, attack=attack_spec,
                        benign_periodic=periodic_spec, defense=defense_spec,
                        outputs=outputs)
    period_ms = (defense_spec.detection_period_ms if defense_spec is not None
                 else DefenseSpec().detection_period_ms)
    if scenario.duration_s * 1e3 <= period_ms:
        raise ScenarioError("'duration_s' must exceed the detection period")
    return scenario


def load_scenario(path: str) -> Scenario:
    """Parse and validate a scenario file; every default is filled in."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file is not valid JSON: {exc}") from exc
    return scenario_from_jsonable(data)


def scenario_to_jsonable(scenario: Scenario) -> dict:
    """Normalized echo of a scenario; loading it back gives an equal value."""
    t, c = scenario.topology, scenario.tcp
    out: dict = {
        "duration_s": scenario.duration_s,
        "seed": scenario.seed,
        "topology": {
            "bottleneck_mbps": t.bottleneck_mbps,
            "access_mbps": t.access_mbps,
            "access_delay_ms": t.access_delay_ms,
            "access_delay_jitter_ms": t.access_delay_jitter_ms,
            "bottleneck_delay_ms": t.bottleneck_delay_ms,
            "egress_delay_ms": t.egress_delay_ms,
            "ack_delay_ms": t.ack_delay_ms,
            "buffer_packets": t.buffer_packets,
        },
        "tcp": {
            "min_rto_ms": c.min_rto_ms,
            "max_rto_s": c.max_rto_s,
            "initial_cwnd": c.initial_cwnd,
            "initial_ssthresh": c.initial_ssthresh,
            "send_buffer_packets": c.send_buffer_packets,
            "fast_retransmit": c.fast_retransmit,
        },
        "legit_flows": [
            {"label": f.label, "rate_mbps": f.rate_mbps, "start_s": f.start_s}
            for f in scenario.legit_flows
        ],
        "attack": None,
        "benign_periodic": None,
        "defense": None,
        "outputs": {"dir": scenario.outputs.dir,
                    "events_log": scenario.outputs.events_log},
    }
    a = scenario.attack
    if isinstance(a, SquareWaveAttackSpec):
        out["attack"] = {"kind": a.kind, "aggregate_mbps": a.aggregate_mbps,
                         "period_ms": a.period_ms, "burst_ms": a.burst_ms,
                         "subflows": a.subflows, "spoof_sources": a.spoof_sources,
                         "start_s": a.start_s}
    elif isinstance(a, ConstantRateAttackSpec):
        out["attack"] = {"kind": a.kind, "aggregate_mbps": a.aggregate_mbps,
                         "subflows": a.subflows, "spoof_sources": a.spoof_sources,
                         "start_s": a.start_s}
    elif isinstance(a, SstfAttackSpec):
        out["attack"] = {"kind": a.kind, "attackers": a.attackers,
                         "flow_mbps": a.flow_mbps,
                         "spawn_interval_ms": a.spawn_interval_ms,
                         "flow_payload_packets": a.flow_payload_packets,
                         "spoof_sources": a.spoof_sources, "start_s": a.start_s}
    p = scenario.benign_periodic
    if p is not None:
        out["benign_periodic"] = {"peak_mbps": p.peak_mbps, "period_ms": p.period_ms,
                                  "chunk_bytes": p.chunk_bytes, "start_s": p.start_s}
    d = scenario.defense
    if d is not None:
        out["defense"] = {
            "enabled": d.enabled,
            "detection_period_ms": d.detection_period_ms,
            "aggregate_loss_threshold": d.aggregate_loss_threshold,
            "min_accountable_packets": d.min_accountable_packets,
            "queue_fraction_threshold": d.queue_fraction_threshold,
            "aggressive_ulr_threshold": d.aggressive_ulr_threshold,
            "aggressive_median_gap": d.aggressive_median_gap,
            "aggregation": d.aggregation,
            "block_duration_s": d.block_duration_s,
        }
    return out


def save_scenario(scenario: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_jsonable(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- runtime config conversion ----------------------------------------------


def build_tcp_config(spec: TcpSpec) -> TcpConfig:
    return TcpConfig(min_rto_us=ms_us(spec.min_rto_ms),
                     max_rto_us=s_us(spec.max_rto_s),
                     initial_cwnd=spec.initial_cwnd,
                     initial_ssthresh=spec.initial_ssthresh,
                     fast_retransmit=spec.fast_retransmit)


def build_defense_config(spec: Optional[DefenseSpec]) -> DefenseConfig:
    if spec is None:
        spec = DefenseSpec(enabled=False)
    return DefenseConfig(
        detection_period_us=ms_us(spec.detection_period_ms),
        aggregate_loss_threshold=spec.aggregate_loss_threshold,
        min_accountable_usage=spec.min_accountable_packets,
        queue_threshold_fraction=spec.queue_fraction_threshold,
        aggressive_ulr_threshold=spec.aggressive_ulr_threshold,
        aggressive_median_gap=spec.aggressive_median_gap,
        aggregation=(FlowKeyMode.SOURCE if spec.aggregation == "source"
                     else FlowKeyMode.CONNECTION),
        dropping_enabled=spec.enabled,
        aggressive_enabled=spec.enabled,
        block_duration_us=None if spec.block_duration_s is None
        else s_us(spec.block_duration_s),
    )


def build_attack_profile(spec: AttackSpec) -> Union[AttackProfile, SstfProfile]:
    if isinstance(spec, SquareWaveAttackSpec):
        return AttackProfile(kind=AttackKind.SQUARE_WAVE,
                             peak_rate_bps=round(spec.aggregate_mbps * 1e6),
                             period_us=ms_us(spec.period_ms),
                             burst_us=ms_us(spec.burst_ms),
                             n_subflows=spec.subflows,
                             spoof_sources=spec.spoof_sources,
                             start_us=s_us(spec.start_s))
    if isinstance(spec, ConstantRateAttackSpec):
        return AttackProfile(kind=AttackKind.CONSTANT,
                             peak_rate_bps=round(spec.aggregate_mbps * 1e6),
                             n_subflows=spec.subflows,
                             spoof_sources=spec.spoof_sources,
                             start_us=s_us(spec.start_s))
    if isinstance(spec, SstfAttackSpec):
        return SstfProfile(n_attackers=spec.attackers,
                           per_flow_rate_bps=round(spec.flow_mbps * 1e6),
                           spawn_interval_us=ms_us(spec.spawn_interval_ms),
                           flow_payload_packets=spec.flow_payload_packets,
                           spoof_sources=spec.spoof_sources,
                           start_us=s_us(spec.start_s))
    raise ScenarioError(f"unsupported attack spec {type(spec).__name__}")


def build_periodic_profile(spec: PeriodicFlowSpec) -> PeriodicBenignProfile:
    chunk = spec.chunk_bytes
    if chunk is None:
        chunk = round(spec.peak_mbps * 1e6 * (spec.period_ms / 1e3) / 3 / 8)
    return PeriodicBenignProfile(peak_rate_bps=round(spec.peak_mbps * 1e6),
                                 period_us=ms_us(spec.period_ms),
                                 chunk_bytes=chunk,
                                 start_us=s_us(spec.start_s))


# -- presets -----------------------------------------------------------------


PRESET_NAMES = ("baseline-fair", "baseline-attack", "normal-load",
                "setting-one", "setting-two", "setting-three", "sstf",
                "benign-periodic", "general-dos")


def _legit_row(count: int, rate_mbps: float, stagger_s: float) -> tuple[LegitFlowSpec, ...]:
    return tuple(LegitFlowSpec(label=f"legit-{i}", rate_mbps=rate_mbps,
                               start_s=round(i * stagger_s, 6))
                 for i in range(count))


def _legit_spread(count: int = 9, stagger_s: float = 0.17) -> tuple[LegitFlowSpec, ...]:
    # Rates 0.3, 0.4, ... advancing by 0.1 Mbps per flow.
    return tuple(LegitFlowSpec(label=f"legit-{i}", rate_mbps=round(0.3 + 0.1 * i, 6),
                               start_s=round(i * stagger_s, 6))
                 for i in range(count))


def build_preset(name: str, attackers: Optional[int] = None,
                 rate_mbps: Optional[float] = None, flows: Optional[int] = None,
                 defense_on: Optional[bool] = None, seed: int = 1,
                 out_dir: Optional[str] = None, events_log: bool = False) -> Scenario:
    """Construct one of the named experiment presets.

    `attackers` overrides the attack scale, `rate_mbps` the aggregate attack
    rate, `flows` the number of legitimate flows where the preset varies it.
    """
    if name not in PRESET_NAMES:
        raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    outputs = OutputSpec(dir=out_dir, events_log=events_log)
    defense_off = DefenseSpec(enabled=False)
    defense_src = DefenseSpec(enabled=True, aggregation="source")
    # Presets model hosts running a full TCP stack, so dup-ack recovery is on.
    preset_tcp = TcpSpec(fast_retransmit=True)

    if name == "baseline-fair":
        scenario = Scenario(duration_s=40.0, seed=seed, outputs=outputs,
                            tcp=preset_tcp,
                            legit_flows=_legit_row(flows or 9, 1.0, 0.17),
                            defense=defense_off)
    elif name == "baseline-attack":
        scenario = Scenario(duration_s=60.0, seed=seed, outputs=outputs,
                            tcp=preset_tcp,
                            legit_flows=_legit_row(flows or 9, 1.0, 0.17),
                            attack=SquareWaveAttackSpec(subflows=attackers or 1,
                                                        aggregate_mbps=rate_mbps or 30.0),
                            defense=defense_off)
    elif name == "normal-load":
        scenario = Scenario(duration_s=60.0, seed=seed, outputs=outputs,
                            tcp=preset_tcp,
                            legit_flows=_legit_row(flows or 40, 1.0, 0.09),
                            defense=defense_off)
    elif name == "setting-one":
        scenario = Scenario(duration_s=60.0, seed=seed, outputs=outputs,
                            tcp=preset_tcp,
                            legit_flows=_legit_row(flows or 5, 1.0, 0.17),
                            attack=SquareWaveAttackSpec(subflows=attackers or 20,
                                                        aggregate_mbps=rate_mbps or 30.0),
                            defense=DefenseSpec())
    elif name == "setting-two":
        scenario = Scenario(duration_s=60.0, seed=seed, outputs=outputs,
                            tcp=preset_tcp,
                            legit_flows=_legit_spread(flows or 9),
                            attack=SquareWaveAttackSpec(subflows=attackers or 20,
                                                        aggregate_mbps=rate_mbps or 30.0),
                            defense=DefenseSpec())
    elif name == "setting-three":
        scenario = Scenario(duration_s=60.0, seed=seed, outputs=outputs,
                            tcp=preset_tcp,
                            legit_flows=_legit_spread(flows or 9),
                            attack=SquareWaveAttackSpec(subflows=attackers or 5,
                                                        aggregate_mbps=rate_mbps or 40.0),
                            defense=DefenseSpec())
    elif name == "sstf":
        scenario = Scenario(duration_s=60.0, seed=seed, outputs=outputs,
                            tcp=preset_tcp,
                            legit_flows=_legit_row(flows or 9, 1.0, 0.17),
                            attack=SstfAttackSpec(attackers=attackers or 10,
                                                  flow_mbps=rate_mbps or 3.0),
                            defense=defense_src)
    elif name == "benign-periodic":
        scenario = Scenario(duration_s=40.0, seed=seed, outputs=outputs,
                            tcp=preset_tcp,
                            legit_flows=_legit_row(flows or 9, 1.0, 0.17),
                            benign_periodic=PeriodicFlowSpec(),
                            defense=DefenseSpec())
    else:  # general-dos
        scenario = Scenario(duration_s=60.0, seed=seed, outputs=outputs,
                            tcp=preset_tcp,
                            legit_flows=_legit_spread(flows or 9),
                            attack=ConstantRateAttackSpec(subflows=attackers or 5,
                                                          aggregate_mbps=rate_mbps or 30.0),
                            defense=DefenseSpec())

    if defense_on is not None and scenario.defense is not None:
        scenario = replace(scenario,
                           defense=replace(scenario.defense, enabled=defense_on))
    # Normalize derived defaults (periodic chunk size) through the parser.
    return scenario_from_jsonable(scenario_to_jsonable(scenario))


# -- sweeps -------------------------------------------------------------------


def sweep_points(template: Scenario, axis: str, start: int, stop: int,
                 step: int) -> list[Scenario]:
    """One scenario per axis value in [start, stop] at the given step; seeds
    derive as template.seed + index so each point reruns in isolation."""
    if step <= 0:
        raise ScenarioError("sweep step must be > 0")
    values = list(range(start, stop + 1, step))
    if not values:
        raise ScenarioError(f"empty sweep axis: start={start} stop={stop} step={step}")
    if template.attack is None:
        raise ScenarioError("sweep template has no attack to vary")
    points = []
    for index, value in enumerate(values):
        attack = template.attack
        if axis == "attackers":
            if isinstance(attack, SstfAttackSpec):
                attack = replace(attack, attackers=value)
            else:
                attack = replace(attack, subflows=value)
        elif axis == "rate":
            if isinstance(attack, SstfAttackSpec):
                raise ScenarioError("sweep axis 'rate' does not apply to an sstf attack")
            attack = replace(attack, aggregate_mbps=float(value))
        else:
            raise ScenarioError(f"unknown sweep axis {axis!r}; use 'attackers' or 'rate'")
        if value < 1:
            raise ScenarioError("sweep values must be >= 1")
        points.append(replace(template, attack=attack, seed=template.seed + index))
    return points
