"""Experiment execution: builds the dumbbell from a scenario, runs it, and
assembles the structured report plus CSV/JSON outputs.

One Simulation owns one EventLoop and everything attached to it. Sweeps run
points sequentially with seeds derived as seed + index, so any point can be
reproduced in isolation.
"""

from __future__ import annotations

import csv
import io
import os
from typing import Optional

from .defense import AccFlowController, FlowKeyMode
from .engine import EventKind, EventLoop, ms_us, s_us, US_PER_S
from .fabric import BottleneckRouter, Link, PACKET_BITS
from .metrics import (RunReport, ThroughputRecorder, TotalsBook,
                      convergence_time_us, mean_goodput_bps)
from .scenario import (Scenario, SstfAttackSpec, build_attack_profile,
                       build_defense_config, build_periodic_profile,
                       build_tcp_config, scenario_to_jsonable, sweep_points)
from .sources import (AttackKind, AttackProfile, ConstantRateSource,
                      SquareWaveSource, SstfProfile, SstfSpawner, TcpSender,
                      emission_slot_us, finite_tokens, periodic_chunk_tokens,
                      steady_tokens)

THROUGHPUT_BIN_US = 500_000
ATTACK_LABEL = "attack"
BENIGN_LABEL = "benign"


class SimulationInvariantError(RuntimeError):
    """A run ended in a state that violates its own accounting."""


class Simulation:
    """One configured run of the dumbbell network."""

    def __init__(self, scenario: Scenario, trace: bool = False):
        self.scenario = scenario
        topo = scenario.topology
        self.loop = EventLoop(seed=scenario.seed,
                              trace=trace or scenario.outputs.events_log)
        self.totals = TotalsBook()
        self.controller = AccFlowController(
            self.loop, build_defense_config(scenario.defense), topo.buffer_packets)
        self.tcp_config = build_tcp_config(scenario.tcp)
        self.ack_delay_us = ms_us(topo.ack_delay_ms)
        self.access_bps = round(topo.access_mbps * 1e6)
        self._jitter = self.loop.rng("topo")

        labels = [f.label for f in scenario.legit_flows]
        if scenario.benign_periodic is not None:
            labels.append(BENIGN_LABEL)
        if scenario.attack is not None:
            labels.append(ATTACK_LABEL)
        self.recorder = ThroughputRecorder(labels, scenario.duration_us,
                                           THROUGHPUT_BIN_US)
        self.labels: dict[str, str] = {}
        self.tcp_flows: dict[str, TcpSender] = {}

        deliver_delay = ms_us(topo.bottleneck_delay_ms) + ms_us(topo.egress_delay_ms)
        self.router = BottleneckRouter(
            self.loop, topo.buffer_packets, round(topo.bottleneck_mbps * 1e6),
            deliver_delay, self._sink, controller=self.controller,
            totals=self.totals)

        self._sources: list = []
        self._attack_flow_ids: list[str] = []
        self._build_sources()

    # -- construction -------------------------------------------------------

    def _access_link(self) -> Link:
        topo = self.scenario.topology
        jitter_us = round(self._jitter.uniform(-topo.access_delay_jitter_ms,
                                               topo.access_delay_jitter_ms) * 1000)
        delay = max(ms_us(topo.access_delay_ms) + jitter_us, 0)
        return Link(self.access_bps, delay)

    def _build_sources(self) -> None:
        scenario = self.scenario
        for flow in scenario.legit_flows:
            rate_bps = round(flow.rate_mbps * 1e6)
            app_rng = self.loop.rng(f"app:{flow.label}")
            sender = TcpSender(
                self.loop, self.router, self._access_link(),
                flow_id=flow.label, src_addr=f"src-{flow.label}",
                tcp_config=self.tcp_config,
                tokens=steady_tokens(s_us(flow.start_s), rate_bps, rng=app_rng),
                buffer_cap=scenario.tcp.send_buffer_packets,
                pace_gap_us=emission_slot_us(1, rate_bps), pace_rng=app_rng,
                totals=self.totals)
            self.labels[flow.label] = flow.label
            self.tcp_flows[flow.label] = sender
            self._sources.append(sender)

        if scenario.benign_periodic is not None:
            profile = build_periodic_profile(scenario.benign_periodic)
            sender = TcpSender(
                self.loop, self.router, self._access_link(),
                flow_id=BENIGN_LABEL, src_addr=f"src-{BENIGN_LABEL}",
                tcp_config=self.tcp_config,
                tokens=periodic_chunk_tokens(profile, profile.start_us),
                buffer_cap=scenario.tcp.send_buffer_packets,
                pace_gap_us=emission_slot_us(1, profile.peak_rate_bps),
                pace_rng=self.loop.rng("app:benign"),
                totals=self.totals)
            self.labels[BENIGN_LABEL] = BENIGN_LABEL
            self.tcp_flows[BENIGN_LABEL] = sender
            self._sources.append(sender)

        if scenario.attack is not None:
            profile = build_attack_profile(scenario.attack)
            if isinstance(profile, SstfProfile):
                self._build_sstf(profile, scenario.attack)
            else:
                self._build_flood(profile)

    def _build_flood(self, profile: AttackProfile) -> None:
        source_cls = (SquareWaveSource if profile.kind is AttackKind.SQUARE_WAVE
                      else ConstantRateSource)
        for i in range(profile.n_subflows):
            flow_id = f"atk-{i}"
            src_addr = f"src-atk-{i}" if profile.spoof_sources else "src-atk"
            # Interleave subflow slots so the aggregate is evenly paced.
            offset = emission_slot_us(i, profile.peak_rate_bps)
            src = source_cls(self.loop, self.router, self._access_link(),
                             flow_id, src_addr, profile, totals=self.totals,
                             phase_offset_us=offset)
            self.labels[flow_id] = ATTACK_LABEL
            self._attack_flow_ids.append(flow_id)
            self._sources.append(src)

    def _build_sstf(self, profile: SstfProfile, spec: SstfAttackSpec) -> None:
        links = [self._access_link() for _ in range(profile.n_attackers)]

        def make_flow(attacker: int, spawn_round: int, now: int) -> TcpSender:
            flow_id = f"sstf-{attacker}-{spawn_round}"
            if profile.spoof_sources:
                src_addr = f"src-sstf-{attacker}-{spawn_round}"
            else:
                src_addr = f"src-sstf-{attacker}"
            sender = TcpSender(
                self.loop, self.router, links[attacker],
                flow_id=flow_id, src_addr=src_addr, tcp_config=self.tcp_config,
                tokens=finite_tokens(now, profile.per_flow_rate_bps,
                                     profile.flow_payload_packets),
                buffer_cap=profile.flow_payload_packets,
                totals=self.totals)
            self.labels[flow_id] = ATTACK_LABEL
            self.tcp_flows[flow_id] = sender
            self._attack_flow_ids.append(flow_id)
            sender.start()
            return sender

        self._sources.append(SstfSpawner(self.loop, profile, make_flow))

    # -- delivery side -------------------------------------------------------

    def _sink(self, pkt, now: int) -> Optional[str]:
        self.totals.deliver(pkt.flow_id)
        label = self.labels.get(pkt.flow_id, pkt.flow_id)
        self.recorder.on_deliver(label, pkt.size_bytes * 8, now)
        sender = self.tcp_flows.get(pkt.flow_id)
        if sender is not None:
            self.loop.schedule(now + self.ack_delay_us, EventKind.PACKET_ARRIVAL,
                               lambda t, p=pkt: sender.handle_ack(p.data_id,
                                                                  p.emitted_at, t),
                               key=pkt.flow_id)
        if self.loop.trace:
            return (f"deliver flow={pkt.flow_id} label={label} pkt={pkt.seq} "
                    f"bytes={pkt.size_bytes}")
        return None

    # -- run -------------------------------------------------------------------

    def run(self) -> RunReport:
        for source in self._sources:
            source.start()
        self.controller.start()
        self.loop.run_until(self.scenario.duration_us)
        return self._build_report()

    def _legit_keys(self) -> dict[str, str]:
        by_source = self.controller.config.aggregation is FlowKeyMode.SOURCE
        return {f.label: (f"src-{f.label}" if by_source else f.label)
                for f in self.scenario.legit_flows}

    def _build_report(self) -> RunReport:
        scenario = self.scenario
        for flow_id in self.totals.as_dict():
            if self.totals.in_flight(flow_id) < 0:
                raise SimulationInvariantError(
                    f"flow {flow_id} delivered or dropped more packets than it emitted")
        attack_offered = None
        attack_start_us = 0
        if scenario.attack is not None:
            attack_start_us = s_us(scenario.attack.start_s)
            window_us = scenario.duration_us - attack_start_us
            emitted_bits = sum(self.totals.as_dict()[fid]["emitted"] * PACKET_BITS
                               for fid in self._attack_flow_ids
                               if fid in self.totals.as_dict())
            attack_offered = emitted_bits / window_us if window_us > 0 else None
        legit_keys = self._legit_keys()
        convergence = convergence_time_us(
            self.controller.history, legit_keys.values(), attack_start_us,
            self.controller.config.detection_period_us)
        return RunReport(
            scenario=scenario_to_jsonable(scenario),
            flow_totals=self.totals.as_dict(),
            throughput_bin_us=THROUGHPUT_BIN_US,
            throughput_bits={label: self.recorder.series(label).bits.tolist()
                             for label in self.recorder.labels()},
            periods=self.controller.history,
            legit_keys=legit_keys,
            convergence_time_us=convergence,
            attack_offered_mbps=attack_offered,
            gate_violations=self.controller.gate_violations,
            floor_violations=self.controller.floor_violations,
            events=self.loop.trace_lines if self.loop.trace else None,
        )


def run_scenario(scenario: Scenario, trace: bool = False) -> RunReport:
    """Run one scenario to completion; writes output files when the scenario
    names an output directory."""
    report = Simulation(scenario, trace=trace).run()
    if scenario.outputs.dir:
        write_outputs(report, scenario.outputs.dir)
    return report


# -- outputs -----------------------------------------------------------------


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_outputs(report: RunReport, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    _atomic_write(os.path.join(out_dir, "report.json"), report.to_json() + "\n")
    _atomic_write(os.path.join(out_dir, "throughput.csv"), throughput_csv(report))
    _atomic_write(os.path.join(out_dir, "periods.csv"), periods_csv(report))
    if report.events is not None:
        _atomic_write(os.path.join(out_dir, "events.log"),
                      "\n".join(report.events) + "\n")


def throughput_csv(report: RunReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time_s", "flow_label", "mbps"])
    bin_us = report.throughput_bin_us
    for label in report.throughput_bits:
        for index, bits in enumerate(report.throughput_bits[label]):
            writer.writerow([f"{index * bin_us / US_PER_S:.3f}", label,
                             f"{bits / bin_us:.6f}"])
    return buf.getvalue()


def periods_csv(report: RunReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["period_index", "key", "usage", "drops", "loss_rate",
                     "usage_rate", "ulr", "aggregate_loss", "blocked"])
    for record in report.periods:
        blocked = set(record.blocked_after)
        for key, stats in record.stats.items():
            writer.writerow([
                record.index, key, stats.usage, stats.drops,
                f"{stats.loss_rate:.6f}", f"{stats.usage_rate:.6f}",
                f"{stats.ulr:.6f}", f"{record.aggregate_loss:.6f}",
                1 if key in blocked else 0,
            ])
    return buf.getvalue()


# -- sweeps --------------------------------------------------------------------


def run_sweep(template: Scenario, axis: str, start: int, stop: int, step: int,
              out_dir: Optional[str] = None) -> tuple[list[RunReport], list[dict]]:
    """Run one scenario per axis value; returns the reports and the summary
    rows (one per legitimate flow per point)."""
    points = sweep_points(template, axis, start, stop, step)
    values = list(range(start, stop + 1, step))
    reports: list[RunReport] = []
    rows: list[dict] = []
    for value, point in zip(values, points):
        point_dir = None
        if out_dir:
            point_dir = os.path.join(out_dir, f"{axis}-{value}")
            point = _with_out_dir(point, point_dir)
        report = run_scenario(point)
        reports.append(report)
        attack_start = s_us(point.attack.start_s) if point.attack else 0
        for flow in point.legit_flows:
            goodput = mean_goodput_bps(report.series(flow.label),
                                       attack_start, point.duration_us)
            rows.append({
                "axis": axis,
                "value": value,
                "seed": point.seed,
                "flow_label": flow.label,
                "desired_mbps": flow.rate_mbps,
                "mean_goodput_mbps": goodput / 1e6,
                "goodput_frac": goodput / (flow.rate_mbps * 1e6),
                "convergence_s": (None if report.convergence_time_us is None
                                  else report.convergence_time_us / US_PER_S),
            })
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()),
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        _atomic_write(os.path.join(out_dir, "summary.csv"), buf.getvalue())
    return reports, rows


def _with_out_dir(scenario: Scenario, out_dir: str) -> Scenario:
    from dataclasses import replace
    return replace(scenario, outputs=replace(scenario.outputs, dir=out_dir))
