"""Command line harness: run a scenario file, run a named preset, or sweep
a preset along an axis."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .engine import US_PER_S, s_us
from .metrics import RunReport, mean_goodput_bps
from .runner import SimulationInvariantError, run_scenario, run_sweep
from .scenario import (PRESET_NAMES, Scenario, ScenarioError, build_preset,
                       load_scenario)


def _print_summary(scenario: Scenario, report: RunReport) -> None:
    attack_start = s_us(scenario.attack.start_s) if scenario.attack else 0
    for flow in scenario.legit_flows:
        goodput = mean_goodput_bps(report.series(flow.label), attack_start,
                                   scenario.duration_us) / 1e6
        print(f"{flow.label}: mean goodput {goodput:.3f} Mbps "
              f"(desired {flow.rate_mbps:.3f})")
    if scenario.benign_periodic is not None:
        goodput = mean_goodput_bps(report.series("benign"), 0,
                                   scenario.duration_us) / 1e6
        print(f"benign: mean goodput {goodput:.3f} Mbps")
    if report.attack_offered_mbps is not None:
        print(f"attack offered (measured): {report.attack_offered_mbps:.3f} Mbps")
    if scenario.attack is not None:
        if report.convergence_time_us is None:
            print("convergence: none within the run")
        else:
            print(f"convergence: t={report.convergence_time_us / US_PER_S:.1f} s "
                  f"({(report.convergence_time_us - attack_start) / US_PER_S:.1f} s "
                  f"after attack start)")
    if scenario.outputs.dir:
        print(f"outputs written to {scenario.outputs.dir}")


def _add_preset_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--attackers", type=int, default=None,
                        help="number of attacking subflows / attackers")
    parser.add_argument("--rate", type=float, default=None, metavar="MBPS",
                        help="aggregate attack rate in Mbps")
    parser.add_argument("--flows", type=int, default=None,
                        help="number of legitimate flows, where the preset varies it")
    parser.add_argument("--defense", choices=("on", "off"), default=None)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--events-log", action="store_true",
                        help="also write the per-event trace")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="accflow",
        description="Dumbbell-network simulator with the AccFlow defense")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario file")
    run_p.add_argument("scenario", help="path to a scenario JSON file")
    run_p.add_argument("--out", default=None, help="override the output directory")

    preset_p = sub.add_parser("preset", help="run a named experiment preset")
    preset_p.add_argument("name", choices=PRESET_NAMES)
    _add_preset_options(preset_p)

    sweep_p = sub.add_parser("sweep", help="sweep a preset along one axis")
    sweep_p.add_argument("name", choices=PRESET_NAMES)
    sweep_p.add_argument("--axis", choices=("attackers", "rate"), required=True)
    sweep_p.add_argument("--from", dest="start", type=int, required=True)
    sweep_p.add_argument("--to", dest="stop", type=int, required=True)
    sweep_p.add_argument("--step", type=int, default=1)
    _add_preset_options(sweep_p)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            scenario = load_scenario(args.scenario)
            if args.out:
                scenario = replace(scenario,
                                   outputs=replace(scenario.outputs, dir=args.out))
            report = run_scenario(scenario)
            _print_summary(scenario, report)
        elif args.command == "preset":
            scenario = build_preset(
                args.name, attackers=args.attackers, rate_mbps=args.rate,
                flows=args.flows,
                defense_on=None if args.defense is None else args.defense == "on",
                seed=args.seed, out_dir=args.out, events_log=args.events_log)
            report = run_scenario(scenario)
            _print_summary(scenario, report)
        else:
            template = build_preset(
                args.name, attackers=args.attackers, rate_mbps=args.rate,
                flows=args.flows,
                defense_on=None if args.defense is None else args.defense == "on",
                seed=args.seed, events_log=args.events_log)
            _reports, rows = run_sweep(template, args.axis, args.start,
                                       args.stop, args.step, out_dir=args.out)
            # One line per sweep point: worst-off legitimate flow.
            by_value: dict[int, list[dict]] = {}
            for row in rows:
                by_value.setdefault(row["value"], []).append(row)
            for value, group in by_value.items():
                worst = min(group, key=lambda r: r["goodput_frac"])
                conv = ("-" if worst["convergence_s"] is None
                        else f"{worst['convergence_s']:.1f}s")
                print(f"{args.axis}={value}: min goodput "
                      f"{worst['goodput_frac'] * 100:.1f}% of desired "
                      f"({worst['flow_label']}), convergence {conv}")
            if args.out:
                print(f"outputs written to {args.out}")
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except SimulationInvariantError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
