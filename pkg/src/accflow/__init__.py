"""Deterministic dumbbell-network simulator and AccFlow defense library.

The library half simulates application-limited TCP flows, on-off and
constant-rate flooders, short-selfish-flow spawners, and a periodic benign
flow through a finite drop-tail bottleneck. The defense half keeps
per-detection-period flow statistics and applies Uniform Loss Rate
detection, Early Drop, and source-address flow aggregation at the router.
"""

from .defense import (AccFlowController, DefenseConfig, FlowKeyMode, FlowStats,
                      PeriodSnapshot, aggregate_key, aggressive_detect,
                      early_drop_decision, uniform_loss_rate)
from .engine import (CancelResult, Event, EventHandle, EventKind, EventLoop,
                     RngStream, SchedulingError)
from .fabric import (AdmitOutcome, BottleneckRouter, Link, Packet,
                     PACKET_BYTES, serialization_us)
from .metrics import (RunReport, ThroughputSeries, convergence_time,
                      mean_goodput_bps, recount_flow_stats, recount_throughput)
from .runner import Simulation, run_scenario, run_sweep, write_outputs
from .scenario import (Scenario, ScenarioError, build_preset, load_scenario,
                       save_scenario, scenario_from_jsonable,
                       scenario_to_jsonable, sweep_points, PRESET_NAMES)
from .sources import (AttackKind, AttackProfile, PeriodicBenignProfile,
                      SstfProfile, SstfSpawner, TcpSender,
                      constant_rate_emission, squarewave_next_emission)
from .tcp import TcpConfig, TcpPhase, TcpState, apply_ack, apply_timeout

__version__ = "0.1.0"
