"""Delay-controlled congestion control on a simulated bottleneck.

Public surface: congestion controllers (delay-control, westwood+, newreno,
cubic), the deterministic single-bottleneck simulator, per-flow metrics, and
the scenario runner behind the dcc-sim command.
"""

from .cc import (
    CONTROLLER_NAMES,
    CongestionController,
    Cubic,
    DelayControl,
    NewReno,
    WestwoodPlus,
    make_controller,
)
from .metrics import (
    AggregateReport,
    FlowReport,
    FlowTrace,
    aggregate_report,
    flow_report,
    jain_index,
    quantile,
    rtt_cdf,
)
from .netsim import BottleneckQueue, ClockModel, EventLoop, LinkModel
from .presets import PRESETS, get_preset, preset_names
from .runner import ScenarioReport, emit_report, run_once, run_scenario, sweep
from .scenario import ConfigError, Scenario, emit_scenario, load_scenario, parse_scenario
from .simulation import RunResult, Simulation, trace_digest
from .transport import AckFrame, DataPacket, ReceiverEndpoint, SenderEndpoint

__version__ = "0.1.0"
