"""
Delay, jitter, utilization and accounting metrics of a simulation run
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Any, Dict, List, Optional

import numpy as np

from src.simulation.events import EventLog
from src.utils.utils import write_csv, write_json

if TYPE_CHECKING:
    from src.simulation.simulator import Scenario

logger = logging.getLogger(__name__)

FLOW_CSV_HEADER = [
    "flow_id", "class", "arrived", "transmitted", "dropped", "queued", "misses",
    "delay_min_ns", "delay_max_ns", "delay_mean_ns", "jitter_ns",
    "wait_min_ns", "wait_max_ns", "wait_mean_ns",
]


@dataclass
class FlowMetrics:
    flow_id: int
    flow_class: str
    arrived: int = 0
    transmitted: int = 0
    dropped: int = 0
    queued: int = 0
    misses: int = 0
    delay_min: Optional[int] = None
    delay_max: Optional[int] = None
    delay_mean: Optional[float] = None
    jitter: Optional[int] = None
    wait_min: Optional[int] = None
    wait_max: Optional[int] = None
    wait_mean: Optional[float] = None

    @property
    def conserved(self) -> bool:
        return self.arrived == self.transmitted + self.queued + self.dropped

    def to_row(self) -> List[Any]:
        return [
            self.flow_id, self.flow_class, self.arrived, self.transmitted, self.dropped,
            self.queued, self.misses, self.delay_min, self.delay_max, self.delay_mean,
            self.jitter, self.wait_min, self.wait_max, self.wait_mean,
        ]


@dataclass
class MetricsReport:
    horizon: int
    policy: str
    utilization: float = 0.0
    ts_utilization: float = 0.0
    be_utilization: float = 0.0
    flows: Dict[int, FlowMetrics] = field(default_factory=dict)
    drops_per_queue: Dict[int, int] = field(default_factory=dict)

    @property
    def conservation_ok(self) -> bool:
        return all(m.conserved for m in self.flows.values())

    def totals(self) -> Dict[str, int]:
        keys = ("arrived", "transmitted", "dropped", "queued", "misses")
        return {k: sum(getattr(m, k) for m in self.flows.values()) for k in keys}

    def class_flows(self, flow_class: str) -> List[FlowMetrics]:
        return [m for m in self.flows.values() if m.flow_class == flow_class]

    def max_jitter(self, flow_class: str = "TS") -> int:
        values = [m.jitter for m in self.class_flows(flow_class) if m.jitter is not None]
        return max(values) if values else 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "horizon_ns": self.horizon,
            "policy": self.policy,
            "utilization": self.utilization,
            "ts_utilization": self.ts_utilization,
            "be_utilization": self.be_utilization,
            "conservation_ok": self.conservation_ok,
            "totals": self.totals(),
            "drops_per_queue": {str(q): n for q, n in sorted(self.drops_per_queue.items())},
            "flows": [asdict(m) for _, m in sorted(self.flows.items())],
        }

    def write_json(self, path: str) -> None:
        write_json(path, self.to_dict())

    def write_csv(self, path: str) -> int:
        return write_csv(path, FLOW_CSV_HEADER, (m.to_row() for _, m in sorted(self.flows.items())))


def _stats(values: List[int]):
    if not values:
        return None, None, None
    data = np.asarray(values, dtype=np.int64)
    return int(data.min()), int(data.max()), float(data.mean())


def summarize_log(
    log: EventLog,
    horizon: int,
    flow_classes: Dict[int, str],
    policy: str = "",
    queued_at_end: Optional[Dict[int, int]] = None,
) -> MetricsReport:
    """Per-flow delay (tx-end minus arrival), jitter and accounting, plus utilization

    queued_at_end, when given, is the simulator's own count of packets still
    queued; otherwise it is derived from the log.
    """
    report = MetricsReport(horizon=horizon, policy=policy)
    for fid, cls in flow_classes.items():
        report.flows[fid] = FlowMetrics(flow_id=fid, flow_class=cls)

    def metrics_for(fid: int) -> FlowMetrics:
        if fid not in report.flows:
            report.flows[fid] = FlowMetrics(flow_id=fid, flow_class=flow_classes.get(fid, "BE"))
        return report.flows[fid]

    arrivals: Dict[tuple, int] = {}
    starts: Dict[tuple, int] = {}
    delays: Dict[int, List[int]] = {}
    waits: Dict[int, List[int]] = {}
    busy = {"TS": 0, "BE": 0}

    for e in log:
        key = (e.flow_id, e.packet_index)
        if e.kind == "arrival":
            arrivals[key] = e.time
            metrics_for(e.flow_id).arrived += 1
        elif e.kind == "drop":
            metrics_for(e.flow_id).dropped += 1
            if e.queue is not None:
                report.drops_per_queue[e.queue] = report.drops_per_queue.get(e.queue, 0) + 1
        elif e.kind == "miss":
            metrics_for(e.flow_id).misses += 1
        elif e.kind == "tx-start":
            starts[key] = e.time
        elif e.kind == "tx-end":
            m = metrics_for(e.flow_id)
            m.transmitted += 1
            start = starts.get(key, e.time)
            busy[m.flow_class] = busy.get(m.flow_class, 0) + e.time - start
            if key in arrivals:
                delays.setdefault(e.flow_id, []).append(e.time - arrivals[key])
                waits.setdefault(e.flow_id, []).append(start - arrivals[key])

    for fid, m in report.flows.items():
        m.delay_min, m.delay_max, m.delay_mean = _stats(delays.get(fid, []))
        m.jitter = None if m.delay_min is None else m.delay_max - m.delay_min
        m.wait_min, m.wait_max, m.wait_mean = _stats(waits.get(fid, []))
        if queued_at_end is not None:
            m.queued = queued_at_end.get(fid, 0)
        else:
            m.queued = m.arrived - m.transmitted - m.dropped

    if horizon > 0:
        report.ts_utilization = busy["TS"] / horizon
        report.be_utilization = busy["BE"] / horizon
        report.utilization = report.ts_utilization + report.be_utilization

    if not report.conservation_ok:
        broken = [fid for fid, m in report.flows.items() if not m.conserved]
        logger.error(f"Packet accounting does not balance for flows {broken}")
    return report


def compute_metrics(
    log: EventLog,
    scenario: "Scenario",
    queued_at_end: Optional[Dict[int, int]] = None,
) -> MetricsReport:
    classes = {f.id: f.flow_class for f in scenario.flowset.flows}
    policy = getattr(scenario.policy, "value", scenario.policy)
    return summarize_log(log, scenario.horizon, classes, policy, queued_at_end)
