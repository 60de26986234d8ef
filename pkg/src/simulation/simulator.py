"""
Discrete-event simulation of one gated egress port

TS packets are sent exactly in the reserved windows of the gate control
list; BE packets wait in drop-tail queues and are dispatched by a pluggable
policy inside the residual slots between reserved windows.
"""
import json
import logging
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, List, Optional, Set, Tuple, Union

import simpy
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.models.dqs.utility import PortSnapshot, QueueState, UtilityParams
from src.models.flow.flow_model import FlowSet, service_time
from src.models.scheduling.gcl import GateControlList, GclDocument, QueueAssignment, assign_queues, emit_gcl
from src.models.scheduling.nds import ScheduleLimits, compute_static_schedule
from src.simulation.events import EventLog
from src.simulation.metrics import MetricsReport, compute_metrics
from src.simulation.policies import BePolicy, PolicyName, make_policy
from src.simulation.workload import BeArrival, generate_be_trace
from src.utils.exceptions import InvalidSpecError, UnschedulableError

logger = logging.getLogger(__name__)


class ScenarioFile(BaseModel):
    """On-disk scenario document"""
    model_config = ConfigDict(extra="forbid")

    flowset: FlowSet
    policy: PolicyName = PolicyName.DQS
    seed: int
    horizon_ns: Optional[int] = Field(None, gt=0)
    cycles: int = Field(1, ge=1)
    be_load: float = Field(0.0, ge=0.0, le=1.0)
    utility: Optional[UtilityParams] = None
    printed_next_form: bool = False
    gcl: Optional[GclDocument] = None
    be_arrivals: Optional[List[BeArrival]] = None


@dataclass
class Scenario:
    flowset: FlowSet
    gcl: GateControlList
    assignment: QueueAssignment
    policy: PolicyName
    horizon: int
    seed: int
    utility: UtilityParams = field(default_factory=UtilityParams)
    be_arrivals: List[BeArrival] = field(default_factory=list)
    printed_next_form: bool = False

    def __post_init__(self):
        if self.seed is None:
            raise InvalidSpecError("scenario seed is mandatory")
        if self.horizon <= 0 or self.horizon % self.gcl.cycle != 0:
            raise InvalidSpecError(f"horizon {self.horizon} must be a positive multiple of the GCL cycle {self.gcl.cycle}")
        self.be_arrivals = sorted(self.be_arrivals, key=lambda a: (a.time_ns, a.flow_id))
        be_ids = {f.id for f in self.flowset.be_flows}
        for arrival in self.be_arrivals:
            if arrival.flow_id not in be_ids:
                raise InvalidSpecError(f"BE arrival references flow {arrival.flow_id}, which is not a BE flow")


def build_scenario(
    flowset: FlowSet,
    policy: Union[PolicyName, str] = PolicyName.DQS,
    seed: int = 1,
    be_load: float = 0.0,
    cycles: int = 1,
    utility: Optional[UtilityParams] = None,
    limits: Optional[ScheduleLimits] = None,
    gcl: Optional[GateControlList] = None,
    be_arrivals: Optional[List[BeArrival]] = None,
    horizon: Optional[int] = None,
    printed_next_form: bool = False,
) -> Scenario:
    """Schedule the TS flows (unless a GCL is given) and draw the BE trace

    Without explicit utility parameters the DQS queue capacity is the link's
    drop-tail capacity.
    """
    assignment = assign_queues(flowset.flows, flowset.link.queues)
    if gcl is None:
        schedule, verdict = compute_static_schedule(flowset.flows, limits=limits, edge=flowset.link)
        if schedule is None or not verdict.schedulable:
            logger.error(f"Flow set is unschedulable: {[v.kind for v in verdict.violations]}")
            raise UnschedulableError("no valid static schedule for the scenario's TS flows")
        gcl = emit_gcl(schedule, assignment)
    horizon = horizon or cycles * gcl.cycle
    if be_arrivals is None:
        be_arrivals = generate_be_trace(flowset.be_flows, flowset.link.rate_bps, be_load, horizon, seed)
    return Scenario(
        flowset=flowset,
        gcl=gcl,
        assignment=assignment,
        policy=PolicyName(policy),
        horizon=horizon,
        seed=seed,
        utility=utility or UtilityParams(q_max=max(2, flowset.link.max_queue_len)),
        be_arrivals=list(be_arrivals),
        printed_next_form=printed_next_form,
    )


def load_scenario(source: Union[str, Dict[str, Any]], limits: Optional[ScheduleLimits] = None) -> Scenario:
    """Build a Scenario from a JSON file path or a decoded document"""
    if isinstance(source, str):
        if not os.path.isfile(source):
            raise InvalidSpecError(f"scenario file not found: {source}")
        with open(source, "r", encoding="utf-8") as handle:
            source = json.load(handle)
    try:
        document = ScenarioFile.model_validate(source)
    except ValidationError as e:
        logger.error(f"Invalid scenario document: {e.error_count()} error(s)")
        raise InvalidSpecError(str(e)) from e
    return scenario_from_file(document, limits)


def scenario_from_file(document: ScenarioFile, limits: Optional[ScheduleLimits] = None) -> Scenario:
    return build_scenario(
        document.flowset,
        policy=document.policy,
        seed=document.seed,
        be_load=document.be_load,
        cycles=document.cycles,
        utility=document.utility,
        limits=limits,
        gcl=document.gcl.to_gcl() if document.gcl else None,
        be_arrivals=document.be_arrivals,
        horizon=document.horizon_ns,
        printed_next_form=document.printed_next_form,
    )


@dataclass
class _Packet:
    flow_id: int
    index: int
    arrival: int
    ready: int
    service: int
    queue: int


class PortSimulation:
    """simpy model of the port: gate, arrival and transmitter processes"""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.env = simpy.Environment()
        self.log = EventLog()
        self.gcl = scenario.gcl
        self.horizon = scenario.horizon
        self.rate = scenario.flowset.link.rate_bps
        self.q_max = scenario.flowset.link.max_queue_len
        self.assignment = scenario.assignment
        self.be_queues: List[Deque[_Packet]] = [deque() for _ in range(self.assignment.be_queue_count)]
        self.ts_pending: Dict[Tuple[int, int], _Packet] = {}
        self.ts_missed: Set[Tuple[int, int]] = set()
        self.window_packet = self._map_windows()
        self.policy: BePolicy = make_policy(
            scenario.policy,
            self.assignment.be_queue_count,
            scenario.utility,
            scenario.printed_next_form,
        )
        self._wakeup: Optional[simpy.Event] = None

    def _map_windows(self) -> Dict[Tuple[int, int], int]:
        """(flow_id, absolute window start) -> packet index

        Packet 0 takes the first window at or after its emergence, later
        packets the following windows in order.
        """
        mapping = {}
        per_flow: Dict[int, List[int]] = {}
        for w in self.gcl.windows_until(self.horizon):
            per_flow.setdefault(w.flow_id, []).append(w.start)
        for flow in self.scenario.flowset.ts_flows:
            starts = sorted(per_flow.get(flow.id, []))
            first = flow.emergence(0)
            eligible = [s for s in starts if s >= first]
            for n, start in enumerate(eligible):
                mapping[(flow.id, start)] = n
        return mapping

    def _wake(self) -> None:
        if self._wakeup is not None and not self._wakeup.triggered:
            self._wakeup.succeed()

    def _gates(self):
        previous = None
        for k in range(self.horizon // self.gcl.cycle):
            for row in self.gcl.rows:
                at = k * self.gcl.cycle + row.start
                if at > self.env.now:
                    yield self.env.timeout(at - self.env.now)
                if row.gate_mask != previous:
                    self.log.record(at, "gate-change", flow_id=row.flow_id, queue=row.gate_mask)
                    previous = row.gate_mask

    def _ts_arrivals(self):
        packets = []
        for flow in self.scenario.flowset.ts_flows:
            queue = self.assignment.queue_of(flow.id)
            n = 0
            while flow.arrival_ns + n * flow.period < self.horizon:
                packets.append(_Packet(
                    flow.id, n, flow.arrival_ns + n * flow.period, flow.emergence(n), flow.tau, queue,
                ))
                n += 1
        packets.sort(key=lambda p: (p.arrival, p.flow_id, p.index))
        for p in packets:
            if p.arrival > self.env.now:
                yield self.env.timeout(p.arrival - self.env.now)
            self.log.record(p.arrival, "arrival", p.flow_id, p.index, p.queue)
            if (p.flow_id, p.index) in self.ts_missed:
                self.log.record(p.arrival, "drop", p.flow_id, p.index, p.queue)
            else:
                self.ts_pending[(p.flow_id, p.index)] = p

    def _be_arrivals(self):
        counters: Dict[int, int] = {}
        for a in self.scenario.be_arrivals:
            if a.time_ns >= self.horizon:
                break
            if a.time_ns > self.env.now:
                yield self.env.timeout(a.time_ns - self.env.now)
            index = counters.get(a.flow_id, 0)
            counters[a.flow_id] = index + 1
            queue = self.assignment.queue_of(a.flow_id)
            p = _Packet(a.flow_id, index, a.time_ns, a.time_ns, service_time(a.size_bytes, self.rate), queue)
            self.log.record(a.time_ns, "arrival", p.flow_id, p.index, queue)
            if len(self.be_queues[queue]) >= self.q_max:
                self.log.record(a.time_ns, "drop", p.flow_id, p.index, queue)
                continue
            self.be_queues[queue].append(p)
            self.policy.on_arrival(queue, a.time_ns)
            self._wake()

    def _snapshot(self, now: int) -> PortSnapshot:
        mask = self.gcl.row_at(now).gate_mask
        queues = []
        for i, q in enumerate(self.be_queues):
            head = q[0] if q else None
            queues.append(QueueState(
                index=i,
                length=len(q),
                head_service=head.service if head else 0,
                gate_open=bool(mask >> i & 1),
                head_arrival=head.arrival if head else None,
            ))
        return PortSnapshot(queues=queues, time=now)

    def _transmit(self, p: _Packet):
        now = self.env.now
        self.log.record(now, "tx-start", p.flow_id, p.index, p.queue)
        # Logged up front so a transmission ending exactly at the horizon is kept
        self.log.record(now + p.service, "tx-end", p.flow_id, p.index, p.queue)
        yield self.env.timeout(p.service)

    def _serve_window(self, window):
        now = self.env.now
        index = self.window_packet.get((window.flow_id, window.start))
        key = (window.flow_id, index)
        packet = self.ts_pending.get(key) if index is not None else None
        if now == window.start and index is not None:
            if packet is not None and packet.ready <= now:
                del self.ts_pending[key]
                yield from self._transmit(packet)
            else:
                queue = self.assignment.queue_of(window.flow_id)
                logger.warning(f"Flow {window.flow_id} packet {index} not ready for its window at {now}")
                self.log.record(now, "miss", window.flow_id, index, queue)
                if packet is not None:
                    del self.ts_pending[key]
                    self.log.record(now, "drop", window.flow_id, index, queue)
                else:
                    self.ts_missed.add(key)
        if window.end > self.env.now:
            yield self.env.timeout(window.end - self.env.now)

    def _port(self):
        env = self.env
        while env.now < self.horizon:
            # Let arrivals and gate changes of this instant land first
            yield env.timeout(0)
            now = env.now
            window = self.gcl.window_at(now)
            if window is not None:
                if window.end > self.horizon:
                    break
                yield from self._serve_window(window)
                continue

            upcoming = self.gcl.next_reserved_start(now)
            limit = self.horizon if upcoming is None else min(upcoming, self.horizon)
            residual = limit - now
            choice = self.policy.select(self._snapshot(now), residual)
            if choice is None:
                self._wakeup = env.event()
                yield env.any_of([self._wakeup, env.timeout(residual)])
                self._wakeup = None
                continue
            yield from self._transmit(self.be_queues[choice].popleft())

    def queued_by_flow(self) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for q in self.be_queues:
            for p in q:
                counts[p.flow_id] = counts.get(p.flow_id, 0) + 1
        for fid, _ in self.ts_pending:
            counts[fid] = counts.get(fid, 0) + 1
        return counts

    def run(self) -> EventLog:
        self.env.process(self._gates())
        self.env.process(self._ts_arrivals())
        self.env.process(self._be_arrivals())
        self.env.process(self._port())
        self.env.run(until=self.horizon)
        return self.log.finalize()


def run_simulation(scenario: Scenario) -> Tuple[EventLog, MetricsReport]:
    simulation = PortSimulation(scenario)
    log = simulation.run()
    report = compute_metrics(log, scenario, queued_at_end=simulation.queued_by_flow())
    logger.info(
        f"Simulated {scenario.horizon} ns with {scenario.policy.value}: "
        f"utilization {report.utilization:.3f}, drops {report.totals()['dropped']}"
    )
    return log, report
