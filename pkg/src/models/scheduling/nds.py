"""
Non-collision deterministic scheduling (NDS)

Computes a static transmission schedule for the TS flows of one egress port.
The ideal path assigns one constant offset per flow so that no two windows
ever collide; when the flows are not combinable as a whole they are
partitioned, each subset gets ideal offsets, and the remaining conflicts are
eliminated packet by packet within the jitter and delay budgets.
"""
import bisect
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Sequence, Set, Tuple

from src.models.combinability.analyzer import (
    Window,
    find_window_conflicts,
    predict_conflicting_packets,
)
from src.models.combinability.diophantine import gcd_periods, hyperperiod
from src.models.flow.flow_model import EdgeSpec, Flow, flow_bandwidth_exact
from src.utils.config import Settings, get_settings
from src.utils.exceptions import (
    HyperperiodOverflowError,
    InvalidSpecError,
    PreconditionError,
    RelaxationExhaustedError,
    ScheduleTimeoutError,
)
from src.utils.utils import nonneg_mod, write_csv, write_json

logger = logging.getLogger(__name__)

SCHEDULE_CSV_HEADER = ["flow_id", "packet_index", "start_ns", "end_ns"]

# How many placements happen between two wall-clock checks
_TIMEOUT_CHECK_EVERY = 256


@dataclass(frozen=True)
class JitterConstraintSet:
    """Per-flow delay and jitter bounds (the constraint set C)"""
    delay_bounds: Dict[int, int]
    jitter_bounds: Dict[int, int]

    def __post_init__(self):
        for fid, bound in itertools.chain(self.delay_bounds.items(), self.jitter_bounds.items()):
            if bound < 0:
                raise InvalidSpecError(f"flow {fid}: bounds must be non-negative")
        for fid, jitter in self.jitter_bounds.items():
            if fid in self.delay_bounds and jitter > self.delay_bounds[fid]:
                raise InvalidSpecError(f"flow {fid}: jitter bound {jitter} exceeds delay bound {self.delay_bounds[fid]}")

    @classmethod
    def from_flows(cls, flows: Sequence[Flow]) -> "JitterConstraintSet":
        return cls(
            delay_bounds={f.id: f.delay_bound for f in flows},
            jitter_bounds={f.id: f.jitter_bound_ns for f in flows},
        )

    def delay_bound(self, flow: Flow) -> int:
        return self.delay_bounds.get(flow.id, flow.delay_bound)

    def jitter_bound(self, flow: Flow) -> int:
        return self.jitter_bounds.get(flow.id, flow.jitter_bound_ns)


@dataclass(frozen=True)
class ScheduleLimits:
    hyperperiod_cap: int = 10**10
    timeout_s: float = 10.0
    max_table_packets: int = 2_000_000

    @classmethod
    def from_settings(cls, settings: Optional[Settings] = None) -> "ScheduleLimits":
        settings = settings or get_settings()
        return cls(
            hyperperiod_cap=settings.hyperperiod_cap,
            timeout_s=settings.schedule_timeout_s,
            max_table_packets=settings.max_table_packets,
        )


class ScheduleMode(str, Enum):
    IDEAL = "IdealOffsets"
    RELAXED = "PerPacketTable"


@dataclass(frozen=True, order=True)
class PacketSlot:
    """Window [start, end) of packet n of a flow, in absolute ns"""
    start: int
    end: int
    flow_id: int
    packet_index: int

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass
class Schedule:
    mode: ScheduleMode
    hyperperiod: int
    offsets: Dict[int, int]
    periods: Dict[int, int]
    service: Dict[int, int]
    packets: List[PacketSlot] = field(default_factory=list)

    def packet_slots(self) -> Iterator[PacketSlot]:
        """Every packet window of one hyperperiod, absolute times"""
        if self.mode == ScheduleMode.RELAXED:
            yield from self.packets
            return
        for fid, offset in self.offsets.items():
            period, tau = self.periods[fid], self.service[fid]
            for n in range(self.hyperperiod // period):
                start = offset + n * period
                yield PacketSlot(start, start + tau, fid, n)

    def windows(self) -> List[Window]:
        """Packet windows with starts folded into [0, hyperperiod)"""
        windows = []
        for slot in self.packet_slots():
            start = slot.start % self.hyperperiod
            windows.append(Window(start, start + slot.length, slot.flow_id, slot.packet_index))
        windows.sort(key=lambda w: (w.start, w.flow_id, w.packet_index))
        return windows

    def reserved_time(self) -> int:
        return sum(slot.length for slot in self.packet_slots())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode.value,
            "hyperperiod_ns": self.hyperperiod,
            "offsets": {str(fid): o for fid, o in sorted(self.offsets.items())},
            "packets": len(self.packets) if self.mode == ScheduleMode.RELAXED else sum(
                self.hyperperiod // p for p in self.periods.values()
            ),
        }

    def write_csv(self, path: str) -> int:
        rows = (
            [s.flow_id, s.packet_index, s.start, s.end]
            for s in sorted(self.packet_slots(), key=lambda s: (s.flow_id, s.packet_index))
        )
        return write_csv(path, SCHEDULE_CSV_HEADER, rows)


@dataclass(frozen=True)
class Violation:
    kind: str  # overlap | deadline | jitter | bandwidth | timeout | relaxation
    detail: str
    flow_ids: Tuple[int, ...] = ()
    packet_index: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "detail": self.detail,
            "flow_ids": list(self.flow_ids),
            "packet_index": self.packet_index,
        }


@dataclass
class ScheduleVerdict:
    schedulable: bool
    unsolved: int = 0
    violations: List[Violation] = field(default_factory=list)
    mode: Optional[ScheduleMode] = None
    synthesis_s: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schedulable": self.schedulable,
            "unsolved": self.unsolved,
            "mode": self.mode.value if self.mode else None,
            "synthesis_s": self.synthesis_s,
            "violations": [v.to_dict() for v in self.violations],
        }

    def write_json(self, path: str) -> None:
        write_json(path, self.to_dict())


def admission_check(flows: Sequence[Flow], edge: EdgeSpec) -> bool:
    """True iff the summed TS bandwidth fits the link (equality admitted)"""
    total = sum((flow_bandwidth_exact(f) for f in flows if f.is_ts), Fraction(0))
    admitted = total <= edge.rate_bps
    if not admitted:
        logger.info(f"Admission rejected: {float(total):.0f} bit/s requested on a {edge.rate_bps} bit/s link")
    return admitted


def _processing_order(flows: Sequence[Flow]) -> List[Flow]:
    return sorted(flows, key=lambda f: (f.period, -f.tau, f.id))


def _spacing_jump(d: int, g: int, tau_i: int, tau_j: int) -> int:
    """Smallest increment moving d = (o_i - o_j) mod g into [tau_j, g - tau_i]"""
    if d < tau_j:
        return tau_j - d
    if d > g - tau_i:
        return g - d + tau_j
    return 0


def nonconflict_offsets(
    flows: Sequence[Flow],
    constraints: Optional[JitterConstraintSet] = None,
    order: Optional[Sequence[int]] = None,
    obstacles: Sequence[Tuple[Flow, int]] = (),
) -> Tuple[Dict[int, int], int]:
    """Assign collision-free offsets to a combinable set of TS flows

    Flows are taken in order; each is pushed later from its emergence time by
    the minimal amount that restores the modular spacing against every other
    flow at its current offset. Returns (offsets by flow id, S) where S = 1
    flags a flow whose delay budget ran out or for which no phase was free.

    obstacles are windows fixed by other subsets; they are only avoided where
    the pair could be spaced at all (tau_i + tau_j <= gcd of the two periods).
    """
    if not flows:
        return {}, 0
    g = gcd_periods(f.period for f in flows)
    total = sum(f.tau for f in flows)
    if g <= 1 or total >= g:
        logger.error(f"Offset search needs g > 1 and sum of service times below g (g={g}, sum={total})")
        raise PreconditionError(f"flows are not combinable: g={g}, sum of service times={total}")

    constraints = constraints or JitterConstraintSet.from_flows(flows)
    if order is not None:
        by_id = {f.id: f for f in flows}
        if sorted(order) != sorted(by_id):
            raise InvalidSpecError("processing order must list every flow id exactly once")
        ordered = [by_id[fid] for fid in order]
    else:
        ordered = _processing_order(flows)

    # Every flow starts at its emergence time; flows not yet processed are
    # avoided at that position and move themselves later.
    offsets = {f.id: f.emergence(0) for f in ordered}
    unsolved = 0
    for flow in ordered:
        others = [(other, offsets[other.id]) for other in ordered if other.id != flow.id]
        emergence = flow.emergence(0)
        o = emergence
        found = True
        while True:
            if o - emergence >= g:
                found = False
                break
            jump = 0
            for other, o_other in others:
                jump = _spacing_jump(nonneg_mod(o - o_other, g), g, flow.tau, other.tau)
                if jump:
                    break
            if not jump:
                for other, o_other in obstacles:
                    pair_g = math.gcd(flow.period, other.period)
                    if flow.tau + other.tau > pair_g:
                        continue
                    jump = _spacing_jump(nonneg_mod(o - o_other, pair_g), pair_g, flow.tau, other.tau)
                    if jump:
                        break
            if not jump:
                break
            o += jump

        if not found:
            logger.warning(f"No free phase for flow {flow.id} within one g-cycle")
            unsolved = 1
            o = emergence
        elif o - emergence > constraints.delay_bound(flow):
            logger.warning(f"Flow {flow.id}: offset delay {o - emergence} exceeds its bound {constraints.delay_bound(flow)}")
            unsolved = 1
        offsets[flow.id] = o

    logger.debug(f"Offsets for {len(flows)} flows (g={g}): {offsets}, S={unsolved}")
    return offsets, unsolved


def partition_flowset(flows: Sequence[Flow]) -> List[List[Flow]]:
    """Greedy split into combinable subsets plus singletons

    Seeds each subset with the largest class of flows whose periods share a
    factor g > 1 (ties go to the larger g) and admits members first-fit while
    the service times stay below g. A class that cannot seat two flows gives
    way to the next one.
    """
    remaining = _processing_order(flows)
    subsets = []
    while len(remaining) >= 2:
        candidates = {
            math.gcd(a.period, b.period)
            for a, b in itertools.combinations(remaining, 2)
        }
        candidates.discard(1)
        classes = sorted(
            ((g, [f for f in remaining if f.period % g == 0]) for g in candidates),
            key=lambda c: (-len(c[1]), -c[0]),
        )
        subset = []
        for g, members in classes:
            subset, total = [], 0
            for f in members:
                if total + f.tau < g:
                    subset.append(f)
                    total += f.tau
            if len(subset) >= 2:
                break
        # No class seats two flows: everything left is a singleton
        if len(subset) < 2:
            break
        subsets.append(subset)
        taken = {f.id for f in subset}
        remaining = [f for f in remaining if f.id not in taken]

    subsets.extend([f] for f in remaining)
    logger.debug(f"Partitioned {len(flows)} flows into {len(subsets)} subsets")
    return subsets


class _CircularTimeline:
    """Occupied intervals on [0, cycle), kept sorted and disjoint"""

    def __init__(self, cycle: int):
        self.cycle = cycle
        self.intervals: List[Tuple[int, int]] = []

    def _segments(self, start: int, length: int) -> List[Tuple[int, int]]:
        pos = start % self.cycle
        if pos + length <= self.cycle:
            return [(pos, pos + length)]
        return [(pos, self.cycle), (0, pos + length - self.cycle)]

    def add(self, start: int, length: int) -> None:
        for segment in self._segments(start, length):
            bisect.insort(self.intervals, segment)

    def load(self, slots: Sequence[PacketSlot]) -> None:
        for slot in slots:
            self.intervals.extend(self._segments(slot.start, slot.length))
        self.intervals.sort()

    def _blocking_end(self, a: int, b: int) -> Optional[int]:
        i = bisect.bisect_right(self.intervals, (a, math.inf)) - 1
        if i >= 0 and self.intervals[i][1] > a:
            return self.intervals[i][1]
        if i + 1 < len(self.intervals) and self.intervals[i + 1][0] < b:
            return self.intervals[i + 1][1]
        return None

    def earliest_fit(self, start: int, length: int) -> Optional[int]:
        """Earliest absolute time >= start where length ticks are free"""
        advanced = 0
        while advanced < self.cycle:
            pos = (start + advanced) % self.cycle
            first = min(pos + length, self.cycle)
            end = self._blocking_end(pos, first)
            if end is not None:
                advanced += end - pos
                continue
            if pos + length > self.cycle:
                end = self._blocking_end(0, pos + length - self.cycle)
                if end is not None:
                    advanced += self.cycle - pos + end
                    continue
            return start + advanced
        return None


def eliminate_conflicts(
    packets: Sequence[PacketSlot],
    flows: Sequence[Flow],
    cycle: int,
    constraints: Optional[JitterConstraintSet] = None,
    conflicting: Optional[Set[Tuple[int, int]]] = None,
    deadline: Optional[float] = None,
) -> List[PacketSlot]:
    """Shift conflicting packets later until the table is collision free

    Packets outside the conflicting set keep their windows. The others are
    placed earliest-deadline-first at the earliest free start at or after
    their ideal start; a packet whose start would pass min(ideal + jitter
    bound, emergence + delay bound) exhausts the relaxation.
    """
    constraints = constraints or JitterConstraintSet.from_flows(flows)
    by_id = {f.id: f for f in flows}
    if conflicting is None:
        windows = [Window(p.start % cycle, p.start % cycle + p.length, p.flow_id, p.packet_index) for p in packets]
        conflicting = set()
        for entry in find_window_conflicts(windows, cycle=cycle):
            conflicting.update(zip(entry.flow_ids, entry.packet_indices))
    if not conflicting:
        return list(packets)

    fixed = [p for p in packets if (p.flow_id, p.packet_index) not in conflicting]
    moving = [p for p in packets if (p.flow_id, p.packet_index) in conflicting]

    def latest_start(p: PacketSlot) -> int:
        flow = by_id[p.flow_id]
        emergence = flow.emergence(p.packet_index)
        return min(p.start + constraints.jitter_bound(flow), emergence + constraints.delay_bound(flow))

    moving.sort(key=lambda p: (latest_start(p), by_id[p.flow_id].priority, p.flow_id, p.packet_index))

    timeline = _CircularTimeline(cycle)
    timeline.load(fixed)
    placed = list(fixed)
    shifted = 0
    for count, p in enumerate(moving):
        if deadline is not None and count % _TIMEOUT_CHECK_EVERY == 0 and time.monotonic() > deadline:
            logger.error(f"Conflict elimination timed out after {count} of {len(moving)} packets")
            raise ScheduleTimeoutError("conflict elimination exceeded its time limit")
        start = timeline.earliest_fit(p.start, p.length)
        latest = latest_start(p)
        if start is None or start > latest:
            logger.error(f"Packet {p.packet_index} of flow {p.flow_id} cannot be placed by {latest}")
            raise RelaxationExhaustedError(
                f"flow {p.flow_id} packet {p.packet_index} would move past its jitter or delay budget",
                flow_id=p.flow_id,
                packet_index=p.packet_index,
            )
        timeline.add(start, p.length)
        if start != p.start:
            shifted += 1
        placed.append(PacketSlot(start, start + p.length, p.flow_id, p.packet_index))

    logger.info(f"Eliminated conflicts: {len(moving)} conflicting packets, {shifted} shifted")
    placed.sort(key=lambda s: (s.flow_id, s.packet_index))
    return placed


def verify_schedule(
    schedule: Schedule,
    flows: Sequence[Flow],
    constraints: Optional[JitterConstraintSet] = None,
    edge: Optional[EdgeSpec] = None,
) -> ScheduleVerdict:
    """Independent check of overlaps, delay bounds, jitter bounds and bandwidth"""
    ts = [f for f in flows if f.is_ts]
    constraints = constraints or JitterConstraintSet.from_flows(ts)
    by_id = {f.id: f for f in ts}
    violations = []

    for entry in find_window_conflicts(schedule.windows(), cycle=schedule.hyperperiod):
        violations.append(Violation(
            kind="overlap",
            detail=f"{entry.kind.value} at {entry.time_start}",
            flow_ids=entry.flow_ids,
            packet_index=entry.packet_indices[0],
        ))

    delays: Dict[int, List[int]] = {}
    for slot in schedule.packet_slots():
        flow = by_id.get(slot.flow_id)
        if flow is None:
            violations.append(Violation(kind="deadline", detail="window for an unknown flow", flow_ids=(slot.flow_id,)))
            continue
        delay = slot.start - flow.emergence(slot.packet_index)
        delays.setdefault(flow.id, []).append(delay)
        if delay < 0:
            violations.append(Violation(
                kind="deadline",
                detail=f"window starts {-delay} ns before the packet emerges",
                flow_ids=(flow.id,),
                packet_index=slot.packet_index,
            ))
        elif delay > constraints.delay_bound(flow):
            violations.append(Violation(
                kind="deadline",
                detail=f"delay {delay} exceeds bound {constraints.delay_bound(flow)}",
                flow_ids=(flow.id,),
                packet_index=slot.packet_index,
            ))

    for fid, values in sorted(delays.items()):
        jitter = max(values) - min(values)
        if jitter > constraints.jitter_bound(by_id[fid]):
            violations.append(Violation(
                kind="jitter",
                detail=f"jitter {jitter} exceeds bound {constraints.jitter_bound(by_id[fid])}",
                flow_ids=(fid,),
            ))

    if edge is not None and not admission_check(ts, edge):
        violations.append(Violation(kind="bandwidth", detail="summed TS bandwidth exceeds the link rate"))

    return ScheduleVerdict(schedulable=not violations, violations=violations, mode=schedule.mode)


def _ideal_schedule(ts: Sequence[Flow], offsets: Dict[int, int], cycle: int, mode: ScheduleMode) -> Schedule:
    return Schedule(
        mode=mode,
        hyperperiod=cycle,
        offsets=dict(offsets),
        periods={f.id: f.period for f in ts},
        service={f.id: f.tau for f in ts},
    )


def _subset_offsets(
    subsets: List[List[Flow]],
    constraints: JitterConstraintSet,
    deadline: float,
) -> Dict[int, int]:
    offsets: Dict[int, int] = {}
    obstacles: List[Tuple[Flow, int]] = []
    for subset in subsets:
        if time.monotonic() > deadline:
            raise ScheduleTimeoutError("subset offset search exceeded its time limit")
        try:
            found, unsolved = nonconflict_offsets(subset, constraints, obstacles=obstacles)
            if unsolved:
                found, unsolved = nonconflict_offsets(subset, constraints)
        except PreconditionError:
            found, unsolved = {}, 1
        if unsolved:
            found = {f.id: f.emergence(0) for f in subset}
        offsets.update(found)
        obstacles.extend((f, found[f.id]) for f in subset)
    return offsets


def compute_static_schedule(
    flows: Sequence[Flow],
    constraints: Optional[JitterConstraintSet] = None,
    limits: Optional[ScheduleLimits] = None,
    edge: Optional[EdgeSpec] = None,
) -> Tuple[Optional[Schedule], ScheduleVerdict]:
    """Static schedule of the TS flows, or None with an unschedulable verdict

    Raises HyperperiodOverflowError when the hyperperiod or the packet table
    exceeds the limits.
    """
    began = time.monotonic()
    limits = limits or ScheduleLimits.from_settings()
    ts = [f for f in flows if f.is_ts]
    constraints = constraints or JitterConstraintSet.from_flows(ts)

    def finish(schedule: Optional[Schedule], verdict: ScheduleVerdict):
        verdict.synthesis_s = time.monotonic() - began
        return schedule, verdict

    if not ts:
        empty = Schedule(mode=ScheduleMode.IDEAL, hyperperiod=get_settings().default_cycle_ns, offsets={}, periods={}, service={})
        return finish(empty, ScheduleVerdict(schedulable=True, mode=ScheduleMode.IDEAL))

    if edge is not None and not admission_check(ts, edge):
        return finish(None, ScheduleVerdict(
            schedulable=False,
            violations=[Violation(kind="bandwidth", detail="summed TS bandwidth exceeds the link rate")],
        ))

    cycle = hyperperiod((f.period for f in ts), cap=limits.hyperperiod_cap)
    g = gcd_periods(f.period for f in ts)
    total = sum(f.tau for f in ts)
    logger.info(f"Scheduling {len(ts)} TS flows: g={g}, sum of service times={total}, hyperperiod={cycle}")

    if g > 1 and total <= g:
        try:
            offsets, unsolved = nonconflict_offsets(ts, constraints)
        except PreconditionError:
            logger.info("Ideal offsets need strict spacing; falling back to partitioned scheduling")
        else:
            if not unsolved:
                schedule = _ideal_schedule(ts, offsets, cycle, ScheduleMode.IDEAL)
                return finish(schedule, verify_schedule(schedule, ts, constraints, edge))
            logger.info("No free phase or delay budget for every flow; falling back to partitioned scheduling")

    deadline = began + limits.timeout_s
    table_size = sum(cycle // f.period for f in ts)
    if table_size > limits.max_table_packets:
        logger.error(f"Packet table of {table_size} packets exceeds the limit {limits.max_table_packets}")
        raise HyperperiodOverflowError(f"packet table of {table_size} packets exceeds the limit {limits.max_table_packets}")

    try:
        subsets = partition_flowset(ts)
        offsets = _subset_offsets(subsets, constraints, deadline)
        base = _ideal_schedule(ts, offsets, cycle, ScheduleMode.IDEAL)
        table = sorted(base.packet_slots(), key=lambda s: (s.flow_id, s.packet_index))
        conflicting = predict_conflicting_packets(ts, [offsets[f.id] for f in ts], cycle)
        logger.info(f"{len(subsets)} subsets, {len(conflicting)} of {table_size} packets in conflict")
        packets = eliminate_conflicts(table, ts, cycle, constraints, conflicting, deadline)
    except (RelaxationExhaustedError, ScheduleTimeoutError) as e:
        kind = "timeout" if isinstance(e, ScheduleTimeoutError) else "relaxation"
        flow_ids = (e.flow_id,) if getattr(e, "flow_id", None) is not None else ()
        return finish(None, ScheduleVerdict(
            schedulable=False,
            unsolved=1,
            mode=ScheduleMode.RELAXED,
            violations=[Violation(kind=kind, detail=str(e), flow_ids=flow_ids, packet_index=getattr(e, "packet_index", None))],
        ))

    schedule = Schedule(
        mode=ScheduleMode.RELAXED,
        hyperperiod=cycle,
        offsets=offsets,
        periods={f.id: f.period for f in ts},
        service={f.id: f.tau for f in ts},
        packets=packets,
    )
    return finish(schedule, verify_schedule(schedule, ts, constraints, edge))
