"""
Gate control lists and queue assignment for a gated egress port
"""
import bisect
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.models.flow.flow_model import Flow
from src.models.scheduling.nds import Schedule
from src.utils.config import get_settings
from src.utils.exceptions import InvalidSpecError, QueueAssignmentError
from src.utils.utils import read_csv, write_csv, write_json

logger = logging.getLogger(__name__)

GCL_CSV_HEADER = ["start_ns", "end_ns", "gate_mask_hex"]


@dataclass(frozen=True)
class QueueAssignment:
    """Which queue every flow is enqueued on"""
    queue_count: int
    ts_queues: Dict[int, int]
    be_queues: Dict[int, int]
    be_queue_count: int

    def queue_of(self, flow_id: int) -> int:
        if flow_id in self.ts_queues:
            return self.ts_queues[flow_id]
        if flow_id in self.be_queues:
            return self.be_queues[flow_id]
        raise KeyError(flow_id)

    @property
    def ts_mask(self) -> int:
        mask = 0
        for queue in self.ts_queues.values():
            mask |= 1 << queue
        return mask

    @property
    def be_mask(self) -> int:
        return (1 << self.be_queue_count) - 1


def assign_queues(
    flows: Sequence[Flow],
    queue_count: int = 8,
    explicit: Optional[Dict[int, int]] = None,
) -> QueueAssignment:
    """Default mapping: one TS queue per period class, BE on the low queues

    Period classes take the top queue indices downward, shortest period
    first. When there are more classes than queue_count - 1 the shortest
    periods share the top queue. BE flows go to queue min(priority, n_be - 1).
    """
    ts = [f for f in flows if f.is_ts]
    be = [f for f in flows if not f.is_ts]
    if ts and queue_count < 2:
        raise QueueAssignmentError(f"need at least 2 queues for TS and BE traffic, got {queue_count}")

    if explicit is not None:
        return _explicit_assignment(ts, be, queue_count, explicit)

    periods = sorted({f.period for f in ts})
    slots = queue_count - 1
    by_period = {}
    if len(periods) > slots:
        merged = len(periods) - slots + 1
        logger.warning(f"{len(periods)} period classes on {slots} TS queues; merging the {merged} shortest")
        for period in periods[:merged]:
            by_period[period] = queue_count - 1
        for k, period in enumerate(periods[merged:], start=1):
            by_period[period] = queue_count - 1 - k
    else:
        for k, period in enumerate(periods):
            by_period[period] = queue_count - 1 - k

    used = len(set(by_period.values()))
    be_count = queue_count - used
    return QueueAssignment(
        queue_count=queue_count,
        ts_queues={f.id: by_period[f.period] for f in ts},
        be_queues={f.id: min(f.priority, be_count - 1) for f in be},
        be_queue_count=be_count,
    )


def _explicit_assignment(ts: List[Flow], be: List[Flow], queue_count: int, explicit: Dict[int, int]) -> QueueAssignment:
    for f in ts + be:
        if f.id not in explicit:
            raise QueueAssignmentError(f"flow {f.id} has no queue in the explicit assignment")
        if not 0 <= explicit[f.id] < queue_count:
            raise QueueAssignmentError(f"flow {f.id}: queue {explicit[f.id]} outside 0..{queue_count - 1}")
    ts_set = {explicit[f.id] for f in ts}
    be_set = {explicit[f.id] for f in be}
    if ts_set & be_set:
        raise QueueAssignmentError(f"queues {sorted(ts_set & be_set)} carry both TS and BE flows")
    be_count = queue_count - len(ts_set)
    if be_set and max(be_set) >= be_count:
        raise QueueAssignmentError(f"BE queues must use the {be_count} lowest queue indices")
    return QueueAssignment(
        queue_count=queue_count,
        ts_queues={f.id: explicit[f.id] for f in ts},
        be_queues={f.id: explicit[f.id] for f in be},
        be_queue_count=be_count,
    )


def format_gates(mask: int, queue_count: int) -> str:
    return "0b" + format(mask, f"0{queue_count}b")


def format_gates_hex(mask: int, queue_count: int) -> str:
    return "0x" + format(mask, f"0{(queue_count + 3) // 4}x")


@dataclass(frozen=True)
class GclRow:
    start: int
    end: int
    gate_mask: int
    flow_id: Optional[int] = None

    @property
    def reserved(self) -> bool:
        return self.flow_id is not None


@dataclass(frozen=True)
class ReservedWindow:
    start: int
    end: int
    flow_id: int


@dataclass
class GateControlList:
    cycle: int
    queue_count: int
    rows: List[GclRow] = field(default_factory=list)

    def __post_init__(self):
        self.validate()
        self._starts = [row.start for row in self.rows]
        self._windows = self.reserved_windows()
        self._window_starts = [w.start for w in self._windows]

    def validate(self) -> None:
        if self.cycle <= 0:
            raise InvalidSpecError(f"GCL cycle must be positive, got {self.cycle}")
        if not self.rows:
            raise InvalidSpecError("GCL needs at least one row")
        position = 0
        for row in self.rows:
            if row.start != position or row.end <= row.start:
                raise InvalidSpecError(f"GCL rows must tile the cycle; gap or overlap at {position}")
            if row.gate_mask >= 1 << self.queue_count:
                raise InvalidSpecError(f"gate mask {row.gate_mask:#x} has more than {self.queue_count} bits")
            if row.reserved and bin(row.gate_mask).count("1") != 1:
                raise InvalidSpecError(f"reserved row at {row.start} must open exactly one gate")
            position = row.end
        if position != self.cycle:
            raise InvalidSpecError(f"GCL rows end at {position}, cycle is {self.cycle}")

    def reserved_windows(self) -> List[ReservedWindow]:
        """Reserved intervals within one cycle; a window split at the cycle end is re-joined"""
        windows = [ReservedWindow(r.start, r.end, r.flow_id) for r in self.rows if r.reserved]
        if len(windows) >= 2:
            first, last = windows[0], windows[-1]
            if first.start == 0 and last.end == self.cycle and first.flow_id == last.flow_id:
                windows = windows[1:-1] + [ReservedWindow(last.start, self.cycle + first.end, last.flow_id)]
        return windows

    def row_at(self, t: int) -> GclRow:
        pos = t % self.cycle
        return self.rows[bisect.bisect_right(self._starts, pos) - 1]

    def window_at(self, t: int) -> Optional[ReservedWindow]:
        """Reserved window covering t, in absolute time"""
        if not self._windows:
            return None
        base = t - t % self.cycle
        for shift in (base, base - self.cycle):
            i = bisect.bisect_right(self._window_starts, t - shift) - 1
            if i >= 0:
                w = self._windows[i]
                if w.start + shift <= t < w.end + shift:
                    return ReservedWindow(w.start + shift, w.end + shift, w.flow_id)
        return None

    def next_reserved_start(self, t: int) -> Optional[int]:
        """Absolute start of the first reserved window starting at or after t"""
        if not self._windows:
            return None
        base = t - t % self.cycle
        i = bisect.bisect_left(self._window_starts, t - base)
        if i < len(self._window_starts):
            return base + self._window_starts[i]
        return base + self.cycle + self._window_starts[0]

    def windows_until(self, horizon: int) -> List[ReservedWindow]:
        """Absolute reserved windows starting in [0, horizon)"""
        result = []
        for k in range(0, -(-horizon // self.cycle)):
            for w in self._windows:
                start = w.start + k * self.cycle
                if start < horizon:
                    result.append(ReservedWindow(start, w.end + k * self.cycle, w.flow_id))
        return result

    def reserved_time(self) -> int:
        return sum(r.end - r.start for r in self.rows if r.reserved)

    def to_document(self) -> Dict[str, Any]:
        rows = []
        for r in self.rows:
            row = {"start_ns": r.start, "end_ns": r.end, "gates": format_gates(r.gate_mask, self.queue_count)}
            if r.flow_id is not None:
                row["flow_id"] = r.flow_id
            rows.append(row)
        return {"cycle_ns": self.cycle, "rows": rows}

    def write_json(self, path: str) -> None:
        write_json(path, self.to_document())

    def write_csv(self, path: str) -> int:
        rows = ([r.start, r.end, format_gates_hex(r.gate_mask, self.queue_count)] for r in self.rows)
        return write_csv(path, GCL_CSV_HEADER, rows)


class GclRowDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    start_ns: int = Field(..., ge=0)
    end_ns: int = Field(..., gt=0)
    gates: str = Field(..., pattern=r"^0b[01]+$")
    flow_id: Optional[int] = Field(None, ge=0, description="TS flow owning the window")


class GclDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cycle_ns: int = Field(..., gt=0)
    rows: List[GclRowDocument] = Field(..., min_length=1)

    def to_gcl(self) -> GateControlList:
        widths = {len(r.gates) - 2 for r in self.rows}
        if len(widths) != 1:
            raise InvalidSpecError("all GCL rows must use the same number of gates")
        rows = [GclRow(r.start_ns, r.end_ns, int(r.gates[2:], 2), r.flow_id) for r in self.rows]
        return GateControlList(cycle=self.cycle_ns, queue_count=widths.pop(), rows=rows)


def parse_gcl(document: Dict[str, Any]) -> GateControlList:
    try:
        return GclDocument.model_validate(document).to_gcl()
    except ValidationError as e:
        logger.error(f"Invalid GCL document: {e.error_count()} error(s)")
        raise InvalidSpecError(str(e)) from e


def load_gcl(path: str) -> GateControlList:
    if not os.path.isfile(path):
        raise InvalidSpecError(f"GCL file not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        return parse_gcl(json.load(handle))


def load_gcl_csv(path: str, cycle: Optional[int] = None) -> GateControlList:
    """Rebuild a GCL from its CSV export; reserved rows lose their flow ids"""
    records = read_csv(path)
    if not records:
        raise InvalidSpecError(f"GCL CSV {path} has no rows")
    width = 4 * (len(records[0]["gate_mask_hex"]) - 2)
    rows = [GclRow(int(r["start_ns"]), int(r["end_ns"]), int(r["gate_mask_hex"], 16)) for r in records]
    return GateControlList(cycle=cycle or rows[-1].end, queue_count=width, rows=rows)


def emit_gcl(
    schedule: Optional[Schedule],
    assignment: QueueAssignment,
) -> GateControlList:
    """Gate rows tiling one hyperperiod: one TS gate per reserved window, BE gates in between"""
    be_mask = assignment.be_mask
    if schedule is None or not schedule.offsets:
        cycle = get_settings().default_cycle_ns
        return GateControlList(cycle=cycle, queue_count=assignment.queue_count, rows=[GclRow(0, cycle, be_mask)])

    cycle = schedule.hyperperiod
    pieces: List[Tuple[int, int, int]] = []
    for w in schedule.windows():
        if w.end <= cycle:
            pieces.append((w.start, w.end, w.flow_id))
        else:
            pieces.append((w.start, cycle, w.flow_id))
            pieces.append((0, w.end - cycle, w.flow_id))
    pieces.sort()

    rows = []
    position = 0
    for start, end, flow_id in pieces:
        if start < position:
            logger.error(f"Windows overlap at {start}; the schedule was not verified")
            raise InvalidSpecError(f"schedule has overlapping windows at {start}")
        if start > position:
            rows.append(GclRow(position, start, be_mask))
        rows.append(GclRow(start, end, 1 << assignment.queue_of(flow_id), flow_id))
        position = end
    if position < cycle:
        rows.append(GclRow(position, cycle, be_mask))

    gcl = GateControlList(cycle=cycle, queue_count=assignment.queue_count, rows=rows)
    logger.info(f"GCL with {len(rows)} rows, {gcl.reserved_time()} of {cycle} ns reserved")
    return gcl
