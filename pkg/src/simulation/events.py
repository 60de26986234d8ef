"""
Event log of a port simulation
"""
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

from src.utils.utils import write_csv

EVENT_CSV_HEADER = ["time_ns", "event", "flow_id", "packet_index", "queue"]

# Order of events sharing a timestamp
EVENT_RANK = {
    "tx-end": 0,
    "gate-change": 1,
    "arrival": 2,
    "drop": 3,
    "miss": 4,
    "tx-start": 5,
}


@dataclass(frozen=True)
class Event:
    time: int
    kind: str
    flow_id: Optional[int] = None
    packet_index: Optional[int] = None
    queue: Optional[int] = None

    def to_row(self) -> List:
        return [
            self.time,
            self.kind,
            "" if self.flow_id is None else self.flow_id,
            "" if self.packet_index is None else self.packet_index,
            "" if self.queue is None else self.queue,
        ]


@dataclass
class EventLog:
    events: List[Event] = field(default_factory=list)

    def record(self, time: int, kind: str, flow_id=None, packet_index=None, queue=None) -> None:
        if kind not in EVENT_RANK:
            raise ValueError(f"unknown event kind {kind}")
        self.events.append(Event(time, kind, flow_id, packet_index, queue))

    def finalize(self) -> "EventLog":
        # Stable: events of one rank keep their recording order
        self.events.sort(key=lambda e: (e.time, EVENT_RANK[e.kind]))
        return self

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def of_kind(self, kind: str) -> List[Event]:
        return [e for e in self.events if e.kind == kind]

    def transmissions(self) -> List[Tuple[int, int, int, int]]:
        """(start, end, flow_id, packet_index) of every transmission"""
        starts = {(e.flow_id, e.packet_index): e.time for e in self.events if e.kind == "tx-start"}
        result = []
        for e in self.events:
            if e.kind == "tx-end":
                key = (e.flow_id, e.packet_index)
                result.append((starts[key], e.time, e.flow_id, e.packet_index))
        result.sort()
        return result

    def write_csv(self, path: str) -> int:
        return write_csv(path, EVENT_CSV_HEADER, (e.to_row() for e in self.events))
