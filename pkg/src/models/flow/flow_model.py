"""
Canonical flow, link and route types shared by every other module

All times are integral nanoseconds (1 tick = 1 ns).
"""
import json
import logging
import os
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.utils.exceptions import InvalidSpecError, NotApplicableError
from src.utils.utils import ceil_div

logger = logging.getLogger(__name__)

NS_PER_SECOND = 10**9

FlowClass = Literal["TS", "BE"]


def service_time(size: int, rate: int) -> int:
    """Transmission time in ns of size bytes on a link of rate bits/s, rounded up"""
    if rate is None or rate <= 0:
        raise InvalidSpecError(f"link rate must be positive, got {rate}")
    if size is None or size < 1:
        raise InvalidSpecError(f"packet size must be at least 1 byte, got {size}")
    return ceil_div(size * 8 * NS_PER_SECOND, rate)


class EdgeSpec(BaseModel):
    """A directed edge (egress port) and its gated queues"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    rate_bps: int = Field(..., gt=0, description="Link rate in bits per second")
    queues: int = Field(8, ge=1, description="Number of gated queues on the port")
    max_queue_len: int = Field(64, ge=1, description="Queue capacity q_L^max in packets")


class Flow(BaseModel):
    """One time-sensitive (periodic) or best-effort traffic stream"""
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    id: int = Field(..., ge=0, description="Unique flow identifier")
    flow_class: FlowClass = Field(..., alias="class", description="TS or BE")
    period_ns: Optional[int] = Field(None, gt=0, description="Period T_i (TS only)")
    size_bytes: int = Field(..., ge=1, description="Packet size in bytes")
    arrival_ns: int = Field(0, ge=0, description="Arrival b_i of the first packet")
    initial_offset_ns: Optional[int] = Field(None, ge=0, description="Emergence offset phi_i, defaults to arrival")
    processing_ns: int = Field(0, ge=0, description="Processing time p_i")
    accumulated_jitter_ns: int = Field(0, ge=0, description="Jitter J_i accumulated upstream")
    delay_bound_ns: Optional[int] = Field(None, ge=0, description="Delay bound, defaults to the period")
    jitter_bound_ns: int = Field(0, ge=0, description="Jitter bound")
    priority: int = Field(0, ge=0, description="Priority, 0 is highest")
    service_ns: Optional[int] = Field(None, ge=1, description="Service time tau_i, derived from the link when absent")

    @model_validator(mode="after")
    def _check_class_fields(self) -> "Flow":
        if self.flow_class == "TS":
            if self.period_ns is None:
                raise ValueError(f"TS flow {self.id} needs period_ns")
            if self.service_ns is not None and self.service_ns >= self.period_ns:
                raise ValueError(f"TS flow {self.id}: service time {self.service_ns} must be below the period {self.period_ns}")
        elif self.period_ns is not None:
            raise ValueError(f"BE flow {self.id} must not carry a period")
        if self.arrival_ns > self.phi + self.processing_ns:
            raise ValueError(f"flow {self.id}: arrival after emergence offset plus processing")
        return self

    @property
    def is_ts(self) -> bool:
        return self.flow_class == "TS"

    @property
    def phi(self) -> int:
        return self.arrival_ns if self.initial_offset_ns is None else self.initial_offset_ns

    @property
    def tau(self) -> int:
        if self.service_ns is None:
            raise InvalidSpecError(f"flow {self.id} has no service time; bind it to a link first")
        return self.service_ns

    @property
    def period(self) -> int:
        if self.period_ns is None:
            raise NotApplicableError(f"flow {self.id} is best-effort and has no period")
        return self.period_ns

    @property
    def delay_bound(self) -> int:
        if self.delay_bound_ns is not None:
            return self.delay_bound_ns
        return self.period_ns if self.period_ns is not None else 0

    def emergence(self, n: int = 0) -> int:
        """Time packet n becomes ready at this egress (phi_i + p_i + n T_i)"""
        base = self.phi + self.processing_ns
        return base + n * self.period if n else base

    def bind(self, rate_bps: int) -> "Flow":
        """Return a copy whose service time is derived from the link rate"""
        if self.service_ns is not None:
            return self
        return self.model_copy(update={"service_ns": service_time(self.size_bytes, rate_bps)})


def flow_bandwidth(flow: Flow) -> float:
    """Bandwidth B_i = size x 8 / T_i in bits per second"""
    return float(flow_bandwidth_exact(flow))


def flow_bandwidth_exact(flow: Flow) -> Fraction:
    if not flow.is_ts:
        raise NotApplicableError(f"flow {flow.id} is best-effort; bandwidth needs a period")
    if flow.size_bytes < 1:
        raise InvalidSpecError(f"flow {flow.id} has no payload")
    return Fraction(flow.size_bytes * 8 * NS_PER_SECOND, flow.period)


class FlowRoute(BaseModel):
    """End-to-end path of a flow; kept as data, scheduling is single-egress"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    path: List[str] = Field(..., min_length=2, description="EN_a, SW_1 ... SW_n, EN_b")
    offsets: List[int] = Field(default_factory=list, description="Emergence offset per egress port")
    packets: Optional[int] = Field(None, ge=0, description="Size of the packet index domain")

    @model_validator(mode="after")
    def _check_offsets(self) -> "FlowRoute":
        egress_ports = len(self.path) - 1
        if len(self.offsets) != egress_ports:
            raise ValueError(f"route has {egress_ports} egress ports but {len(self.offsets)} offsets")
        return self


class FlowSet(BaseModel):
    """A link and the flows sharing its egress port"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    link: EdgeSpec
    flows: List[Flow] = Field(default_factory=list)

    @model_validator(mode="before")
    @classmethod
    def _bind_service_times(cls, data: Any) -> Any:
        if not isinstance(data, dict) or "link" not in data:
            return data
        link = data["link"]
        rate = link.rate_bps if isinstance(link, EdgeSpec) else (link or {}).get("rate_bps")
        if not isinstance(rate, int) or rate <= 0:
            return data
        bound = []
        for raw in data.get("flows") or []:
            if isinstance(raw, Flow):
                bound.append(raw.bind(rate))
            elif isinstance(raw, dict) and raw.get("service_ns") is None and isinstance(raw.get("size_bytes"), int) and raw["size_bytes"] >= 1:
                bound.append(dict(raw, service_ns=service_time(raw["size_bytes"], rate)))
            else:
                bound.append(raw)
        return dict(data, flows=bound)

    @model_validator(mode="after")
    def _check_ids(self) -> "FlowSet":
        ids = [f.id for f in self.flows]
        if len(ids) != len(set(ids)):
            raise ValueError("flow ids must be unique")
        return self

    @property
    def ts_flows(self) -> List[Flow]:
        return [f for f in self.flows if f.is_ts]

    @property
    def be_flows(self) -> List[Flow]:
        return [f for f in self.flows if not f.is_ts]

    def flow(self, flow_id: int) -> Flow:
        for f in self.flows:
            if f.id == flow_id:
                return f
        raise KeyError(flow_id)


def parse_flowset(document: Union[str, Dict[str, Any]]) -> FlowSet:
    """Parse a FlowSet from a JSON string or decoded dict"""
    try:
        if isinstance(document, str):
            return FlowSet.model_validate_json(document)
        return FlowSet.model_validate(document)
    except ValidationError as e:
        logger.error(f"Invalid flow set document: {e.error_count()} error(s)")
        raise InvalidSpecError(str(e)) from e


def load_flowset(path: str) -> FlowSet:
    if not os.path.isfile(path):
        raise InvalidSpecError(f"flow set file not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    flowset = parse_flowset(text)
    logger.info(f"Loaded {len(flowset.flows)} flows ({len(flowset.ts_flows)} TS) from {path}")
    return flowset


def serialize_flowset(flowset: FlowSet) -> Dict[str, Any]:
    return flowset.model_dump(by_alias=True, exclude_none=True)


def dump_flowset(flowset: FlowSet, path: Optional[str] = None) -> str:
    text = json.dumps(serialize_flowset(flowset), indent=2)
    if path:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    return text
