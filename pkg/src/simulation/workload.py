"""
Seeded workload generation: TS flow sets and best-effort arrival traces
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.models.flow.flow_model import EdgeSpec, Flow, FlowSet
from src.utils.exceptions import InvalidSpecError

logger = logging.getLogger(__name__)

# Periods of the three TS classes in ns (0.5 ms, 2 ms, 5 ms)
TS_PERIODS_NS = (500_000, 2_000_000, 5_000_000)

# Flows per period class for the standard flow counts
PERIOD_RATIOS: Dict[int, Tuple[int, int, int]] = {
    5: (2, 2, 1),
    20: (6, 7, 7),
    50: (16, 17, 17),
    100: (33, 33, 34),
}

TS_SIZE_RANGE = (64, 512)
BE_SIZE_RANGE = (64, 1518)
DEFAULT_RATE_BPS = 1_000_000_000
DEFAULT_BE_FLOWS = 4


class BeArrival(BaseModel):
    """One best-effort packet offered to the port"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    time_ns: int = Field(..., ge=0)
    flow_id: int = Field(..., ge=0)
    size_bytes: int = Field(..., ge=1)


def generate_workload(
    count: int,
    seed: int,
    ratios: Optional[Sequence[int]] = None,
    rate_bps: int = DEFAULT_RATE_BPS,
    be_flows: int = DEFAULT_BE_FLOWS,
    queues: int = 8,
    max_queue_len: int = 64,
) -> FlowSet:
    """TS flows split over the three period classes, plus BE flow descriptors

    Sizes are uniform in [64, 512] B and first arrivals uniform in [0, T).
    BE flows get ids after the TS flows and priorities 0, 1, ...
    """
    if ratios is None:
        if count not in PERIOD_RATIOS:
            raise InvalidSpecError(f"no period ratio known for {count} flows; pass ratios explicitly")
        ratios = PERIOD_RATIOS[count]
    ratios = tuple(ratios)
    if len(ratios) != len(TS_PERIODS_NS) or sum(ratios) != count or min(ratios) < 0:
        raise InvalidSpecError(f"ratios {ratios} must give {len(TS_PERIODS_NS)} non-negative counts summing to {count}")

    rng = np.random.default_rng(seed)
    flows: List[Flow] = []
    fid = 0
    for period, n in zip(TS_PERIODS_NS, ratios):
        sizes = rng.integers(TS_SIZE_RANGE[0], TS_SIZE_RANGE[1] + 1, size=n)
        arrivals = rng.integers(0, period, size=n)
        for size, arrival in zip(sizes, arrivals):
            flows.append(Flow(
                id=fid,
                flow_class="TS",
                period_ns=period,
                size_bytes=int(size),
                arrival_ns=int(arrival),
            ))
            fid += 1
    for priority in range(be_flows):
        flows.append(Flow(id=fid, flow_class="BE", size_bytes=BE_SIZE_RANGE[1], priority=priority))
        fid += 1

    link = EdgeSpec(rate_bps=rate_bps, queues=queues, max_queue_len=max_queue_len)
    flowset = FlowSet(link=link, flows=flows)
    logger.info(f"Generated {count} TS flows {ratios} and {be_flows} BE flows with seed {seed}")
    return flowset


def generate_be_trace(
    be_flows: Sequence[Flow],
    rate_bps: int,
    load: float,
    horizon: int,
    seed: int,
) -> List[BeArrival]:
    """Poisson arrivals per BE flow offering load x link rate in total

    Every flow draws from its own stream seeded with (seed, flow_id), so the
    trace of one flow does not depend on the others.
    """
    if not 0.0 <= load <= 1.0:
        raise InvalidSpecError(f"BE load must be within [0, 1], got {load}")
    if horizon <= 0:
        raise InvalidSpecError(f"horizon must be positive, got {horizon}")
    if load == 0.0 or not be_flows:
        return []

    mean_bits = (BE_SIZE_RANGE[0] + BE_SIZE_RANGE[1]) / 2 * 8
    packets_per_ns = load * rate_bps / (len(be_flows) * mean_bits) / 1e9
    trace: List[BeArrival] = []
    for flow in be_flows:
        rng = np.random.default_rng([seed, flow.id])
        t = 0.0
        while True:
            t += rng.exponential(1.0 / packets_per_ns)
            if t >= horizon:
                break
            size = int(rng.integers(BE_SIZE_RANGE[0], BE_SIZE_RANGE[1] + 1))
            trace.append(BeArrival(time_ns=int(t), flow_id=flow.id, size_bytes=size))
    trace.sort(key=lambda a: (a.time_ns, a.flow_id))
    logger.debug(f"BE trace: {len(trace)} packets over {horizon} ns at load {load}")
    return trace
