"""
Best-effort dispatch policies used inside residual slots
"""
import logging
from enum import Enum
from typing import List, Optional

import numpy as np

from src.models.dqs.utility import (
    ArrivalEstimator,
    PortSnapshot,
    UtilityParams,
    select_strategy,
    update_arrival_estimator,
)

logger = logging.getLogger(__name__)


class PolicyName(str, Enum):
    DQS = "DQS"
    FIFO = "ResidualFIFO"
    SP = "StrictPriority"


class BePolicy:
    """Chooses which BE queue to serve, or None to stay idle"""
    name: PolicyName

    def on_arrival(self, queue: int, now: int) -> None:
        pass

    def select(self, snapshot: PortSnapshot, residual: int) -> Optional[int]:
        raise NotImplementedError


class ResidualFifoPolicy(BePolicy):
    """Serve the globally oldest head if it fits; no look-past"""
    name = PolicyName.FIFO

    def select(self, snapshot: PortSnapshot, residual: int) -> Optional[int]:
        heads = [q for q in snapshot.queues if q.length > 0 and q.gate_open]
        if not heads:
            return None
        oldest = min(heads, key=lambda q: (q.head_arrival, q.index))
        return oldest.index if oldest.head_service <= residual else None


class StrictPriorityPolicy(BePolicy):
    """Lowest-index open queue whose head fits the residual slot"""
    name = PolicyName.SP

    def select(self, snapshot: PortSnapshot, residual: int) -> Optional[int]:
        for q in snapshot.queues:
            if q.gate_open and q.length > 0 and q.head_service <= residual:
                return q.index
        return None


class DqsPolicy(BePolicy):
    """Utility-maximizing selection with an online arrival-rate estimate"""
    name = PolicyName.DQS

    def __init__(self, queue_count: int, params: Optional[UtilityParams] = None, printed_next_form: bool = False):
        self.params = params or UtilityParams()
        self.printed_next_form = printed_next_form
        self.estimator = ArrivalEstimator.zeros(queue_count)
        self._counts: List[int] = [0] * queue_count
        self._last_epoch = 0

    def on_arrival(self, queue: int, now: int) -> None:
        self._counts[queue] += 1

    def _refresh_estimate(self, now: int) -> None:
        window = now - self._last_epoch
        if window <= 0:
            return
        for queue, count in enumerate(self._counts):
            self.estimator = update_arrival_estimator(self.estimator, queue, count, window)
        self._counts = [0] * len(self._counts)
        self._last_epoch = now

    def select(self, snapshot: PortSnapshot, residual: int) -> Optional[int]:
        self._refresh_estimate(snapshot.time)
        strategy = select_strategy(snapshot, self.params, self.estimator, residual, self.printed_next_form)
        return strategy.served

    @property
    def rates(self) -> np.ndarray:
        return self.estimator.rates


def make_policy(
    name: PolicyName,
    queue_count: int,
    params: Optional[UtilityParams] = None,
    printed_next_form: bool = False,
) -> BePolicy:
    name = PolicyName(name)
    if name == PolicyName.DQS:
        return DqsPolicy(queue_count, params, printed_next_form)
    if name == PolicyName.FIFO:
        return ResidualFifoPolicy()
    return StrictPriorityPolicy()
