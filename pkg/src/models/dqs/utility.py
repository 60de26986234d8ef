"""
Dynamic queue scheduling (DQS) for best-effort traffic

The port is modelled as a selfish player: at every decision epoch inside a
residual slot it picks the strategy (serve one queue, or idle) that
maximizes a utility mixing the present state with the predicted next state.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.utils.exceptions import InvalidSpecError

logger = logging.getLogger(__name__)

EMA_WEIGHT = 0.2


class UtilityParams(BaseModel):
    """Weights of the DQS utility; c defaults to (n - i) / n"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha: float = Field(0.5, ge=0.0, le=1.0, description="Present/next mixing weight")
    beta: float = Field(1.0, gt=0.0, description="Penalty weight")
    p0: float = Field(1.0, gt=0.0, description="Penalty of a full queue")
    q_max: int = Field(64, ge=2, description="Queue capacity in packets")
    c: Optional[List[float]] = Field(None, description="Beneficial coefficient per queue")

    @field_validator("c")
    @classmethod
    def _check_coefficients(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is None:
            return value
        if not value or any(x <= 0 for x in value):
            raise ValueError("beneficial coefficients must be positive")
        if any(a <= b for a, b in zip(value, value[1:])):
            raise ValueError("beneficial coefficients must strictly decrease with the queue index")
        return value

    def coefficients(self, n: int) -> np.ndarray:
        if self.c is None:
            return (n - np.arange(n, dtype=float)) / n
        if len(self.c) != n:
            raise InvalidSpecError(f"{len(self.c)} beneficial coefficients for {n} queues")
        return np.asarray(self.c, dtype=float)


@dataclass(frozen=True)
class QueueState:
    index: int
    length: int
    head_service: int = 0
    gate_open: bool = True
    head_arrival: Optional[int] = None

    def __post_init__(self):
        if self.length < 0:
            raise InvalidSpecError(f"queue {self.index}: negative length")
        if (self.head_service > 0) != (self.length > 0):
            raise InvalidSpecError(f"queue {self.index}: head service time must be positive iff the queue is backlogged")


@dataclass(frozen=True)
class PortSnapshot:
    queues: Sequence[QueueState]
    time: int = 0

    @property
    def lengths(self) -> np.ndarray:
        return np.array([q.length for q in self.queues], dtype=float)


@dataclass(frozen=True)
class StrategyVector:
    """One bit per queue, at most one set; all zeros means idle"""
    bits: tuple

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits) or sum(self.bits) > 1:
            raise InvalidSpecError(f"invalid strategy {self.bits}")

    @classmethod
    def idle(cls, n: int) -> "StrategyVector":
        return cls(tuple([0] * n))

    @classmethod
    def serve(cls, n: int, queue: int) -> "StrategyVector":
        bits = [0] * n
        bits[queue] = 1
        return cls(tuple(bits))

    @property
    def served(self) -> Optional[int]:
        for i, bit in enumerate(self.bits):
            if bit:
                return i
        return None

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=float)


@dataclass
class ArrivalEstimator:
    """Expected arrivals per tick for every queue"""
    rates: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def zeros(cls, n: int) -> "ArrivalEstimator":
        return cls(rates=np.zeros(n))

    def per_window(self, window: int) -> np.ndarray:
        return self.rates * window


def update_arrival_estimator(
    estimator: ArrivalEstimator,
    queue: int,
    arrivals_in_window: int,
    window: int,
) -> ArrivalEstimator:
    """EMA update E <- (1 - 0.2) E + 0.2 * arrivals / window for one queue"""
    if window <= 0:
        raise InvalidSpecError(f"estimation window must be positive, got {window}")
    if arrivals_in_window < 0:
        raise InvalidSpecError("arrival count must be non-negative")
    rates = estimator.rates.copy()
    rates[queue] = (1.0 - EMA_WEIGHT) * rates[queue] + EMA_WEIGHT * (arrivals_in_window / window)
    return ArrivalEstimator(rates=rates)


def penalty_factor(q: float, q_max: int, p0: float) -> float:
    if q < 0:
        raise InvalidSpecError(f"queue length must be non-negative, got {q}")
    if q_max < 2:
        raise InvalidSpecError(f"queue capacity must be at least 2, got {q_max}")
    if q < q_max / 2:
        return 0.0
    if q < q_max:
        return q / q_max
    return float(p0)


def predicted_penalty_factor(q: float, arrival_rate: float, tau: int, q_max: int, p0: float) -> float:
    """Penalty at the expected length q + tau * E_a after one service time"""
    return penalty_factor(q + tau * arrival_rate, q_max, p0)


def utility(
    s: StrategyVector,
    s_next: StrategyVector,
    params: UtilityParams,
    p: Sequence[float],
    p_next: Sequence[float],
    printed_next_form: bool = False,
) -> float:
    """alpha * u_present + (1 - alpha) * u_next

    u = c.s - beta * p.(1 - s) at the present and at the predicted state. With
    printed_next_form the next term is c.s - beta * (p_next - s).(1 - s_next).
    """
    x, x_next = s.as_array(), s_next.as_array()
    p, p_next = np.asarray(p, dtype=float), np.asarray(p_next, dtype=float)
    c = params.coefficients(len(x))
    present = c @ x - params.beta * p @ (1.0 - x)
    if printed_next_form:
        upcoming = c @ x - params.beta * (p_next - x) @ (1.0 - x_next)
    else:
        upcoming = c @ x_next - params.beta * p_next @ (1.0 - x_next)
    return float(params.alpha * present + (1.0 - params.alpha) * upcoming)


def _best_response(post: np.ndarray, p_next: np.ndarray, c: np.ndarray, beta: float) -> StrategyVector:
    """Greedy next strategy: serve the backlogged queue maximizing c_j + beta p_j"""
    n = len(post)
    backlogged = np.flatnonzero(post > 0)
    if backlogged.size == 0:
        return StrategyVector.idle(n)
    scores = c[backlogged] + beta * p_next[backlogged]
    return StrategyVector.serve(n, int(backlogged[int(np.argmax(scores))]))


def select_strategy(
    port: PortSnapshot,
    params: UtilityParams,
    estimator: ArrivalEstimator,
    residual: int,
    printed_next_form: bool = False,
) -> StrategyVector:
    """Utility-maximizing strategy among serve-i (gate open, backlogged, fits) and idle"""
    n = len(port.queues)
    c = params.coefficients(n)
    lengths = port.lengths
    rates = estimator.rates if len(estimator.rates) == n else np.zeros(n)
    p = np.array([penalty_factor(q, params.q_max, params.p0) for q in lengths])

    feasible = [
        i for i, q in enumerate(port.queues)
        if q.gate_open and q.length > 0 and q.head_service <= residual
    ]
    heads = [q.head_service for q in port.queues if q.length > 0]
    idle_step = min(heads) if heads else 0

    best, best_u = None, None
    for choice in feasible + [None]:
        s = StrategyVector.idle(n) if choice is None else StrategyVector.serve(n, choice)
        post = lengths - s.as_array()
        tau_step = idle_step if choice is None else port.queues[choice].head_service
        p_next = np.array([
            predicted_penalty_factor(post[j], rates[j], tau_step, params.q_max, params.p0)
            for j in range(n)
        ])
        s_next = _best_response(post, p_next, c, params.beta)
        u = utility(s, s_next, params, p, p_next, printed_next_form)
        if best_u is None or u > best_u:
            best, best_u = s, u
    return best
