"""
Combinability report of a flow set, shared by the command line and the HTTP API
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from src.models.combinability.analyzer import (
    ConflictPrediction,
    ConflictSolutionSpace,
    cfk_solution_space,
    csk_solution_spaces,
    pairwise_conflict_classes,
    predict_existence,
    verify_noncollision_k,
)
from src.models.combinability.diophantine import gcd_periods, hyperperiod
from src.models.flow.flow_model import Flow
from src.utils.exceptions import HyperperiodOverflowError, InvalidSpecError, NoSolutionError

logger = logging.getLogger(__name__)

DEFAULT_SPACE_LIMIT = 8
# Overlap vectors handed to the solver before CSK enumeration gives up
DEFAULT_ATTEMPT_LIMIT = 4096


@dataclass
class CombinabilityReport:
    flow_ids: List[int]
    offsets: List[int]
    gcd: int
    total_service: int
    hyperperiod: Optional[int]
    prediction: Optional[ConflictPrediction] = None
    noncollision: Optional[bool] = None
    pairwise: Dict[str, str] = field(default_factory=dict)
    cfk_space: Optional[ConflictSolutionSpace] = None
    csk_spaces: List[ConflictSolutionSpace] = field(default_factory=list)

    @property
    def ideal_path_available(self) -> bool:
        return self.gcd > 1 and self.total_service < self.gcd

    @property
    def conflicts_certain(self) -> bool:
        return bool(self.prediction and (self.prediction.cfk_certain or self.prediction.csk_certain))

    @property
    def conflicting_pairs(self) -> int:
        return sum(1 for kind in self.pairwise.values() if kind != "None")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "flow_ids": self.flow_ids,
            "offsets": self.offsets,
            "gcd_ns": self.gcd,
            "total_service_ns": self.total_service,
            "hyperperiod_ns": self.hyperperiod,
            "ideal_path_available": self.ideal_path_available,
            "cfk_certain": self.prediction.cfk_certain if self.prediction else False,
            "csk_certain": self.prediction.csk_certain if self.prediction else False,
            "noncollision_verified": self.noncollision,
            "conflicting_pairs": self.conflicting_pairs,
            "pairwise": self.pairwise,
            "cfk_space": self.cfk_space.to_dict() if self.cfk_space else None,
            "csk_spaces": [s.to_dict() for s in self.csk_spaces],
        }

    def summary_lines(self) -> List[str]:
        lines = [
            f"flows: {len(self.flow_ids)} TS",
            f"g = {self.gcd} ns, sum of service times = {self.total_service} ns",
            f"hyperperiod = {self.hyperperiod if self.hyperperiod is not None else 'over the cap'}",
        ]
        if self.ideal_path_available:
            lines.append(f"ideal path available: g={self.gcd} ns, sum of service times < g")
        else:
            lines.append("ideal path not available: relaxed per-packet scheduling required")
        if self.prediction is not None:
            lines.append(f"CFK certain: {self.prediction.cfk_certain}, CSK certain: {self.prediction.csk_certain}")
            lines.append(f"no collision verified for the given offsets: {self.noncollision}")
            lines.append(f"conflicting pairs: {self.conflicting_pairs}")
        if self.cfk_space is not None:
            lines.append(
                f"CFK space: base {self.cfk_space.base}, step {self.cfk_space.step}, "
                f"first collision at {self.cfk_space.start_times(0)[0]} ns"
            )
        for space in self.csk_spaces:
            lines.append(f"CSK space v={space.overlaps}: base {space.base}, step {space.step}")
        return lines


def combinability_report(
    flows: Sequence[Flow],
    offsets: Optional[Sequence[int]] = None,
    space_limit: int = DEFAULT_SPACE_LIMIT,
    attempt_limit: int = DEFAULT_ATTEMPT_LIMIT,
) -> CombinabilityReport:
    """Analyze the TS flows at the given offsets (their emergence times by default)"""
    ts = [f for f in flows if f.is_ts]
    if not ts:
        logger.error("Combinability analysis needs at least one TS flow")
        raise InvalidSpecError("the flow set has no TS flows to analyze")
    if offsets is None:
        offsets = [f.emergence(0) for f in ts]
    offsets = list(offsets)
    if len(offsets) != len(ts):
        raise InvalidSpecError(f"{len(ts)} TS flows but {len(offsets)} offsets")

    try:
        cycle: Optional[int] = hyperperiod(f.period for f in ts)
    except HyperperiodOverflowError:
        cycle = None
    report = CombinabilityReport(
        flow_ids=[f.id for f in ts],
        offsets=offsets,
        gcd=gcd_periods(f.period for f in ts),
        total_service=sum(f.tau for f in ts),
        hyperperiod=cycle,
    )
    if len(ts) < 2:
        return report

    report.prediction = predict_existence(ts)
    report.noncollision = verify_noncollision_k(ts, offsets)
    report.pairwise = {
        f"{a}-{b}": verdict.kind.value
        for (a, b), verdict in pairwise_conflict_classes(ts, offsets).items()
    }
    if report.conflicts_certain:
        try:
            report.cfk_space = cfk_solution_space(ts, offsets)
        except NoSolutionError:
            logger.info("No common collision instant exists for all flows at once")
        report.csk_spaces = csk_solution_spaces(ts, offsets, limit=space_limit, max_attempts=attempt_limit)
    logger.info(
        f"Analyzed {len(ts)} flows: g={report.gcd}, sum tau={report.total_service}, "
        f"{report.conflicting_pairs} conflicting pairs"
    )
    return report
