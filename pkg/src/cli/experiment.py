"""
Seeded experiment suite: schedule synthesis plus simulation per (flow count, seed, policy)
"""
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from tqdm import tqdm

from src.data.database.results_store import RUN_FIELDS
from src.models.scheduling.gcl import assign_queues, emit_gcl
from src.models.scheduling.nds import ScheduleLimits, compute_static_schedule
from src.simulation.metrics import MetricsReport
from src.simulation.policies import PolicyName
from src.simulation.simulator import build_scenario, run_simulation
from src.simulation.workload import generate_workload
from src.utils.exceptions import InvalidSpecError, NdsError
from src.utils.utils import write_csv

logger = logging.getLogger(__name__)

DEFAULT_COUNTS = (5, 20, 50, 100)
DEFAULT_BE_LOAD = 0.5


@dataclass
class ExperimentSpec:
    counts: List[int] = field(default_factory=lambda: list(DEFAULT_COUNTS))
    seeds: List[int] = field(default_factory=lambda: [1])
    be_load: float = DEFAULT_BE_LOAD
    policies: List[PolicyName] = field(default_factory=lambda: list(PolicyName))
    cycles: int = 1

    def __post_init__(self):
        if not self.counts or not self.seeds:
            raise InvalidSpecError("an experiment needs at least one flow count and one seed")
        if not self.policies:
            raise InvalidSpecError("an experiment needs at least one policy")
        if not 0.0 <= self.be_load <= 1.0:
            raise InvalidSpecError(f"BE load must be within [0, 1], got {self.be_load}")
        if self.cycles < 1:
            raise InvalidSpecError(f"cycles must be at least 1, got {self.cycles}")
        self.policies = [PolicyName(p) for p in self.policies]

    def cases(self) -> List[tuple]:
        return [(count, seed) for count in self.counts for seed in self.seeds]


def _empty_row(count: int, seed: int, policy: PolicyName) -> Dict[str, Any]:
    row = {name: None for name in RUN_FIELDS}
    row.update(count=count, seed=seed, policy=policy.value, schedulable=False)
    return row


def _fill_metrics(row: Dict[str, Any], report: MetricsReport) -> None:
    ts = report.class_flows("TS")
    be = report.class_flows("BE")
    delays = [m.delay_max for m in ts if m.delay_max is not None]
    means = [m.delay_mean for m in ts if m.delay_mean is not None]
    row.update(
        ts_max_jitter_ns=report.max_jitter("TS"),
        ts_max_delay_ns=max(delays) if delays else None,
        ts_mean_delay_ns=sum(means) / len(means) if means else None,
        utilization=report.utilization,
        ts_utilization=report.ts_utilization,
        be_utilization=report.be_utilization,
        be_transmitted=sum(m.transmitted for m in be),
        be_dropped=sum(m.dropped for m in be),
        misses=report.totals()["misses"],
        conservation_ok=report.conservation_ok,
    )


def run_case(
    count: int,
    seed: int,
    policies: Sequence[PolicyName],
    be_load: float,
    cycles: int = 1,
    limits: Optional[ScheduleLimits] = None,
) -> List[Dict[str, Any]]:
    """One row per policy for a single (flow count, seed) workload

    The schedule is synthesized once and shared by every policy run.
    """
    rows = [_empty_row(count, seed, PolicyName(p)) for p in policies]
    try:
        flowset = generate_workload(count, seed)
        schedule, verdict = compute_static_schedule(flowset.flows, limits=limits, edge=flowset.link)
    except NdsError as e:
        logger.error(f"Workload {count} flows, seed {seed} failed before simulation: {str(e)}")
        for row in rows:
            row["error"] = str(e)[:500]
        return rows

    for row in rows:
        row.update(
            schedulable=verdict.schedulable,
            mode=verdict.mode.value if verdict.mode else None,
            synthesis_s=verdict.synthesis_s,
        )
    if schedule is None or not verdict.schedulable:
        for row in rows:
            row["error"] = "unschedulable"
        return rows

    gcl = emit_gcl(schedule, assign_queues(flowset.flows, flowset.link.queues))
    for row in rows:
        try:
            scenario = build_scenario(flowset, policy=row["policy"], seed=seed, be_load=be_load, cycles=cycles, gcl=gcl)
            _, report = run_simulation(scenario)
        except NdsError as e:
            logger.error(f"Simulation of {count} flows, seed {seed}, {row['policy']} failed: {str(e)}")
            row["error"] = str(e)[:500]
            continue
        _fill_metrics(row, report)
    return rows


def canonical_order(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    return sorted(rows, key=lambda r: (r["count"], r["seed"], r["policy"]))


def run_experiment(
    spec: ExperimentSpec,
    workers: int = 1,
    limits: Optional[ScheduleLimits] = None,
    progress: bool = True,
) -> List[Dict[str, Any]]:
    """Run every case of the suite; rows come back in canonical order"""
    cases = spec.cases()
    rows: List[Dict[str, Any]] = []
    stats = {"cases": len(cases), "rows": 0, "unschedulable": 0, "errors": 0}
    logger.info(f"Running {len(cases)} workloads x {len(spec.policies)} policies with {workers} worker(s)")

    if workers <= 1:
        for count, seed in tqdm(cases, desc="Experiment", disable=not progress):
            rows.extend(run_case(count, seed, spec.policies, spec.be_load, spec.cycles, limits))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_case, count, seed, spec.policies, spec.be_load, spec.cycles, limits)
                for count, seed in cases
            ]
            for future in tqdm(as_completed(futures), total=len(futures), desc="Experiment", disable=not progress):
                rows.extend(future.result())

    for row in rows:
        stats["rows"] += 1
        if not row["schedulable"]:
            stats["unschedulable"] += 1
        if row["error"] and row["error"] != "unschedulable":
            stats["errors"] += 1
    logger.info(f"Experiment finished: {stats}")
    return canonical_order(rows)


def write_experiment_csv(path: str, rows: List[Dict[str, Any]]) -> int:
    return write_csv(path, RUN_FIELDS, ([row.get(name) for name in RUN_FIELDS] for row in rows))
