"""
Command-line front end: analyze, predict, schedule, simulate and experiment

Exit codes: 0 success, 1 unschedulable or otherwise infeasible, 2 bad usage or input.
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from src.cli.experiment import DEFAULT_BE_LOAD, DEFAULT_COUNTS, ExperimentSpec, run_experiment, write_experiment_csv
from src.models.combinability.analyzer import ConflictKind, brute_force_conflicts, predict_conflicting_packets
from src.models.combinability.diophantine import hyperperiod
from src.models.combinability.report import combinability_report
from src.models.flow.flow_model import load_flowset
from src.models.scheduling.gcl import assign_queues, emit_gcl
from src.models.scheduling.nds import ScheduleLimits, compute_static_schedule
from src.simulation.policies import PolicyName
from src.simulation.simulator import load_scenario, run_simulation
from src.utils.config import get_settings
from src.utils.exceptions import (
    ArithmeticOverflowError,
    InvalidSpecError,
    NdsError,
    PreconditionError,
    UnschedulableError,
)
from src.utils.utils import ensure_dir, read_json, setup_logging, write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def _limits(args) -> ScheduleLimits:
    limits = ScheduleLimits.from_settings()
    if getattr(args, "timeout_s", None) is not None:
        limits = replace(limits, timeout_s=args.timeout_s)
    if getattr(args, "hyperperiod_cap", None) is not None:
        limits = replace(limits, hyperperiod_cap=args.hyperperiod_cap)
    return limits


def _out_path(args, name: str) -> Optional[str]:
    if not args.out_dir:
        return None
    return os.path.join(ensure_dir(args.out_dir), name)


def cmd_analyze(args) -> int:
    flowset = load_flowset(args.input)
    report = combinability_report(flowset.flows)
    for line in report.summary_lines():
        print(line)
    path = _out_path(args, "analysis.json")
    if path:
        write_json(path, report.to_dict())
        logger.info(f"Analysis written to {path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    """Analytic conflicting packets cross-checked against the window sweep"""
    flowset = load_flowset(args.input)
    ts = flowset.ts_flows
    if len(ts) < 2:
        raise InvalidSpecError("conflict prediction needs at least two TS flows")
    offsets = [f.emergence(0) for f in ts]
    cycle = hyperperiod((f.period for f in ts), cap=_limits(args).hyperperiod_cap)
    predicted = predict_conflicting_packets(ts, offsets, cycle)
    conflicts = brute_force_conflicts(ts, offsets, cycle)
    swept = {(fid, n) for e in conflicts for fid, n in zip(e.flow_ids, e.packet_indices)}
    if predicted != swept:
        logger.warning(f"Analytic prediction marks {len(predicted)} packets, the sweep {len(swept)}")
    print(f"hyperperiod = {cycle} ns")
    print(f"conflicts: {len(conflicts)} pairs ({len(conflicts.of_kind(ConflictKind.CFK))} CFK), "
          f"{len(predicted)} packets involved")
    if args.out_dir:
        conflicts.write_json(_out_path(args, "conflicts.json"))
        conflicts.write_csv(_out_path(args, "conflicts.csv"))
        write_json(_out_path(args, "conflicting_packets.json"), [
            {"flow_id": fid, "packet_index": n} for fid, n in sorted(predicted)
        ])
    return EXIT_OK


def cmd_schedule(args) -> int:
    flowset = load_flowset(args.input)
    schedule, verdict = compute_static_schedule(flowset.flows, limits=_limits(args), edge=flowset.link)
    verdict_path = _out_path(args, "verdict.json")
    if verdict_path:
        verdict.write_json(verdict_path)
    if schedule is None or not verdict.schedulable:
        for v in verdict.violations:
            print(f"violation [{v.kind}]: {v.detail}")
        print("Unschedulable")
        return EXIT_DOMAIN

    gcl = emit_gcl(schedule, assign_queues(flowset.flows, flowset.link.queues))
    print(f"mode = {schedule.mode.value}, cycle = {gcl.cycle} ns, synthesis = {verdict.synthesis_s * 1000:.3f} ms")
    for fid, offset in sorted(schedule.offsets.items()):
        print(f"flow {fid}: offset {offset} ns")
    if args.out_dir:
        write_json(_out_path(args, "schedule.json"), schedule.to_dict())
        schedule.write_csv(_out_path(args, "schedule.csv"))
        gcl.write_json(_out_path(args, "gcl.json"))
        gcl.write_csv(_out_path(args, "gcl.csv"))
    return EXIT_OK


def _scenario_document(args) -> Dict[str, Any]:
    if not os.path.isfile(args.input):
        raise InvalidSpecError(f"input file not found: {args.input}")
    try:
        document = read_json(args.input)
    except json.JSONDecodeError as e:
        raise InvalidSpecError(f"{args.input} is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise InvalidSpecError(f"{args.input} must hold a JSON object")
    if "flowset" not in document:
        # A bare flow set: the scenario comes from the flags
        document = {"flowset": document, "seed": args.seed if args.seed is not None else 1}
    overrides = {
        "seed": args.seed,
        "policy": args.policy,
        "be_load": args.be_load,
        "cycles": args.cycles,
    }
    document.update({k: v for k, v in overrides.items() if v is not None})
    return document


def cmd_simulate(args) -> int:
    try:
        scenario = load_scenario(_scenario_document(args), limits=_limits(args))
    except UnschedulableError as e:
        print(f"Unschedulable: {e}")
        return EXIT_DOMAIN
    log, report = run_simulation(scenario)
    totals = report.totals()
    print(f"policy = {scenario.policy.value}, horizon = {scenario.horizon} ns, events = {len(log)}")
    print(f"utilization = {report.utilization:.4f} (TS {report.ts_utilization:.4f}, BE {report.be_utilization:.4f})")
    print(f"TS max jitter = {report.max_jitter('TS')} ns, totals = {totals}")
    if args.out_dir:
        log.write_csv(_out_path(args, "events.csv"))
        report.write_json(_out_path(args, "metrics.json"))
        report.write_csv(_out_path(args, "metrics.csv"))
        scenario.gcl.write_json(_out_path(args, "gcl.json"))
    return EXIT_OK


def cmd_experiment(args) -> int:
    first = args.seed if args.seed is not None else 1
    seeds = list(range(first, first + args.runs))
    spec = ExperimentSpec(
        counts=args.counts,
        seeds=seeds,
        be_load=args.be_load if args.be_load is not None else DEFAULT_BE_LOAD,
        policies=[PolicyName(p) for p in args.policy] if args.policy else list(PolicyName),
        cycles=args.cycles or 1,
    )
    rows = run_experiment(spec, workers=args.workers, limits=_limits(args), progress=not args.quiet)
    out_dir = ensure_dir(args.out_dir or ".")
    path = os.path.join(out_dir, "experiment.csv")
    written = write_experiment_csv(path, rows)
    print(f"{written} rows written to {path}")
    if args.db:
        from src.data.database.results_store import init_db, save_runs
        save_runs(init_db(args.db), rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsn-nds", description="Deterministic TSN egress scheduling toolkit")
    parser.add_argument("--verbose", action="store_true", help="Enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="Flow set or scenario JSON file")
        p.add_argument("--out-dir", default=None, help="Directory for CSV/JSON outputs")
        p.add_argument("--timeout-s", type=float, default=None, help="Schedule synthesis time limit")
        p.add_argument("--hyperperiod-cap", type=lambda v: int(float(v)), default=None, help="Largest accepted hyperperiod in ns")

    analyze = sub.add_parser("analyze", help="Combinability report of a flow set")
    common(analyze)
    analyze.set_defaults(handler=cmd_analyze)

    predict = sub.add_parser("predict", help="Conflicting packets over one hyperperiod")
    common(predict)
    predict.set_defaults(handler=cmd_predict)

    schedule = sub.add_parser("schedule", help="Static schedule and gate control list")
    common(schedule)
    schedule.set_defaults(handler=cmd_schedule)

    simulate = sub.add_parser("simulate", help="Simulate one egress port")
    common(simulate)
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--policy", choices=[p.value for p in PolicyName], default=None)
    simulate.add_argument("--be-load", type=float, default=None, help="BE load as a fraction of the link rate")
    simulate.add_argument("--cycles", type=int, default=None, help="Simulated hyperperiods")
    simulate.set_defaults(handler=cmd_simulate)

    experiment = sub.add_parser("experiment", help="Seeded suite over flow counts, seeds and policies")
    common(experiment, needs_input=False)
    experiment.add_argument("--counts", type=int, nargs="+", default=list(DEFAULT_COUNTS))
    experiment.add_argument("--seed", type=int, default=None, help="First seed")
    experiment.add_argument("--runs", type=int, default=1, help="Number of consecutive seeds")
    experiment.add_argument("--policy", choices=[p.value for p in PolicyName], nargs="+", default=None)
    experiment.add_argument("--be-load", type=float, default=None)
    experiment.add_argument("--cycles", type=int, default=None)
    experiment.add_argument("--workers", type=int, default=1, help="Parallel worker processes")
    experiment.add_argument("--db", default=None, help="SQLAlchemy URL to persist rows to")
    experiment.add_argument("--quiet", action="store_true", help="Hide the progress bar")
    experiment.set_defaults(handler=cmd_experiment)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging("DEBUG" if args.verbose else get_settings().log_level)
    try:
        return args.handler(args)
    except (InvalidSpecError, ValidationError) as e:
        logger.error(f"Invalid input: {str(e)}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticOverflowError, PreconditionError, UnschedulableError) as e:
        logger.error(f"{args.command} failed: {str(e)}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except NdsError as e:
        logger.error(f"{args.command} failed: {str(e)}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
