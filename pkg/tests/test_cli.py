"""
Test the command-line front end and the experiment suite
"""
import sys
import os
import io
import json
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

# Add project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.cli.app import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, main
from src.cli.experiment import ExperimentSpec, canonical_order, run_case, run_experiment
from src.data.database.results_store import init_db, load_runs
from src.simulation.policies import PolicyName
from src.utils.exceptions import InvalidSpecError
from src.utils.utils import read_csv, read_json


def coprime_document(jitter):
    flows = [
        {"id": 1, "class": "TS", "period_ns": 14, "size_bytes": 1, "service_ns": 3, "arrival_ns": 0, "priority": 1},
        {"id": 2, "class": "TS", "period_ns": 27, "size_bytes": 1, "service_ns": 3, "arrival_ns": 5, "priority": 2},
        {"id": 3, "class": "TS", "period_ns": 61, "size_bytes": 1, "service_ns": 4, "arrival_ns": 9, "priority": 0},
    ]
    for flow in flows:
        flow["jitter_bound_ns"] = jitter
    return {"link": {"rate_bps": 8_000_000_000}, "flows": flows}


WORKED_EXAMPLE = {
    "link": {"rate_bps": 8_000_000_000},
    "flows": [{"id": 1, "class": "TS", "period_ns": 10, "size_bytes": 2, "arrival_ns": 0, "initial_offset_ns": 1}],
}


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name
        self.out_dir = os.path.join(self.tmp, "out")

    def tearDown(self):
        self._tmp.cleanup()

    def write_input(self, document, name="input.json"):
        path = os.path.join(self.tmp, name)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(document, handle)
        return path

    def run_cli(self, *argv):
        buffer = io.StringIO()
        with redirect_stdout(buffer):
            code = main(list(argv))
        return code, buffer.getvalue()


class TestAnalyzeAndPredict(CliTestCase):
    """Test the analysis subcommands"""

    def test_analyze_coprime_flows(self):
        path = self.write_input(coprime_document(0))
        code, output = self.run_cli("analyze", "--input", path, "--out-dir", self.out_dir)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("ideal path not available", output)
        report = read_json(os.path.join(self.out_dir, "analysis.json"))
        self.assertEqual(report["gcd_ns"], 1)
        self.assertTrue(report["cfk_certain"])
        self.assertEqual(report["cfk_space"]["base"], [1225, 635, 281])
        self.assertEqual(report["cfk_space"]["step"], [1647, 854, 378])
        self.assertEqual(report["cfk_space"]["collision_time"], 17150)

    def test_predict_coprime_flows(self):
        path = self.write_input(coprime_document(0))
        code, output = self.run_cli("predict", "--input", path, "--out-dir", self.out_dir)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("hyperperiod = 23058 ns", output)
        packets = read_json(os.path.join(self.out_dir, "conflicting_packets.json"))
        for fid, n in ((1, 1225), (2, 635), (3, 281)):
            self.assertIn({"flow_id": fid, "packet_index": n}, packets)
        self.assertTrue(read_csv(os.path.join(self.out_dir, "conflicts.csv")))

    def test_predict_needs_two_flows(self):
        path = self.write_input(WORKED_EXAMPLE)
        code, _ = self.run_cli("predict", "--input", path)
        self.assertEqual(code, EXIT_USAGE)

    def test_invalid_input(self):
        document = coprime_document(0)
        document["flows"][0]["colour"] = "red"
        code, _ = self.run_cli("analyze", "--input", self.write_input(document))
        self.assertEqual(code, EXIT_USAGE)
        code, _ = self.run_cli("analyze", "--input", os.path.join(self.tmp, "missing.json"))
        self.assertEqual(code, EXIT_USAGE)


class TestSchedule(CliTestCase):
    """Test the schedule subcommand"""

    def test_relaxed_schedule_with_jitter_budget(self):
        path = self.write_input(coprime_document(10))
        code, output = self.run_cli("schedule", "--input", path, "--out-dir", self.out_dir)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("mode = PerPacketTable", output)
        gcl = read_json(os.path.join(self.out_dir, "gcl.json"))
        self.assertEqual(gcl["cycle_ns"], 23058)
        self.assertTrue(read_json(os.path.join(self.out_dir, "verdict.json"))["schedulable"])
        rows = read_csv(os.path.join(self.out_dir, "schedule.csv"))
        self.assertIn({"flow_id": "1", "packet_index": "1225", "start_ns": "17154", "end_ns": "17157"}, rows)

    def test_zero_jitter_is_unschedulable(self):
        path = self.write_input(coprime_document(0))
        code, output = self.run_cli("schedule", "--input", path, "--out-dir", self.out_dir)
        self.assertEqual(code, EXIT_DOMAIN)
        self.assertIn("Unschedulable", output)
        self.assertFalse(read_json(os.path.join(self.out_dir, "verdict.json"))["schedulable"])
        self.assertFalse(os.path.exists(os.path.join(self.out_dir, "gcl.json")))

    def test_hyperperiod_cap(self):
        path = self.write_input(coprime_document(10))
        code, _ = self.run_cli("schedule", "--input", path, "--hyperperiod-cap", "1e3")
        self.assertEqual(code, EXIT_DOMAIN)


class TestSimulate(CliTestCase):
    """Test the simulate subcommand"""

    def test_bare_flow_set(self):
        path = self.write_input(WORKED_EXAMPLE)
        code, output = self.run_cli(
            "simulate", "--input", path, "--seed", "4", "--policy", "ResidualFIFO", "--cycles", "2",
            "--out-dir", self.out_dir,
        )
        self.assertEqual(code, EXIT_OK)
        self.assertIn("policy = ResidualFIFO, horizon = 20 ns", output)
        metrics = read_json(os.path.join(self.out_dir, "metrics.json"))
        self.assertTrue(metrics["conservation_ok"])
        self.assertEqual(metrics["totals"]["transmitted"], 2)
        self.assertEqual(metrics["flows"][0]["delay_max"], 3)
        self.assertTrue(read_csv(os.path.join(self.out_dir, "events.csv")))

    def test_scenario_document(self):
        path = self.write_input({"flowset": WORKED_EXAMPLE, "seed": 2, "policy": "DQS", "horizon_ns": 30})
        code, output = self.run_cli("simulate", "--input", path)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("horizon = 30 ns", output)

    def test_unschedulable_scenario(self):
        path = self.write_input(coprime_document(0))
        code, output = self.run_cli("simulate", "--input", path)
        self.assertEqual(code, EXIT_DOMAIN)
        self.assertIn("Unschedulable", output)

    def test_be_load_out_of_range(self):
        path = self.write_input(WORKED_EXAMPLE)
        code, _ = self.run_cli("simulate", "--input", path, "--be-load", "1.5")
        self.assertEqual(code, EXIT_USAGE)


class TestExperimentCommand(CliTestCase):
    """Test the experiment subcommand"""

    def test_rows_written_to_csv_and_database(self):
        url = f"sqlite:///{os.path.join(self.tmp, 'runs.db')}"
        code, _ = self.run_cli(
            "experiment", "--counts", "5", "--seed", "3", "--runs", "2",
            "--policy", "DQS", "StrictPriority", "--quiet", "--out-dir", self.out_dir, "--db", url,
        )
        self.assertEqual(code, EXIT_OK)
        rows = read_csv(os.path.join(self.out_dir, "experiment.csv"))
        self.assertEqual([(r["seed"], r["policy"]) for r in rows], [
            ("3", "DQS"), ("3", "StrictPriority"), ("4", "DQS"), ("4", "StrictPriority"),
        ])
        self.assertTrue(all(r["schedulable"] == "True" for r in rows))
        self.assertEqual(len(load_runs(init_db(url))), 4)

    def test_missing_subcommand(self):
        with self.assertRaises(SystemExit) as ctx:
            with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()):
                main([])
        self.assertEqual(ctx.exception.code, EXIT_USAGE)

    def test_unknown_flow_count_recorded_per_row(self):
        code, _ = self.run_cli("experiment", "--counts", "7", "--quiet", "--out-dir", self.out_dir)
        self.assertEqual(code, EXIT_OK)
        rows = read_csv(os.path.join(self.out_dir, "experiment.csv"))
        self.assertTrue(all(r["error"] for r in rows))


class TestExperimentSuite(unittest.TestCase):
    """Test the seeded suite itself"""

    def test_spec_validation(self):
        with self.assertRaises(InvalidSpecError):
            ExperimentSpec(counts=[])
        with self.assertRaises(InvalidSpecError):
            ExperimentSpec(be_load=1.5)
        self.assertEqual(ExperimentSpec(counts=[5, 20], seeds=[1, 2]).cases(), [(5, 1), (5, 2), (20, 1), (20, 2)])

    def test_case_rows(self):
        rows = run_case(20, 1, list(PolicyName), 0.5)
        self.assertEqual(sorted(r["policy"] for r in rows), sorted(p.value for p in PolicyName))
        for row in rows:
            self.assertTrue(row["schedulable"])
            self.assertEqual(row["mode"], "IdealOffsets")
            self.assertEqual(row["ts_max_jitter_ns"], 0)
            self.assertEqual(row["misses"], 0)
            self.assertTrue(row["conservation_ok"])
            self.assertIsNone(row["error"])
        # TS traffic is identical under every policy
        self.assertEqual(len({r["ts_utilization"] for r in rows}), 1)

    def test_parallel_rows_match_serial(self):
        spec = ExperimentSpec(counts=[5], seeds=[1, 2], policies=[PolicyName.DQS, PolicyName.FIFO])
        serial = run_experiment(spec, workers=1, progress=False)
        parallel = run_experiment(spec, workers=2, progress=False)

        def stable(rows):
            return [{k: v for k, v in r.items() if k != "synthesis_s"} for r in rows]

        self.assertEqual(stable(serial), stable(parallel))
        self.assertEqual(canonical_order(list(reversed(serial))), serial)


if __name__ == '__main__':
    unittest.main()
