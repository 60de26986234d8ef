"""
Test persistence of experiment rows
"""
import sys
import os
import unittest

# Add project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.data.database.results_store import RUN_FIELDS, ExperimentRun, init_db, load_runs, save_runs


def row(count, seed, policy, **values):
    data = {name: None for name in RUN_FIELDS}
    data.update(count=count, seed=seed, policy=policy, schedulable=True, mode="IdealOffsets", utilization=0.5)
    data.update(values)
    return data


class TestResultsStore(unittest.TestCase):
    """Test saving and loading runs in an in-memory SQLite database"""

    def setUp(self):
        self.session_factory = init_db("sqlite://")

    def test_round_trip_in_canonical_order(self):
        saved = save_runs(self.session_factory, [
            row(20, 1, "StrictPriority"),
            row(5, 2, "DQS"),
            row(5, 1, "DQS", be_dropped=3, extra_column="ignored"),
        ])
        self.assertEqual(saved, 3)
        runs = load_runs(self.session_factory)
        self.assertEqual([(r["count"], r["seed"], r["policy"]) for r in runs], [
            (5, 1, "DQS"), (5, 2, "DQS"), (20, 1, "StrictPriority"),
        ])
        self.assertEqual(runs[0]["be_dropped"], 3)
        self.assertEqual(set(runs[0]), set(RUN_FIELDS))

    def test_filter_by_policy(self):
        save_runs(self.session_factory, [row(5, 1, "DQS"), row(5, 1, "ResidualFIFO")])
        runs = load_runs(self.session_factory, policy="ResidualFIFO")
        self.assertEqual([r["policy"] for r in runs], ["ResidualFIFO"])

    def test_created_at_is_set(self):
        save_runs(self.session_factory, [row(5, 1, "DQS")])
        session = self.session_factory()
        try:
            run = session.query(ExperimentRun).one()
            self.assertIsNotNone(run.created_at)
        finally:
            session.close()

    def test_unschedulable_row(self):
        save_runs(self.session_factory, [row(5, 1, "DQS", schedulable=False, mode=None, utilization=None, error="unschedulable")])
        run = load_runs(self.session_factory)[0]
        self.assertFalse(run["schedulable"])
        self.assertEqual(run["error"], "unschedulable")


if __name__ == '__main__':
    unittest.main()
