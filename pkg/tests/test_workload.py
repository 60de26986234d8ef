"""
Test the seeded workload and best-effort trace generators
"""
import sys
import os
import unittest

# Add project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.simulation.workload import (
    BE_SIZE_RANGE,
    TS_PERIODS_NS,
    TS_SIZE_RANGE,
    generate_be_trace,
    generate_workload,
)
from src.utils.exceptions import InvalidSpecError


class TestGenerateWorkload(unittest.TestCase):
    """Test the TS flow profiles"""

    def _split(self, flowset):
        return tuple(sum(1 for f in flowset.ts_flows if f.period == p) for p in TS_PERIODS_NS)

    def test_period_splits(self):
        self.assertEqual(self._split(generate_workload(20, 1)), (6, 7, 7))
        self.assertEqual(self._split(generate_workload(100, 1)), (33, 33, 34))

    def test_sizes_and_arrivals_in_range(self):
        flowset = generate_workload(100, 8)
        for flow in flowset.ts_flows:
            self.assertTrue(TS_SIZE_RANGE[0] <= flow.size_bytes <= TS_SIZE_RANGE[1])
            self.assertTrue(0 <= flow.arrival_ns < flow.period)
            self.assertLess(flow.tau, flow.period)

    def test_best_effort_flows_follow_ts_ids(self):
        flowset = generate_workload(5, 1, be_flows=3)
        self.assertEqual([f.id for f in flowset.be_flows], [5, 6, 7])
        self.assertEqual([f.priority for f in flowset.be_flows], [0, 1, 2])

    def test_deterministic(self):
        self.assertEqual(generate_workload(50, 4).model_dump(), generate_workload(50, 4).model_dump())
        self.assertNotEqual(generate_workload(50, 4).model_dump(), generate_workload(50, 5).model_dump())

    def test_unknown_count_needs_ratios(self):
        with self.assertRaises(InvalidSpecError):
            generate_workload(7, 1)
        flowset = generate_workload(7, 1, ratios=(3, 2, 2))
        self.assertEqual(self._split(flowset), (3, 2, 2))
        with self.assertRaises(InvalidSpecError):
            generate_workload(7, 1, ratios=(3, 3, 3))


class TestBeTrace(unittest.TestCase):
    """Test the Poisson best-effort arrivals"""

    def setUp(self):
        self.flowset = generate_workload(20, 1)

    def test_zero_load_is_empty(self):
        self.assertEqual(generate_be_trace(self.flowset.be_flows, 1_000_000_000, 0.0, 10_000_000, 1), [])

    def test_offered_load_close_to_target(self):
        horizon = 100_000_000
        trace = generate_be_trace(self.flowset.be_flows, 1_000_000_000, 0.5, horizon, 1)
        offered = sum(a.size_bytes * 8 for a in trace) / (horizon / 1e9)
        self.assertAlmostEqual(offered / 1_000_000_000, 0.5, delta=0.05)
        self.assertEqual(trace, sorted(trace, key=lambda a: (a.time_ns, a.flow_id)))
        for arrival in trace:
            self.assertTrue(BE_SIZE_RANGE[0] <= arrival.size_bytes <= BE_SIZE_RANGE[1])
            self.assertLess(arrival.time_ns, horizon)

    def test_flow_streams_are_independent(self):
        be = self.flowset.be_flows
        full = generate_be_trace(be, 1_000_000_000, 0.5, 1_000_000, 9)
        alone = generate_be_trace(be[:1], 1_000_000_000, 0.5 / len(be), 1_000_000, 9)
        self.assertEqual([a for a in full if a.flow_id == be[0].id], alone)

    def test_invalid_arguments(self):
        with self.assertRaises(InvalidSpecError):
            generate_be_trace(self.flowset.be_flows, 1_000_000_000, 1.5, 1000, 1)
        with self.assertRaises(InvalidSpecError):
            generate_be_trace(self.flowset.be_flows, 1_000_000_000, 0.5, 0, 1)


if __name__ == '__main__':
    unittest.main()
