"""
Test the flow, link and flow set types
"""
import sys
import os
import json
import tempfile
import unittest

# Add project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from pydantic import ValidationError

from src.models.flow.flow_model import (
    EdgeSpec,
    Flow,
    FlowRoute,
    FlowSet,
    dump_flowset,
    flow_bandwidth,
    load_flowset,
    parse_flowset,
    service_time,
)
from src.utils.exceptions import InvalidSpecError, NotApplicableError

GIGABIT = 1_000_000_000


def _document(**flow_overrides):
    flow = {"id": 0, "class": "TS", "period_ns": 500_000, "size_bytes": 64, "arrival_ns": 10}
    flow.update(flow_overrides)
    return {"link": {"rate_bps": GIGABIT}, "flows": [flow]}


class TestServiceTime(unittest.TestCase):
    """Test the transmission time of a packet"""

    def test_gigabit_examples(self):
        self.assertEqual(service_time(512, GIGABIT), 4096)
        self.assertEqual(service_time(64, GIGABIT), 512)

    def test_unit_case(self):
        self.assertEqual(service_time(1, 8 * GIGABIT), 1)

    def test_rounds_up(self):
        self.assertEqual(service_time(1, 3 * GIGABIT), 3)

    def test_zero_rate_rejected(self):
        with self.assertRaises(InvalidSpecError):
            service_time(64, 0)

    def test_monotone(self):
        self.assertLessEqual(service_time(100, GIGABIT), service_time(101, GIGABIT))
        self.assertGreaterEqual(service_time(100, GIGABIT), service_time(100, 2 * GIGABIT))


class TestFlowBandwidth(unittest.TestCase):
    """Test the bandwidth of a TS flow"""

    def test_examples(self):
        f1 = Flow(id=1, flow_class="TS", period_ns=5_000_000, size_bytes=512)
        f2 = Flow(id=2, flow_class="TS", period_ns=500_000, size_bytes=64)
        self.assertEqual(flow_bandwidth(f1), 819_200)
        self.assertEqual(flow_bandwidth(f2), 1_024_000)

    def test_best_effort_not_applicable(self):
        be = Flow(id=3, flow_class="BE", size_bytes=100)
        with self.assertRaises(NotApplicableError):
            flow_bandwidth(be)


class TestFlowValidation(unittest.TestCase):
    """Test the flow invariants enforced at ingestion"""

    def test_service_time_bound_from_link(self):
        flowset = parse_flowset(_document())
        flow = flowset.flows[0]
        self.assertEqual(flow.tau, 512)
        self.assertEqual(flow.emergence(0), 10)
        self.assertEqual(flow.emergence(2), 10 + 2 * 500_000)
        self.assertEqual(flow.delay_bound, 500_000)

    def test_service_not_below_period_rejected(self):
        with self.assertRaises(InvalidSpecError):
            parse_flowset(_document(period_ns=100))

    def test_arrival_after_emergence_rejected(self):
        with self.assertRaises(InvalidSpecError):
            parse_flowset(_document(arrival_ns=50, initial_offset_ns=10))

    def test_unknown_key_rejected(self):
        with self.assertRaises(InvalidSpecError):
            parse_flowset(_document(colour="red"))

    def test_duplicate_ids_rejected(self):
        document = _document()
        document["flows"].append(dict(document["flows"][0]))
        with self.assertRaises(InvalidSpecError):
            parse_flowset(document)

    def test_best_effort_with_period_rejected(self):
        with self.assertRaises(ValidationError):
            Flow(id=1, flow_class="BE", size_bytes=100, period_ns=10)

    def test_edge_defaults(self):
        edge = EdgeSpec(rate_bps=GIGABIT)
        self.assertEqual(edge.queues, 8)
        with self.assertRaises(ValidationError):
            EdgeSpec(rate_bps=0)

    def test_route_offsets_match_egress_ports(self):
        route = FlowRoute(path=["EN_a", "SW_1", "EN_b"], offsets=[0, 10])
        self.assertEqual(len(route.offsets), 2)
        with self.assertRaises(ValidationError):
            FlowRoute(path=["EN_a", "SW_1", "EN_b"], offsets=[0])


class TestFlowSetFiles(unittest.TestCase):
    """Test reading and writing flow set documents"""

    def setUp(self):
        self.flowset = FlowSet(link=EdgeSpec(rate_bps=GIGABIT), flows=[
            Flow(id=0, flow_class="TS", period_ns=500_000, size_bytes=64, priority=1),
            Flow(id=1, flow_class="BE", size_bytes=1500),
        ])

    def test_serialized_form_uses_class_key(self):
        document = json.loads(dump_flowset(self.flowset))
        self.assertEqual(document["flows"][0]["class"], "TS")
        self.assertEqual(parse_flowset(document).model_dump(), self.flowset.model_dump())

    def test_file_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "flows.json")
            dump_flowset(self.flowset, path)
            loaded = load_flowset(path)
        self.assertEqual([f.id for f in loaded.ts_flows], [0])
        self.assertEqual([f.id for f in loaded.be_flows], [1])
        self.assertEqual(loaded.flow(0).tau, 512)

    def test_missing_file(self):
        with self.assertRaises(InvalidSpecError):
            load_flowset("/nonexistent/flows.json")


if __name__ == '__main__':
    unittest.main()
