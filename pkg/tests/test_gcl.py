"""
Test queue assignment and gate control lists
"""
import sys
import os
import tempfile
import unittest

# Add project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.models.flow.flow_model import Flow
from src.models.scheduling.gcl import (
    GateControlList,
    GclRow,
    ReservedWindow,
    assign_queues,
    emit_gcl,
    format_gates,
    format_gates_hex,
    load_gcl,
    load_gcl_csv,
    parse_gcl,
)
from src.models.scheduling.nds import PacketSlot, Schedule, ScheduleMode, compute_static_schedule
from src.simulation.workload import generate_workload
from src.utils.config import get_settings
from src.utils.exceptions import InvalidSpecError, QueueAssignmentError
from src.utils.utils import read_csv


def ts(fid, period, tau, priority=0):
    return Flow(id=fid, flow_class="TS", period_ns=period, size_bytes=1, service_ns=tau, priority=priority)


def be(fid, priority):
    return Flow(id=fid, flow_class="BE", size_bytes=64, service_ns=512, priority=priority)


def single_flow_schedule(offset):
    return Schedule(mode=ScheduleMode.IDEAL, hyperperiod=10, offsets={1: offset}, periods={1: 10}, service={1: 2})


class TestAssignQueues(unittest.TestCase):
    """Test the default and explicit queue mappings"""

    def test_period_classes_take_top_queues(self):
        flows = [ts(1, 500, 2), ts(2, 2000, 2), ts(3, 5000, 2), ts(4, 500, 2), be(5, 0), be(6, 9)]
        assignment = assign_queues(flows, 8)
        self.assertEqual(assignment.ts_queues, {1: 7, 2: 6, 3: 5, 4: 7})
        self.assertEqual(assignment.be_queue_count, 5)
        self.assertEqual(assignment.be_queues, {5: 0, 6: 4})
        self.assertEqual(assignment.be_mask, 0x1F)
        self.assertEqual(assignment.ts_mask, 0xE0)
        self.assertEqual(assignment.queue_of(6), 4)
        with self.assertRaises(KeyError):
            assignment.queue_of(99)

    def test_extra_period_classes_share_the_top_queue(self):
        flows = [ts(1, 500, 2), ts(2, 2000, 2), ts(3, 5000, 2)]
        assignment = assign_queues(flows, 3)
        self.assertEqual(assignment.ts_queues, {1: 2, 2: 2, 3: 1})
        self.assertEqual(assignment.be_queue_count, 1)

    def test_single_queue_rejected(self):
        with self.assertRaises(QueueAssignmentError):
            assign_queues([ts(1, 500, 2)], 1)

    def test_explicit_assignment(self):
        flows = [ts(1, 500, 2), be(2, 0)]
        assignment = assign_queues(flows, 4, explicit={1: 3, 2: 1})
        self.assertEqual(assignment.queue_of(1), 3)
        self.assertEqual(assignment.be_queue_count, 3)

    def test_explicit_assignment_errors(self):
        flows = [ts(1, 500, 2), be(2, 0)]
        with self.assertRaises(QueueAssignmentError):
            assign_queues(flows, 4, explicit={1: 3})
        with self.assertRaises(QueueAssignmentError):
            assign_queues(flows, 4, explicit={1: 2, 2: 2})
        with self.assertRaises(QueueAssignmentError):
            assign_queues(flows, 4, explicit={1: 0, 2: 3})


class TestEmitGcl(unittest.TestCase):
    """Test gate rows built from a schedule"""

    def setUp(self):
        self.flows = [ts(1, 10, 2)]
        self.assignment = assign_queues(self.flows, 8)

    def test_single_flow_rows(self):
        gcl = emit_gcl(single_flow_schedule(1), self.assignment)
        self.assertEqual(gcl.cycle, 10)
        self.assertEqual(gcl.rows, [
            GclRow(0, 1, 0x7F),
            GclRow(1, 3, 0x80, 1),
            GclRow(3, 10, 0x7F),
        ])
        self.assertEqual(gcl.reserved_time(), 2)

    def test_document_format(self):
        document = emit_gcl(single_flow_schedule(1), self.assignment).to_document()
        self.assertEqual(document["cycle_ns"], 10)
        self.assertEqual(document["rows"][1], {"start_ns": 1, "end_ns": 3, "gates": "0b10000000", "flow_id": 1})
        self.assertNotIn("flow_id", document["rows"][0])

    def test_window_wrapping_the_cycle(self):
        gcl = emit_gcl(single_flow_schedule(9), self.assignment)
        self.assertEqual([(r.start, r.end, r.flow_id) for r in gcl.rows], [(0, 1, 1), (1, 9, None), (9, 10, 1)])
        self.assertEqual(gcl.reserved_windows(), [ReservedWindow(9, 11, 1)])
        self.assertEqual(gcl.window_at(10), ReservedWindow(9, 11, 1))

    def test_no_schedule_gives_one_best_effort_row(self):
        gcl = emit_gcl(None, assign_queues([be(1, 0)], 8))
        cycle = get_settings().default_cycle_ns
        self.assertEqual(gcl.rows, [GclRow(0, cycle, 0xFF)])
        self.assertIsNone(gcl.next_reserved_start(0))
        self.assertIsNone(gcl.window_at(5))

    def test_overlapping_windows_rejected(self):
        flows = [ts(1, 10, 3), ts(2, 10, 3)]
        table = Schedule(
            mode=ScheduleMode.RELAXED,
            hyperperiod=10,
            offsets={1: 0, 2: 2},
            periods={1: 10, 2: 10},
            service={1: 3, 2: 3},
            packets=[PacketSlot(0, 3, 1, 0), PacketSlot(2, 5, 2, 0)],
        )
        with self.assertRaises(InvalidSpecError):
            emit_gcl(table, assign_queues(flows, 8))

    def test_synthesized_schedule(self):
        flowset = generate_workload(20, 1)
        schedule, verdict = compute_static_schedule(flowset.flows, edge=flowset.link)
        self.assertTrue(verdict.schedulable)
        assignment = assign_queues(flowset.flows, flowset.link.queues)
        gcl = emit_gcl(schedule, assignment)
        self.assertEqual(gcl.cycle, schedule.hyperperiod)
        expected = sum(f.tau * (schedule.hyperperiod // f.period) for f in flowset.ts_flows)
        self.assertEqual(gcl.reserved_time(), expected)
        for row in gcl.rows:
            if row.reserved:
                self.assertEqual(row.gate_mask, 1 << assignment.queue_of(row.flow_id))
            else:
                self.assertEqual(row.gate_mask, assignment.be_mask)


class TestGateLookup(unittest.TestCase):
    """Test window lookups over repeated cycles"""

    def setUp(self):
        self.gcl = emit_gcl(single_flow_schedule(1), assign_queues([ts(1, 10, 2)], 8))

    def test_window_at(self):
        self.assertEqual(self.gcl.window_at(12), ReservedWindow(11, 13, 1))
        self.assertIsNone(self.gcl.window_at(13))
        self.assertIsNone(self.gcl.window_at(0))

    def test_next_reserved_start(self):
        self.assertEqual(self.gcl.next_reserved_start(1), 1)
        self.assertEqual(self.gcl.next_reserved_start(4), 11)
        self.assertEqual(self.gcl.next_reserved_start(20), 21)

    def test_row_at_and_windows_until(self):
        self.assertEqual(self.gcl.row_at(25).gate_mask, 0x7F)
        self.assertEqual(self.gcl.windows_until(25), [
            ReservedWindow(1, 3, 1), ReservedWindow(11, 13, 1), ReservedWindow(21, 23, 1),
        ])


class TestGclFiles(unittest.TestCase):
    """Test validation and the JSON and CSV forms"""

    def test_rows_must_tile_the_cycle(self):
        with self.assertRaises(InvalidSpecError):
            GateControlList(cycle=10, queue_count=8, rows=[GclRow(0, 4, 0x7F), GclRow(5, 10, 0x7F)])
        with self.assertRaises(InvalidSpecError):
            GateControlList(cycle=10, queue_count=8, rows=[GclRow(0, 10, 0xC0, 1)])

    def test_gate_formats(self):
        self.assertEqual(format_gates(0x80, 8), "0b10000000")
        self.assertEqual(format_gates_hex(0x80, 8), "0x80")
        self.assertEqual(format_gates_hex(0x1, 4), "0x1")

    def test_invalid_document(self):
        with self.assertRaises(InvalidSpecError):
            parse_gcl({"cycle_ns": 10, "rows": [{"start_ns": 0, "end_ns": 10, "gates": "0xff"}]})
        with self.assertRaises(InvalidSpecError):
            parse_gcl({"cycle_ns": 10, "rows": [
                {"start_ns": 0, "end_ns": 5, "gates": "0b1111"},
                {"start_ns": 5, "end_ns": 10, "gates": "0b11111111"},
            ]})

    def test_json_and_csv_files(self):
        gcl = emit_gcl(single_flow_schedule(1), assign_queues([ts(1, 10, 2)], 8))
        with tempfile.TemporaryDirectory() as tmp:
            json_path = os.path.join(tmp, "gcl.json")
            csv_path = os.path.join(tmp, "gcl.csv")
            gcl.write_json(json_path)
            self.assertEqual(gcl.write_csv(csv_path), 3)
            from_json = load_gcl(json_path)
            records = read_csv(csv_path)
            from_csv = load_gcl_csv(csv_path)
        self.assertEqual(from_json.rows, gcl.rows)
        self.assertEqual(records[1], {"start_ns": "1", "end_ns": "3", "gate_mask_hex": "0x80"})
        self.assertEqual([r.gate_mask for r in from_csv.rows], [r.gate_mask for r in gcl.rows])
        self.assertFalse(any(r.reserved for r in from_csv.rows))


if __name__ == '__main__':
    unittest.main()
