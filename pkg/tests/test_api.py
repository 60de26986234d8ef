"""
Test the HTTP API
"""
import sys
import os
import unittest

# Add project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from fastapi.testclient import TestClient

from src.api.app import VERSION, app

COPRIME_FLOWSET = {
    "link": {"rate_bps": 8_000_000_000},
    "flows": [
        {"id": 1, "class": "TS", "period_ns": 14, "size_bytes": 1, "service_ns": 3, "arrival_ns": 0, "priority": 1, "jitter_bound_ns": 10},
        {"id": 2, "class": "TS", "period_ns": 27, "size_bytes": 1, "service_ns": 3, "arrival_ns": 5, "priority": 2, "jitter_bound_ns": 10},
        {"id": 3, "class": "TS", "period_ns": 61, "size_bytes": 1, "service_ns": 4, "arrival_ns": 9, "priority": 0, "jitter_bound_ns": 10},
    ],
}

WORKED_EXAMPLE = {
    "link": {"rate_bps": 8_000_000_000},
    "flows": [{"id": 1, "class": "TS", "period_ns": 10, "size_bytes": 2, "arrival_ns": 0, "initial_offset_ns": 1}],
}


class TestApi(unittest.TestCase):
    """Test cases for the API endpoints"""

    def setUp(self):
        self.client = TestClient(app)

    def test_root(self):
        response = self.client.get("/")
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.json()["version"], VERSION)
        self.assertIn("X-Process-Time", response.headers)

    def test_status(self):
        response = self.client.get("/api/status")
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.json()["status"], "ok")
        self.assertIn("hyperperiod_cap", response.json()["limits"])

    def test_analyze(self):
        response = self.client.post("/api/analyze", json=COPRIME_FLOWSET)
        self.assertEqual(response.status_code, 200)
        report = response.json()["report"]
        self.assertEqual(report["cfk_space"]["base"], [1225, 635, 281])
        self.assertTrue(response.json()["summary"])

    def test_analyze_without_ts_flows(self):
        document = {"link": {"rate_bps": 1_000_000_000}, "flows": [{"id": 1, "class": "BE", "size_bytes": 64}]}
        response = self.client.post("/api/analyze", json=document)
        self.assertEqual(response.status_code, 400)

    def test_schedule(self):
        response = self.client.post("/api/schedule", json={"flowset": COPRIME_FLOWSET})
        self.assertEqual(response.status_code, 200)
        body = response.json()
        self.assertTrue(body["schedulable"])
        self.assertEqual(body["verdict"]["mode"], "PerPacketTable")
        self.assertEqual(body["gcl"]["cycle_ns"], 23058)
        self.assertEqual(set(body["offsets"]), {"1", "2", "3"})

    def test_schedule_hyperperiod_cap(self):
        response = self.client.post("/api/schedule", json={"flowset": COPRIME_FLOWSET, "limits": {"hyperperiod_cap": 1000}})
        self.assertEqual(response.status_code, 400)

    def test_schedule_unschedulable(self):
        flowset = {"link": COPRIME_FLOWSET["link"], "flows": [dict(f, jitter_bound_ns=0) for f in COPRIME_FLOWSET["flows"]]}
        response = self.client.post("/api/schedule", json={"flowset": flowset})
        self.assertEqual(response.status_code, 200)
        self.assertFalse(response.json()["schedulable"])
        self.assertIsNone(response.json()["gcl"])
        self.assertEqual(response.json()["offsets"], {})

    def test_invalid_document(self):
        response = self.client.post("/api/schedule", json={"flowset": {"flows": []}})
        self.assertEqual(response.status_code, 422)

    def test_simulate(self):
        response = self.client.post("/api/simulate", json={"flowset": WORKED_EXAMPLE, "seed": 1, "cycles": 2})
        self.assertEqual(response.status_code, 200)
        body = response.json()
        self.assertTrue(body["schedulable"])
        self.assertTrue(body["metrics"]["conservation_ok"])
        self.assertAlmostEqual(body["metrics"]["utilization"], 0.2)

    def test_simulate_unschedulable(self):
        flowset = {"link": COPRIME_FLOWSET["link"], "flows": [dict(f, jitter_bound_ns=0) for f in COPRIME_FLOWSET["flows"]]}
        response = self.client.post("/api/simulate", json={"flowset": flowset, "seed": 1})
        self.assertEqual(response.status_code, 200)
        self.assertFalse(response.json()["schedulable"])


if __name__ == '__main__':
    unittest.main()
