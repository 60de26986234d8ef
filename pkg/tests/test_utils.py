"""
Test the utility functions and settings
"""
import sys
import os
import tempfile
import unittest
from unittest import mock

# Add project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.utils.config import Settings, get_settings
from src.utils.exceptions import ArithmeticOverflowError
from src.utils.utils import INT128_MAX, ceil_div, checked, checked_mul, nonneg_mod, read_csv, read_json, write_csv, write_json


class TestUtilsFunctions(unittest.TestCase):
    """Test cases for utility functions"""

    def test_nonneg_mod(self):
        """Test that the modulo is always non-negative"""
        self.assertEqual(nonneg_mod(7, 5), 2)
        self.assertEqual(nonneg_mod(-3, 5), 2)
        self.assertEqual(nonneg_mod(-10, 5), 0)

    def test_ceil_div(self):
        """Test rounding up of integer division"""
        self.assertEqual(ceil_div(10, 5), 2)
        self.assertEqual(ceil_div(11, 5), 3)
        self.assertEqual(ceil_div(1, 8), 1)

    def test_checked_arithmetic(self):
        """Test the signed 128-bit range guard"""
        self.assertEqual(checked(INT128_MAX), INT128_MAX)
        self.assertEqual(checked_mul(2**62, 2**62), 2**124)
        with self.assertRaises(ArithmeticOverflowError):
            checked_mul(2**64, 2**64)
        with self.assertRaises(OverflowError):
            checked(-INT128_MAX - 2)

    def test_json_and_csv_files(self):
        """Test writing and reading back JSON and CSV outputs"""
        with tempfile.TemporaryDirectory() as tmp:
            json_path = os.path.join(tmp, "nested", "out.json")
            write_json(json_path, {"a": 1})
            self.assertEqual(read_json(json_path), {"a": 1})

            csv_path = os.path.join(tmp, "out.csv")
            written = write_csv(csv_path, ["x", "y"], [[1, 2], [3, 4]])
            self.assertEqual(written, 2)
            self.assertEqual(read_csv(csv_path), [{"x": "1", "y": "2"}, {"x": "3", "y": "4"}])


class TestSettings(unittest.TestCase):
    """Test environment-driven settings"""

    def test_defaults(self):
        """Test the defaults when nothing is set"""
        with mock.patch.dict(os.environ, {}, clear=True):
            settings = Settings.from_env()
        self.assertEqual(settings.hyperperiod_cap, 10**10)
        self.assertEqual(settings.schedule_timeout_s, 10.0)
        self.assertEqual(settings.log_level, "INFO")
        self.assertTrue(settings.database_url.startswith("sqlite:///"))

    def test_environment_overrides(self):
        """Test that environment variables override the defaults"""
        env = {"HYPERPERIOD_CAP": "1e6", "SCHEDULE_TIMEOUT_S": "2.5", "LOG_LEVEL": "debug", "API_PORT": "9000"}
        with mock.patch.dict(os.environ, env, clear=True):
            settings = Settings.from_env()
        self.assertEqual(settings.hyperperiod_cap, 1_000_000)
        self.assertEqual(settings.schedule_timeout_s, 2.5)
        self.assertEqual(settings.log_level, "DEBUG")
        self.assertEqual(settings.api_port, 9000)

    def test_settings_are_cached(self):
        """Test that settings are read once until the cache is cleared"""
        get_settings.cache_clear()
        self.addCleanup(get_settings.cache_clear)
        with mock.patch.dict(os.environ, {"API_PORT": "9000"}, clear=True):
            first = get_settings()
        with mock.patch.dict(os.environ, {"API_PORT": "9100"}, clear=True):
            self.assertIs(get_settings(), first)
            get_settings.cache_clear()
            self.assertEqual(get_settings().api_port, 9100)


if __name__ == '__main__':
    unittest.main()
