"""
Unit tests for restart handling and formatting helpers.
"""
import unittest
from pathlib import Path
import sys

import numpy as np
from hypothesis import given, strategies as st

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from errors import Breakdown, MaxIterExceeded
from utils import format_count, format_seconds, loglog_slope, with_restart


class TestWithRestart(unittest.TestCase):

    def test_restarts_once(self):
        attempts = []

        def operation(attempt):
            attempts.append(attempt)
            if attempt == 1:
                raise Breakdown("rho vanished")
            return "solved"

        self.assertEqual(with_restart(operation, "bicgstab", exceptions=(Breakdown,)), "solved")
        self.assertEqual(attempts, [1, 2])

    def test_reraises_after_last_attempt(self):
        def operation(attempt):
            raise Breakdown(f"attempt {attempt}")

        with self.assertRaises(Breakdown):
            with_restart(operation, "bicgstab", exceptions=(Breakdown,))

    def test_other_errors_pass_through(self):
        calls = []

        def operation(attempt):
            calls.append(attempt)
            raise MaxIterExceeded("budget spent")

        with self.assertRaises(MaxIterExceeded):
            with_restart(operation, "bicgstab", exceptions=(Breakdown,))
        self.assertEqual(calls, [1])


class TestLoglogSlope(unittest.TestCase):

    @given(st.floats(min_value=0.5, max_value=4.0), st.floats(min_value=1e-3, max_value=1e3))
    def test_power_law(self, order, constant):
        h = np.array([0.4, 0.2, 0.1, 0.05])
        self.assertAlmostEqual(loglog_slope(h, constant * h ** order), order, places=8)

    def test_unusable_pairs(self):
        self.assertTrue(np.isnan(loglog_slope([0.1], [1.0])))
        self.assertTrue(np.isnan(loglog_slope([0.2, 0.1], [0.0, float("nan")])))
        self.assertAlmostEqual(loglog_slope([0.4, 0.2, 0.1], [0.16, 0.0, 0.01]), 2.0)


class TestFormatting(unittest.TestCase):

    def test_format_seconds(self):
        self.assertEqual(format_seconds(0.25), "250 ms")
        self.assertEqual(format_seconds(12.34), "12.3 s")
        self.assertEqual(format_seconds(300.0), "5.0 min")

    def test_format_count(self):
        self.assertEqual(format_count(1234567), "1,234,567")
        self.assertEqual(format_count(12), "12")


if __name__ == '__main__':
    unittest.main()
