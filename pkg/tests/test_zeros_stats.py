import os
import tempfile
import unittest
from cmath import exp as cexp
from math import e, log, pi, sin
from pathlib import Path

import numpy as np

from src.arith_tables import build_factor_tables
from src.closed_forms import landau_gonek_profile
from src.exceptions import ZeroTableError
from src.zeros_stats import (
    FIRST_ZERO,
    ZeroTable,
    c_alpha_from_zeros,
    count_zeros_below,
    kernel_sum,
    lg_empirical,
    lg_profile,
    load_zeros,
    normalized_gaps,
    normalized_height,
    riemann_von_mangoldt,
    zero_average_real_part,
    zero_count_deviation,
)


def _write(directory: str, name: str, text: str) -> Path:
    path = Path(directory) / name
    path.write_text(text)
    return path


def _z_alpha(t: float, alpha: float, T: float, tables) -> complex:
    logT = log(T)
    total = 0j
    for n in range(2, int(T**alpha) + 1):
        if tables.mangoldt[n] > 0 and n < T**alpha:
            weight = tables.mangoldt[n] * (1 - log(n) / (alpha * logT))
            total += weight * n**-0.5 * cexp(-1j * t * log(n))
    return -2 / (alpha * logT) * total


class TestLoadZeros(unittest.TestCase):
    def test_skips_comments_and_extra_columns(self):
        with tempfile.TemporaryDirectory() as directory:
            path = _write(
                directory, "zeros.txt",
                f"# first zeros\n\n{FIRST_ZERO} 1\n21.022039638771555\n  25.010857580145688 x\n",
            )
            table = load_zeros(path)
        self.assertEqual(len(table), 3)
        self.assertEqual(table.first, FIRST_ZERO)
        self.assertAlmostEqual(table.last, 25.010857580145688, places=12)

    def test_errors_name_the_line(self):
        cases = {
            "unparsable": ("# header\n14.1\nabc\n", 3),
            "descending": ("14.1\n21.0\n20.0\n", 3),
            "repeated": ("14.1\n14.1\n", 2),
        }
        with tempfile.TemporaryDirectory() as directory:
            for name, (text, line_number) in cases.items():
                with self.assertRaises(ZeroTableError, msg=name) as context:
                    load_zeros(_write(directory, f"{name}.txt", text))
                self.assertEqual(context.exception.line_number, line_number, msg=name)

            with self.assertRaises(ZeroTableError):
                load_zeros(_write(directory, "empty.txt", "# nothing\n\n"))
            with self.assertRaises(OSError):
                load_zeros(Path(directory) / "missing.txt")

    def test_warns_on_an_offset_first_zero(self):
        with tempfile.TemporaryDirectory() as directory:
            path = _write(directory, "offset.txt", "14.2\n21.0\n")
            with self.assertLogs(level="WARNING"):
                load_zeros(path)


class TestZeroTable(unittest.TestCase):
    def test_validation(self):
        with self.assertRaises(ZeroTableError):
            ZeroTable(np.array([]), "empty")
        with self.assertRaises(ZeroTableError):
            ZeroTable(np.array([-1.0, 2.0]), "negative")
        with self.assertRaises(ZeroTableError):
            ZeroTable(np.array([1.0, 3.0, 2.0]), "unsorted")

    def test_counting(self):
        table = ZeroTable(np.array([14.0, 21.0, 25.0, 30.0]), "small")
        self.assertEqual(count_zeros_below(table, 25.0), 3)
        self.assertEqual(count_zeros_below(table, 10.0), 0)
        np.testing.assert_array_equal(table.below(22.0), [14.0, 21.0])


class TestCountingFunction(unittest.TestCase):
    def test_main_term(self):
        self.assertAlmostEqual(riemann_von_mangoldt(2 * pi * e), 7 / 8, places=12)
        self.assertAlmostEqual(riemann_von_mangoldt(1000), 648.6, delta=0.1)

    def test_normalized_height(self):
        self.assertAlmostEqual(normalized_height(2 * pi * e), e, places=12)
        table = ZeroTable(2 * pi * np.array([e, e**2]), "two")
        np.testing.assert_allclose(normalized_gaps(table), [2 * e**2 - e])

    def test_deviation(self):
        sparse = ZeroTable(np.arange(15.0, 201.0), "lattice")
        with self.assertLogs(level="WARNING"):
            self.assertGreater(zero_count_deviation(sparse, 100.0), 0.01)
        with self.assertRaises(ValueError):
            zero_count_deviation(sparse, 500.0)


class TestKernelSum(unittest.TestCase):
    def test_two_zeros(self):
        table = ZeroTable(np.array([10.0, 11.0]), "pair")
        with self.assertLogs(level="WARNING"):
            result = kernel_sum(10.0, 2.0, table, e)
        self.assertAlmostEqual(result.value, 1 + sin(1.0) ** 2 - 1 / 2, places=14)
        self.assertEqual(result.zeros_used, 2)
        self.assertAlmostEqual(result.tail_estimate, 1 / (200 * pi**2), places=14)

    def test_gap_of_three_quarters_after_a_zero(self):
        T_scale = 1e4
        gamma = 1000.0
        following = gamma + 2 * pi * 0.75 / log(T_scale)
        table = ZeroTable(np.array([gamma, following]), "gap 0.75")
        with self.assertLogs(level="WARNING"):
            value = c_alpha_from_zeros(gamma, 2.0, table, T_scale)
        self.assertGreater(value, 0.545)
        self.assertAlmostEqual(value, 0.5 + 1 / (1.5 * pi) ** 2, places=12)

        wider = ZeroTable(np.array([gamma, following, following + 1.0]), "gap 0.75 and a third zero")
        with self.assertLogs(level="WARNING"):
            self.assertGreaterEqual(c_alpha_from_zeros(gamma, 2.0, wider, T_scale), value)

    def test_evenly_spaced_zeros_at_midpoints(self):
        # sinc^2 over a lattice of spacing pi sums to 1, minus the cut beyond 200 pi
        table = ZeroTable(pi * np.arange(1.0, 2001.0), "lattice")
        t = pi * 1000.5
        result = kernel_sum(t, 1.0, table, e**2)
        self.assertAlmostEqual(result.value, -1 / (100 * pi**2), delta=1e-6)
        self.assertAlmostEqual(result.value, -0.00101, delta=1e-5)
        self.assertEqual(c_alpha_from_zeros(t, 1.0, table, e**2), result.value)

    def test_rejects_invalid_requests(self):
        table = ZeroTable(np.array([10.0, 11.0]), "pair")
        with self.assertRaises(ValueError):
            kernel_sum(10.5, 0.0, table, 100.0)
        with self.assertRaises(ValueError):
            kernel_sum(10.5, 4.5, table, 100.0)
        with self.assertRaises(ValueError):
            kernel_sum(12.0, 1.0, table, 100.0)


class TestZeroAverages(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.T = 100.0
        cls.tables = build_factor_tables(200)
        cls.table = ZeroTable(15.0 + 0.5 * np.arange(240), "synthetic")

    def test_lg_empirical_by_direct_evaluation(self):
        d, alpha = 0.5, 0.9
        shift = 2 * pi * d / log(self.T)
        zeros = self.table.below(self.T)
        expected = np.mean([_z_alpha(g + shift, alpha, self.T, self.tables).imag for g in zeros])
        self.assertAlmostEqual(
            lg_empirical(d, alpha, self.table, self.T, self.tables), expected, places=10
        )

    def test_lg_profile(self):
        profile = lg_profile([0.25, 0.5], 0.9, self.table, self.T, self.tables)
        self.assertEqual([d for d, _, _ in profile], [0.25, 0.5])
        self.assertEqual(profile[1][2], landau_gonek_profile(0.5))

    def test_zero_average_real_part(self):
        zeros = self.table.below(self.T)
        total = sum(_z_alpha(g, 1.0, self.T, self.tables).real for g in zeros)
        self.assertAlmostEqual(
            zero_average_real_part(self.table, self.T, 1.0, self.tables),
            2 * pi / (self.T * log(self.T)) * total,
            places=10,
        )

    def test_rejects_invalid_requests(self):
        with self.assertRaises(ValueError):
            lg_empirical(0.5, 1.0, self.table, self.T, self.tables)
        with self.assertRaises(ValueError):
            lg_empirical(0.5, 0.9, self.table, 500.0, self.tables)
        few = ZeroTable(np.array([15.0, 20.0, 200.0]), "few")
        with self.assertRaises(ValueError):
            zero_average_real_part(few, self.T, 1.0, self.tables)


@unittest.skipUnless(os.environ.get("ZETALAB_ZEROS_FILE"), "set ZETALAB_ZEROS_FILE to a zero table")
class TestPublishedZeros(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.table = load_zeros(os.environ["ZETALAB_ZEROS_FILE"])

    def test_first_zero_and_count(self):
        self.assertAlmostEqual(self.table.first, FIRST_ZERO, places=6)
        self.assertEqual(count_zeros_below(self.table, 1000.0), 649)
        self.assertLess(zero_count_deviation(self.table, 1000.0), 0.01)

    def test_zero_average_is_positive(self):
        tables = build_factor_tables(1000)
        self.assertGreater(lg_empirical(0.5, 0.9, self.table, 1000.0, tables), 0.0)


if __name__ == "__main__":
    unittest.main()
