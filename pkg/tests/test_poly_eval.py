import unittest
from cmath import exp as cexp
from math import exp, log, pi

import numpy as np

from src.arith_tables import CoeffSeries, build_factor_tables, zhat_coeffs
from src.exceptions import CapacityError
from src.poly_eval import (
    PolyValues,
    WeightSpec,
    eval_dirichlet,
    eval_dirichlet_at,
    eval_Z,
    grid_fourier_integral,
    make_grid,
    nyquist_step,
    off_diagonal_factor,
)


class TestGrid(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.T = 1000.0
        cls.grid = make_grid(cls.T, 2, 1.0)

    def test_step_respects_nyquist(self):
        self.assertAlmostEqual(nyquist_step(self.T, 2, 1.0), pi / (4 * 2 * log(self.T)), places=15)
        self.assertLessEqual(self.grid.step, nyquist_step(self.T, 2, 1.0))
        self.assertEqual(len(self.grid), len(self.grid.t_values))
        self.assertAlmostEqual(self.grid.t_values[self.grid.half_points], self.T, places=9)

    def test_weights_are_a_probability_measure(self):
        self.assertAlmostEqual(float(np.sum(self.grid.weights)), 1.0, places=9)
        self.assertAlmostEqual(float(np.sum(self.grid.coarse_weights())), 1.0, places=6)

    def test_weights_sum_to_one_at_larger_heights(self):
        for T in (1e4, 1e5):
            grid = make_grid(T, 2, 1.0)
            self.assertAlmostEqual(float(np.sum(grid.weights)), 1.0, delta=1e-9, msg=f"T={T:g}")
            self.assertAlmostEqual(grid.half_width / (T / log(T)), 5.257, delta=1e-3)

    def test_fourier_integral_of_the_weight(self):
        width = self.T / log(self.T)
        for frequency in (0.0, 0.01, 0.003):
            expected = cexp(1j * self.T * frequency) * exp(-((frequency * width) ** 2) / 4)
            self.assertAlmostEqual(
                abs(grid_fourier_integral(self.grid, frequency) - expected), 0.0, places=9,
                msg=f"frequency {frequency}",
            )

    def test_rejects_invalid_requests(self):
        with self.assertRaises(ValueError):
            make_grid(self.T, 2, 1.0, tail_eps=0.1)
        with self.assertRaises(ValueError):
            make_grid(self.T, 2, 0.0)
        with self.assertRaises(CapacityError):
            make_grid(self.T, 2, 1.0, point_budget=1000)
        with self.assertRaises(ValueError):
            WeightSpec(50)


class TestEvaluation(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.T = 1000.0
        cls.tables = build_factor_tables(1000)
        cls.grid = make_grid(cls.T, 1, 1.0, tail_eps=1e-8)
        cls.coeffs = zhat_coeffs(1.0, cls.T, cls.tables)

    def test_recurrence_matches_direct_evaluation(self):
        values = eval_dirichlet(self.coeffs, self.grid).values
        rows = np.arange(0, len(self.grid), 997)
        direct = eval_dirichlet_at(self.coeffs, self.grid.t_values[rows])
        self.assertLess(float(np.max(np.abs(values[rows] - direct))), 1e-8)

    def test_thread_count_does_not_change_values(self):
        single = eval_dirichlet(self.coeffs, self.grid, threads=1).values
        pooled = eval_dirichlet(self.coeffs, self.grid, threads=3).values
        self.assertTrue(np.array_equal(single, pooled), msg="Results must not depend on threads")

    def test_eval_Z_uses_the_prefactor(self):
        z = eval_Z(1.0, self.T, self.grid, self.tables)
        n = self.coeffs.support
        t = self.T
        expected = -2 / log(self.T) * np.sum(self.coeffs.values[n] * n ** (-0.5 - 1j * t))
        self.assertAlmostEqual(abs(z.values[self.grid.half_points] - expected), 0.0, delta=1e-8)

    def test_direct_evaluation_of_a_short_polynomial(self):
        coeffs = CoeffSeries(np.array([0.0, 1.0, 0.0, 2.0]), 1000.0, "1 + 2 * 3^-s")
        t = 1234.5
        expected = 1 + 2 * 3 ** (-0.5 - 1j * t)
        self.assertAlmostEqual(abs(eval_dirichlet_at(coeffs, [t])[0] - expected), 0.0, places=12)

    def test_rejects_empty_series(self):
        with self.assertRaises(ValueError):
            eval_dirichlet(CoeffSeries(np.zeros(1), self.T, "empty"), self.grid)

    def test_dataframe(self):
        frame = eval_dirichlet(self.coeffs, self.grid).to_dataframe()
        self.assertEqual(list(frame.columns), ["t", "re", "im"])
        self.assertEqual(len(frame), len(self.grid))
        with self.assertRaises(ValueError):
            PolyValues(np.zeros(3, dtype=complex), None, "loose").to_dataframe()


class TestOffDiagonalFactor(unittest.TestCase):
    def test_values(self):
        T = 100.0
        expected = exp(-((T * log(1.5)) ** 2) / (4 * log(T) ** 2))
        self.assertAlmostEqual(off_diagonal_factor(2, 3, T), expected, places=15)
        for m, n in ((2, 3), (3, 7), (10, 11), (97, 1000), (2, 1024)):
            self.assertEqual(off_diagonal_factor(m, n, T), off_diagonal_factor(n, m, T), msg=f"{m}, {n}")
        with self.assertRaises(ValueError):
            off_diagonal_factor(5, 5, T)


if __name__ == "__main__":
    unittest.main()
