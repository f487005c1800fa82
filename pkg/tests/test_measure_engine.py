import unittest
from fractions import Fraction
from math import fsum, log

import numpy as np

from src.arith_tables import (
    MollifierSpec,
    build_factor_tables,
    head_bound,
    head_length,
    mollifier_coeffs,
)
from src.diagonal_oracle import diagonal_moment, head_sum_bsq
from src.enums import MomentMethod
from src.exceptions import NyquistError
from src.measure_engine import (
    MomentResult,
    build_measure,
    component_moments,
    diagonal_mass,
    mean_square_numeric,
    pseudo_moment_numeric,
    tail_mean_square,
)
from src.poly_eval import make_grid

EULER_GAMMA = 0.5772156649015329


class TestMomentResult(unittest.TestCase):
    def test_rejects_negative_error_estimate(self):
        with self.assertRaises(ValueError):
            MomentResult(value=1.0, method=MomentMethod.QUADRATURE, err_estimate=-1.0)

    def test_display_prefers_the_exact_value(self):
        result = MomentResult(value=0.6667, method=MomentMethod.CLOSED_FORM, exact=Fraction(2, 3))
        self.assertIn("2/3", result.display)


class TestMeasure(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.T = 1000.0
        cls.tables = build_factor_tables(1000)
        cls.grid = make_grid(cls.T, 2, 1.0)
        cls.z_cache = {}
        cls.unit = build_measure(MollifierSpec.unit(), cls.T, cls.tables, cls.grid, z_cache=cls.z_cache)
        cls.liouville = build_measure(
            MollifierSpec.liouville(), cls.T, cls.tables, cls.grid, z_cache=cls.z_cache
        )

    def test_diagonal_mass_of_the_unit_mollifier(self):
        harmonic = fsum(1 / n for n in range(1, 21))
        self.assertAlmostEqual(self.unit.diag_mass, harmonic, places=12)

    def test_off_diagonal_terms_are_suppressed(self):
        for ctx in (self.unit, self.liouville):
            gap = abs(ctx.mass - ctx.diag_mass) / ctx.diag_mass
            self.assertLess(gap, 1e-4, msg=f"Mass gap of {ctx.spec.label}")

    def test_density_is_normalized(self):
        self.assertAlmostEqual(float(np.sum(self.liouville.density)), 1.0, places=12)
        self.assertAlmostEqual(float(np.sum(self.liouville.coarse_density)), 1.0, places=12)

    def test_order_zero_is_the_mass(self):
        self.assertAlmostEqual(pseudo_moment_numeric(self.liouville, 0, 1.0).value, 1.0, places=12)

    def test_z_values_are_shared_between_measures(self):
        self.assertIs(self.unit.z_values(1.0), self.liouville.z_values(1.0))

    def test_nyquist_is_enforced(self):
        with self.assertRaises(NyquistError):
            pseudo_moment_numeric(self.liouville, 3, 1.0)
        with self.assertRaises(NyquistError):
            pseudo_moment_numeric(self.liouville, 1, 2.0)
        with self.assertRaises(ValueError):
            pseudo_moment_numeric(self.liouville, -1, 1.0)

    def test_quadrature_matches_diagonal_sum(self):
        for k in (1, 2):
            quadrature = pseudo_moment_numeric(self.liouville, k, 1.0)
            oracle = diagonal_moment(MollifierSpec.liouville(), k, 1.0, self.T, self.tables)
            self.assertLessEqual(
                abs(quadrature.value - oracle.value), 1e-3 + quadrature.err_estimate, msg=f"k={k}"
            )
            self.assertEqual(quadrature.method, MomentMethod.QUADRATURE)

    def test_variance_inequality(self):
        for ctx in (self.unit, self.liouville):
            parts = component_moments(ctx, 1.0)
            self.assertGreaterEqual(parts["re_squared"], parts["re"] ** 2 - 1e-9, msg=ctx.spec.label)

    def test_halving_the_step_leaves_moments_unchanged(self):
        fine = make_grid(self.T, 6, 1.0)
        self.assertAlmostEqual(fine.step, self.grid.step / 2, delta=1e-3 * self.grid.step)
        refined = build_measure(MollifierSpec.liouville(), self.T, self.tables, fine)
        for k in (1, 2):
            self.assertAlmostEqual(
                pseudo_moment_numeric(refined, k, 1.0).value,
                pseudo_moment_numeric(self.liouville, k, 1.0).value,
                delta=1e-9,
                msg=f"k={k}",
            )

    def test_component_identities(self):
        parts = component_moments(self.liouville, 1.0)
        self.assertAlmostEqual(
            parts["re_squared"] + parts["im_squared"], parts["abs_squared"], places=12
        )
        self.assertAlmostEqual(
            parts["re_squared"] - parts["im_squared"], parts["re_of_square"], places=12
        )
        self.assertAlmostEqual(
            mean_square_numeric(self.liouville, 1.0).value, parts["abs_squared"], places=12
        )
        self.assertAlmostEqual(
            parts["re"], pseudo_moment_numeric(self.liouville, 1, 1.0).value, places=12
        )


class TestDiagonalMass(unittest.TestCase):
    def test_unit_mollifier_gives_the_harmonic_sum(self):
        T = 1e4
        tables = build_factor_tables(1000)
        mass = diagonal_mass(mollifier_coeffs(MollifierSpec.unit(), T, tables))
        length = head_length(T)
        self.assertAlmostEqual(mass, fsum(1 / n for n in range(1, length + 1)), places=14)
        T0 = head_bound(T)
        self.assertAlmostEqual(mass, log(T0) + EULER_GAMMA, delta=1 / T0)


class TestTailMeanSquare(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.T = 1000.0
        cls.tables = build_factor_tables(1000)
        cls.spec = MollifierSpec.liouville_divisor(2)
        cls.grid = make_grid(cls.T, 2, 1.0)
        cls.result = tail_mean_square(cls.spec, 1.0, cls.T, cls.tables, cls.grid)

    def test_full_integral_splits_into_head_tail_and_cross(self):
        parts = self.result.components
        self.assertAlmostEqual(
            parts["full"], parts["head"] + self.result.value + parts["cross"], delta=1e-9 * parts["full"]
        )

    def test_cross_term_is_within_its_bound(self):
        parts = self.result.components
        self.assertLessEqual(abs(parts["cross"]), parts["cross_bound"] + 1e-9)

    def test_head_integral_is_the_diagonal_head_sum(self):
        head_sum = head_sum_bsq(self.spec, 1.0, self.T, self.tables)
        self.assertAlmostEqual(self.result.components["head"], head_sum, delta=1e-4 * head_sum)

    def test_normalized_tail(self):
        parts = self.result.components
        self.assertGreater(self.result.value, 0.0)
        self.assertAlmostEqual(parts["normalized"], self.result.value / parts["diag_mass"], places=15)

    def test_rejects_grids_below_nyquist(self):
        with self.assertRaises(NyquistError):
            tail_mean_square(self.spec, 2.0, self.T, self.tables, self.grid)

    def test_head_bound(self):
        self.assertGreater(head_bound(self.T), 20)
        self.assertLess(head_bound(self.T), 21)


if __name__ == "__main__":
    unittest.main()
