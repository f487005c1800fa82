import dataclasses
import unittest
from fractions import Fraction

from src.arith_tables import MollifierSpec
from src.bounds_chain import (
    BoundReport,
    fourth_moment_chain,
    general_lower_bound,
    general_method_chain,
    has_mean_square_closed_form,
    mollifier_baseline_chain,
    second_moment_chain,
    tail_lower_bound_chain,
)
from src.enums import ChainOp, Relation


class TestSecondMomentChain(unittest.TestCase):
    def test_liouville(self):
        chain = second_moment_chain(MollifierSpec.liouville())
        self.assertEqual(chain.value("∫C²dμ (variance)"), Fraction(4, 9))
        self.assertEqual(chain.value("∫C²dμ (mean square)"), Fraction(7, 15))
        self.assertEqual(chain.value("∫C²dμ"), Fraction(7, 15), msg="The larger C² bound wins")
        self.assertEqual(chain.value("∫Im²dμ"), Fraction(1, 10))
        self.assertEqual(chain.value("∫|Z|²dμ (sum)"), Fraction(17, 30))
        self.assertEqual(chain.value("∫Im²dμ - ∫C²dμ"), -Fraction(11, 30))
        self.assertAlmostEqual(chain.value("sup|C|"), 0.683130, places=6)
        self.assertEqual(chain.replay(), [])

    def test_liouville_at_alpha_two(self):
        chain = second_moment_chain(MollifierSpec.liouville(), 2)
        self.assertEqual(chain.value("∫C²dμ (variance)"), Fraction(25, 144))
        self.assertEqual(chain.value("∫C²dμ"), Fraction(7, 40))

    def test_liouville_bound_falls_with_alpha(self):
        bounds = []
        for alpha in (Fraction(1), Fraction(3, 2), Fraction(2)):
            chain = second_moment_chain(MollifierSpec.liouville(), alpha)
            self.assertGreaterEqual(chain.value("∫C²dμ"), chain.value("∫C²dμ (variance)"))
            bounds.append(chain.value("∫C²dμ"))
        self.assertEqual(bounds, sorted(bounds, reverse=True))
        self.assertEqual(bounds[-1], Fraction(7, 40))

    def test_divisor_mollifier_prefers_the_variance_bound(self):
        chain = second_moment_chain(MollifierSpec.liouville_divisor(2))
        self.assertEqual(chain.value("∫C²dμ (mean square)"), Fraction(179, 420))
        self.assertEqual(chain.value("∫C²dμ"), Fraction(4, 9))
        self.assertEqual(chain.value("∫Im²dμ"), Fraction(17, 315))
        self.assertEqual(chain.value("∫|Z|²dμ (sum)"), Fraction(157, 315))

    def test_lambda2_has_only_the_mean_square_route(self):
        chain = second_moment_chain(MollifierSpec.liouville_k(2))
        with self.assertRaises(KeyError):
            chain.value("M1 = ∫C dμ")
        self.assertEqual(chain.value("∫C²dμ"), Fraction(1, 10))
        self.assertEqual(chain.value("∫Im²dμ"), Fraction(7, 15))
        self.assertEqual(chain.value("∫Im²dμ - ∫C²dμ"), Fraction(11, 30))

    def test_unit_mollifier(self):
        self.assertFalse(has_mean_square_closed_form(MollifierSpec.unit()))
        chain = second_moment_chain(MollifierSpec.unit())
        self.assertEqual(chain.value("∫C²dμ"), Fraction(4, 9))
        self.assertEqual(chain.value("∫Im²dμ"), Fraction(7, 90))

    def test_rejects_specs_without_a_second_moment(self):
        with self.assertRaises(ValueError):
            second_moment_chain(MollifierSpec.liouville_k(3))


class TestFourthMomentChain(unittest.TestCase):
    def test_values(self):
        chain = fourth_moment_chain()
        self.assertEqual(chain.value("M4 = ∫Re(Z⁴)dμ"), Fraction(1405, 22680))
        self.assertEqual(chain.value("∫C⁴dμ"), Fraction(49, 225))
        self.assertEqual(chain.value("∫Im⁴dμ"), Fraction(1, 100))
        self.assertEqual(chain.final, ("∫C²Im²dμ", Fraction(3761, 136080)))
        self.assertAlmostEqual(float(chain.final[1]), 0.0276381, delta=1e-7)
        self.assertEqual(chain.replay(), [])


class TestTailChain(unittest.TestCase):
    def test_values(self):
        chain = tail_lower_bound_chain()
        self.assertEqual(chain.value("head"), Fraction(97, 210))
        self.assertEqual(chain.value("∫|Z|²dμ"), Fraction(157, 315))
        self.assertEqual(chain.value("tail (diagonal mass)"), Fraction(23, 630))
        label, value = chain.final
        self.assertEqual(value, Fraction(23, 2520))
        self.assertGreater(value, Fraction(9, 1000))
        self.assertEqual(len(chain.notes), 1)
        self.assertEqual(chain.steps[-1].relation, Relation.GT)

    def test_no_note_away_from_the_printed_case(self):
        self.assertEqual(tail_lower_bound_chain(2).notes, [])


class TestBaselineChains(unittest.TestCase):
    def test_mollifier_baseline(self):
        chain = mollifier_baseline_chain()
        self.assertEqual(chain.value("∫Im²dμ"), Fraction(7, 90))
        self.assertEqual(chain.value("∫|Z|²dμ"), Fraction(47, 90))
        self.assertEqual(chain.value("improvement"), Fraction(2, 45))
        self.assertEqual(mollifier_baseline_chain(2).value("∫|Z|²dμ"), Fraction(317, 1440))

    def test_general_lower_bound(self):
        self.assertEqual(general_lower_bound(Fraction(2, 3), Fraction(11, 30), 1), Fraction(47, 90))
        self.assertEqual(general_lower_bound(Fraction(1, 2), Fraction(1, 2), 2), Fraction(1))
        with self.assertRaises(ValueError):
            general_lower_bound(1, 1, 0)

    def test_general_method_negative_delta(self):
        chain = general_method_chain([Fraction(2, 3), Fraction(11, 30)])
        self.assertEqual(chain.value("δ2"), -Fraction(7, 90))
        self.assertEqual(chain.value("∫Im²dμ"), Fraction(7, 90))
        self.assertEqual(chain.value("∫|Z|²dμ"), Fraction(47, 90))

    def test_general_method_positive_and_zero_delta(self):
        self.assertEqual(general_method_chain([0.5, 0.5]).value("∫C²dμ"), 0.5)
        self.assertEqual(general_method_chain([1, 1, 1]).final, ("∫C²dμ", 1))
        self.assertEqual(general_method_chain([Fraction(1, 2), Fraction(1, 3), Fraction(1, 5)]).value("δ3"),
                         Fraction(1, 5) - Fraction(1, 8))
        with self.assertRaises(ValueError):
            general_method_chain([Fraction(2, 3)])


class TestBoundReport(unittest.TestCase):
    def setUp(self):
        self.report = BoundReport("chain")
        self.report.given("a", Fraction(1, 3), "given")
        self.report.derive("b", ChainOp.SQUARE, ["a"], "square")
        self.report.derive("c", ChainOp.SQRT, ["b"], "root")

    def test_replay_detects_tampering(self):
        self.assertEqual(self.report.replay(), [])
        self.report.steps[1] = dataclasses.replace(self.report.steps[1], value=Fraction(1, 8))
        self.assertEqual(self.report.replay(), ["b", "c"])

    def test_dataframe(self):
        frame = self.report.to_dataframe()
        self.assertEqual(
            list(frame.columns), ["Quantity", "Relation", "Value", "Decimal", "Derivation", "Anchor"]
        )
        self.assertEqual(frame["Derivation"].tolist(), ["given", "square(a)", "sqrt(b)"])
        self.assertEqual(frame["Relation"].tolist(), ["=", ">=", ">="])
        self.assertAlmostEqual(frame["Decimal"].iloc[2], 1 / 3, places=15)

    def test_markdown(self):
        self.report.notes.append("a note")
        lines = self.report.to_markdown().splitlines()
        self.assertEqual(lines[0], "### chain")
        self.assertEqual(len(lines), 2 + 2 + 3 + 1)
        self.assertEqual(lines[-1], "- a note")

    def test_unknown_labels(self):
        with self.assertRaises(KeyError):
            self.report.value("missing")
        with self.assertRaises(KeyError):
            self.report.derive("d", ChainOp.HALF, ["missing"], "half")


if __name__ == "__main__":
    unittest.main()
