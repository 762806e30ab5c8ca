"""
Unit tests for composition functions, simple and grid functions, and norms.
"""

import math
import unittest

import numpy as np

from valuation_lab.exceptions import (
    ContainmentViolation,
    DimensionMismatch,
    GridMismatch,
    InvalidFunction,
    OverlappingInteriors,
)
from valuation_lab.functions import (
    CompositionFunction,
    FunctionSequence,
    GridFunction,
    SimpleFunction,
    builtin_xis,
    check_growth,
    common_grid,
    compose,
    indicator_distance,
    lattice_join_meet,
    lp_distance,
    lp_norm,
    parse_xi_expression,
    pullback,
    radial_membership_and_K_probe,
)
from valuation_lab.geometry import Box, Polytope, SLTransform, dyadic_inner_cubes


class TestCompositionFunction(unittest.TestCase):
    """Test cases for ξ parsing, evaluation and growth checks."""

    def test_from_expression(self):
        """Expressions with abs, sign, min and ^ evaluate elementwise."""
        xi = CompositionFunction.from_expression("sign(t)*min(abs(t)^3, abs(t)^2)", 2.0, 1.0)
        values = xi(np.array([-2.0, -0.5, 0.0, 0.5, 2.0]))
        np.testing.assert_allclose(values, [-4.0, -0.125, 0.0, 0.125, 4.0])
        self.assertIsInstance(xi(0.5), float)

    def test_rejects_nonzero_at_origin(self):
        """ξ(0) must be 0."""
        with self.assertRaises(InvalidFunction):
            CompositionFunction.from_expression("t + 1")

    def test_rejects_foreign_names(self):
        """Only t and the allowed functions are accepted."""
        for text in ("x*t", "exp(t) - 1", "t +* 2", "f(t)"):
            with self.assertRaises(InvalidFunction):
                parse_xi_expression(text)

    def test_rejects_bad_exponent(self):
        """p < 1 or d < 0 are rejected."""
        with self.assertRaises(InvalidFunction):
            CompositionFunction(lambda t: t, exponent_p=0.5)
        with self.assertRaises(InvalidFunction):
            CompositionFunction(lambda t: t, growth_constant_d=-1.0)

    def test_growth_equality_case(self):
        """ξ(t) = 2|t|^p with d = 2 passes with ratio exactly 2."""
        xi = CompositionFunction.from_expression("2*abs(t)**2", 2.0, 2.0)
        report = check_growth(xi)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.max_ratio, 2.0, places=12)

    def test_growth_violation_at_zero(self):
        """ξ(t) = |t| with p = 2 blows up as t -> 0."""
        xi = CompositionFunction.from_expression("abs(t)", 2.0, 1.0)
        report = check_growth(xi)
        self.assertFalse(report.passed)
        self.assertAlmostEqual(abs(report.argmax_t), 1e-8, delta=1e-12)

    def test_growth_violation_at_infinity(self):
        """ξ(t) = |t|^4 with p = 2 blows up as t -> ∞."""
        xi = CompositionFunction.from_expression("abs(t)**4", 2.0, 1.0)
        report = check_growth(xi)
        self.assertFalse(report.passed)
        self.assertAlmostEqual(abs(report.argmax_t), 1e8, delta=1.0)

    def test_builtin_family_growth(self):
        """Every built-in ξ satisfies its recorded bound."""
        for p in (1.0, 2.0, 3.0, 1.5):
            xis = builtin_xis(p)
            self.assertEqual(len(xis), 6)
            for xi in xis:
                self.assertTrue(xi.in_class_A_tilde(), xi.label)

    def test_class_a(self):
        """Linear growth membership for p = 1 members."""
        signed = builtin_xis(1.0)[0]
        self.assertTrue(signed.in_class_A())
        self.assertFalse(builtin_xis(2.0)[0].in_class_A())

    def test_from_samples(self):
        """Piecewise-linear interpolation through the samples and the origin."""
        xi = CompositionFunction.from_samples([-1.0, 1.0, 2.0], [-1.0, 1.0, 4.0], 2.0)
        self.assertEqual(xi(0.0), 0.0)
        self.assertAlmostEqual(xi(1.5), 2.5)
        self.assertAlmostEqual(xi.growth_constant_d, 1.0)

    def test_to_dict(self):
        """Expression-backed ξ export their parameters."""
        xi = builtin_xis(2.0)[2]
        self.assertEqual(xi.to_dict()["label"], "even_power")
        with self.assertRaises(InvalidFunction):
            CompositionFunction(lambda t: t).to_dict()


class TestSimpleFunction(unittest.TestCase):
    """Test cases for simple functions and their norms."""

    def setUp(self):
        """Set up test fixtures."""
        self.square = Box.cube((0.0, 0.0), 1.0)

    def test_lp_norm_square(self):
        """‖3·1_[0,1]^2‖_{L^2(μ_2)} = 3·(2/3)^{1/2}."""
        h = SimpleFunction.indicator(self.square, 3.0)
        self.assertAlmostEqual(lp_norm(h, 2.0), 3.0 * math.sqrt(2 / 3), places=13)
        self.assertEqual(lp_norm(SimpleFunction.zero(2), 2.0), 0.0)

    def test_lp_norm_additive(self):
        """p = 1 norms add over disjoint pieces."""
        other = Polytope([[2, 0], [3, 0], [3, 1], [2, 1]])
        h = SimpleFunction([(1.0, self.square), (1.0, other)])
        self.assertAlmostEqual(lp_norm(h, 1.0), 2 / 3 + other.mu_measure, places=13)

    def test_lp_norm_homogeneous(self):
        """lp_norm(c·h) = |c|·lp_norm(h)."""
        h = SimpleFunction([(2.0, self.square), (-1.0, Box((1.0, 0.0), (2.0, 1.0)))])
        self.assertAlmostEqual(lp_norm(h.scaled(-3.0), 3.0), 3.0 * lp_norm(h, 3.0), places=12)

    def test_overlapping_supports(self):
        """Overlapping interiors are rejected; shared faces are allowed."""
        with self.assertRaises(OverlappingInteriors):
            SimpleFunction([(1.0, self.square), (1.0, Box((0.5, 0.5), (1.5, 1.5)))])
        h = SimpleFunction([(1.0, self.square), (2.0, Box((1.0, 0.0), (2.0, 1.0)))])
        self.assertEqual(len(h), 2)

    def test_dimension_mismatch(self):
        """All supports must share the ambient dimension."""
        with self.assertRaises(DimensionMismatch):
            SimpleFunction([(1.0, self.square), (1.0, Box.cube((5.0, 5.0, 5.0), 1.0))])

    def test_compose_drops_zero_pieces(self):
        """ξ∘h keeps only pieces with ξ(α) != 0."""
        xi = builtin_xis(1.0)[4]
        h = SimpleFunction([(2.0, self.square), (0.0, Box((1.0, 0.0), (2.0, 1.0)))])
        composed = compose(xi, h)
        self.assertEqual(composed.coefficients, [0.5])

    def test_pullback_shear(self):
        """The shear maps the unit square to the parallelogram (0,0),(1,0),(2,1),(1,1)."""
        phi = SLTransform([[1.0, 1.0], [0.0, 1.0]])
        image = pullback(SimpleFunction.indicator(self.square), phi)
        expected = Polytope([[0, 0], [1, 0], [2, 1], [1, 1]])
        self.assertEqual(image.supports[0], expected)
        self.assertAlmostEqual(image.supports[0].volume, 1.0, places=14)

    def test_pullback_group_action(self):
        """Pulling back by φ then ψ equals pulling back by ψφ."""
        phi = SLTransform([[1.0, 0.5], [0.0, 1.0]])
        psi = SLTransform([[2.0, 0.0], [1.0, 0.5]])
        h = SimpleFunction.indicator(Polytope.simplex(2), 1.0)
        twice = pullback(pullback(h, phi), psi)
        once = pullback(h, psi.compose(phi))
        self.assertEqual(twice.supports[0], once.supports[0])


class TestGridFunction(unittest.TestCase):
    """Test cases for grid functions and the function lattice."""

    def setUp(self):
        """Set up test fixtures."""
        self.h = GridFunction(0.5, {(0, 0): 1.0, (1, 0): -2.0, (0, 1): 3.0}, 2)
        self.f = GridFunction(0.5, {(0, 0): 2.0, (1, 1): 1.0, (0, 1): -1.0}, 2)

    def test_zero_cells_dropped(self):
        """Zero-valued cells are not stored."""
        grid = GridFunction(0.5, {(0, 0): 0.0, (1, 1): 1.0}, 2)
        self.assertEqual(list(grid.cells), [(1, 1)])

    def test_join_meet(self):
        """Cellwise max/min with absent cells as 0."""
        join, meet = lattice_join_meet(self.h, self.f)
        self.assertEqual(dict(join.cells), {(0, 0): 2.0, (0, 1): 3.0, (1, 1): 1.0})
        self.assertEqual(dict(meet.cells), {(0, 0): 1.0, (1, 0): -2.0, (0, 1): -1.0})

    def test_lattice_laws(self):
        """Commutativity, idempotence and absorption."""
        join, meet = lattice_join_meet(self.h, self.f)
        self.assertEqual(join, lattice_join_meet(self.f, self.h)[0])
        self.assertEqual(lattice_join_meet(self.h, self.h), (self.h, self.h))
        self.assertEqual(lattice_join_meet(self.h, meet)[0], self.h)

    def test_norm_is_valuation(self):
        """‖h∨f‖^p + ‖h∧f‖^p = ‖h‖^p + ‖f‖^p for nonnegative h, f."""
        h, f = self.h.positive_part(), self.f.positive_part()
        join, meet = lattice_join_meet(h, f)
        p = 2.0
        left = lp_norm(join, p) ** p + lp_norm(meet, p) ** p
        right = lp_norm(h, p) ** p + lp_norm(f, p) ** p
        self.assertAlmostEqual(left, right, delta=1e-12 * right)

    def test_grid_mismatch(self):
        """Lattice operations need a common grid."""
        with self.assertRaises(GridMismatch):
            lattice_join_meet(self.h, GridFunction(0.25, {(0, 0): 1.0}, 2))

    def test_common_grid(self):
        """Refinement preserves the function and its norm."""
        coarse, fine = common_grid(self.h, GridFunction(0.25, {(0, 0): 1.0}, 2))
        self.assertEqual(coarse.delta, 0.25)
        self.assertEqual(len(coarse.cells), 12)
        self.assertAlmostEqual(lp_norm(coarse, 1.0), lp_norm(self.h, 1.0), places=13)

    def test_simple_round_trip(self):
        """Grid -> simple -> grid is the identity."""
        self.assertEqual(GridFunction.from_simple(self.h.to_simple(), 0.5), self.h)
        with self.assertRaises(GridMismatch):
            GridFunction.from_simple(SimpleFunction.indicator(Box((0.1, 0.0), (0.6, 0.5))), 0.5)

    def test_evaluate(self):
        """Point values read the containing cell."""
        values = self.h.evaluate([[0.1, 0.1], [0.6, 0.2], [5.0, 5.0]])
        np.testing.assert_array_equal(values, [1.0, -2.0, 0.0])

    def test_sign_parts(self):
        """h = (h∨0) + (h∧0)."""
        total = self.h.positive_part().values.sum() + self.h.negative_part().values.sum()
        self.assertEqual(total, self.h.values.sum())

    def test_compose_monotone_distributes(self):
        """ξ∘(h∨f) = (ξ∘h)∨(ξ∘f) for nondecreasing ξ."""
        xi = builtin_xis(2.0)[0]
        join = lattice_join_meet(self.h, self.f)[0]
        composed_join = lattice_join_meet(compose(xi, self.h), compose(xi, self.f))[0]
        self.assertEqual(compose(xi, join), composed_join)


class TestDistances(unittest.TestCase):
    """Test cases for indicator distances and sequences."""

    def test_identical_sets(self):
        """Distance of P to itself is 0."""
        triangle = Polytope.simplex(2)
        result = indicator_distance(2.0, triangle, triangle, 1.0)
        self.assertAlmostEqual(result.exact, 0.0, places=14)

    def test_triangle_inner_cubes(self):
        """δ=1/4 cubes in the triangle: gap 1/8 and exact distance below the bound."""
        triangle = Polytope.simplex(2)
        cells, gap = dyadic_inner_cubes(triangle, 0.25)
        result = indicator_distance(1.0, cells, triangle, 1.0)
        covered = sum(cell.mu_measure for cell in cells)
        self.assertAlmostEqual(result.lebesgue_gap, 1 / 8, places=14)
        self.assertAlmostEqual(result.exact, triangle.mu_measure - covered, places=14)
        self.assertAlmostEqual(result.bound, 1 / 8, places=14)
        self.assertLessEqual(result.exact, result.bound)

    def test_containment_violation(self):
        """An approximation leaving the target needs a ball radius."""
        triangle = Polytope.simplex(2)
        outside = Box((0.5, 0.5), (1.0, 1.0))
        with self.assertRaises(ContainmentViolation):
            indicator_distance(1.0, outside, triangle, 1.0)
        result = indicator_distance(1.0, outside, triangle, 2.0, radius=2.0)
        self.assertLessEqual(result.exact, result.bound)

    def test_coefficient_sequence(self):
        """‖(α+1/k)1_P - α1_P‖ = (1/k)(2/3)^{1/p} on the unit square."""
        sequence = FunctionSequence.coefficient_sequence(1.5, Box.cube((0.0, 0.0), 1.0))
        for k in (1, 4, 1024):
            distance = sequence.distance_to_limit(k, 2.0)
            self.assertAlmostEqual(distance, math.sqrt(2 / 3) / k, places=13)

    def test_dyadic_sequence(self):
        """Distances of the inner-cube sequence decrease."""
        sequence = FunctionSequence.dyadic_sequence(1.0, Polytope.simplex(2), offset=1)
        distances = [sequence.distance_to_limit(k, 1.0) for k in range(1, 5)]
        self.assertTrue(all(b < a for a, b in zip(distances, distances[1:])))

    def test_lp_distance_straddle(self):
        """A piece straddling two target supports is rejected."""
        target = SimpleFunction(
            [(1.0, Box((0.0, 0.0), (1.0, 1.0))), (2.0, Box((1.0, 0.0), (2.0, 1.0)))]
        )
        approx = SimpleFunction.indicator(Box((0.5, 0.0), (1.5, 1.0)))
        with self.assertRaises(ContainmentViolation):
            lp_distance(approx, target, 1.0)


class TestRadialProbe(unittest.TestCase):
    """Test cases for the radial membership and divergence probe."""

    def test_linear_xi_diverges(self):
        """ξ(t)=|t|, n=2, p=2, γ=3: h ∈ L^2(μ_2) yet the reduced integral diverges."""
        xi = CompositionFunction.from_expression("abs(t)", 2.0, 1.0)
        report = radial_membership_and_K_probe(xi, 2.0, 2, 3.0)
        self.assertTrue(report.details["in_space"])
        self.assertEqual(report.verdict, "divergent")
        self.assertFalse(report.passed)
        thousand = [row for row in report.rows if row["R"] == 1000.0][0]
        self.assertAlmostEqual(thousand["reduced_integral"], 999.0, delta=1e-6 * 999.0)

    def test_linear_xi_fast_decay_converges(self):
        """γ=5 gives ∫ r^-2 dr, convergent."""
        xi = CompositionFunction.from_expression("abs(t)", 2.0, 1.0)
        report = radial_membership_and_K_probe(xi, 2.0, 2, 5.0)
        self.assertEqual(report.verdict, "convergent")
        self.assertTrue(report.passed)

    def test_growth_bounded_xi_converges(self):
        """ξ(t)=t^2 converges for every γ with γp > n+2."""
        xi = CompositionFunction.from_expression("t**2", 2.0, 1.0)
        for gamma in (2.5, 3.0, 5.0):
            report = radial_membership_and_K_probe(xi, 2.0, 2, gamma)
            self.assertTrue(report.details["in_space"])
            self.assertEqual(report.verdict, "convergent")
            self.assertTrue(report.details["dominated_by_growth_bound"])

    def test_rejects_nonpositive_gamma(self):
        """γ must be positive."""
        xi = builtin_xis(1.0)[0]
        with self.assertRaises(ValueError):
            radial_membership_and_K_probe(xi, 1.0, 2, 0.0)


if __name__ == "__main__":
    unittest.main()
