"""
Unit tests for the moment operator, the family Psi and the black-box residuals.
"""

import json
import os
import tempfile
import unittest

import numpy as np

from valuation_lab.exceptions import (
    DegenerateSupport,
    DimensionMismatch,
    GridMismatch,
    InvalidParameter,
    InvalidSpec,
    MixedSigns,
    OverlappingInteriors,
    RotationInHighDim,
)
from valuation_lab.functions import CompositionFunction, GridFunction, SimpleFunction, builtin_xis
from valuation_lab.geometry import Box, Polytope, SLTransform, random_sl_matrix
from valuation_lab.valuation import (
    RHO,
    FunctionValuation,
    MonteCarloSampler,
    PsiValuation,
    RotationLeakValuation,
    SquaredMomentValuation,
    ValuationSpec,
    agreement_residual,
    classification_evidence,
    covariance_residual,
    decomposition_residual,
    extract_xi_and_s,
    indicator_density,
    moment_monte_carlo,
    moment_of_simple,
    norm_bound_residual,
    polytope_valuation_residual,
    psi_evaluate,
    rotation_term,
    sign_split_residual,
    valuation_residual,
    weak_simplicity_residual,
    zero_structure,
)

UNIT_SQUARE_MOMENT = np.array([[1 / 3, 1 / 4], [1 / 4, 1 / 3]])


def signed_square_xi() -> CompositionFunction:
    """ξ(t) = t|t| for p = 2."""
    return builtin_xis(2.0)[0]


class TestMoment(unittest.TestCase):
    """Test cases for K on simple and grid functions."""

    def setUp(self):
        """Set up test fixtures."""
        self.square = Box.cube((0.0, 0.0), 1.0)

    def test_scaled_square(self):
        """K(3·1_[0,1]^2) = [[1, 3/4], [3/4, 1]]."""
        value = moment_of_simple(SimpleFunction.indicator(self.square, 3.0))
        np.testing.assert_allclose(value, [[1.0, 0.75], [0.75, 1.0]], atol=1e-15)

    def test_zero_function(self):
        """K(0) = 0."""
        np.testing.assert_array_equal(moment_of_simple(SimpleFunction.zero(3)), np.zeros((3, 3)))

    def test_two_triangles_tile_square(self):
        """Additivity over the two triangles of the unit square."""
        lower = Polytope([[0, 0], [1, 0], [1, 1]])
        upper = Polytope([[0, 0], [1, 1], [0, 1]])
        value = moment_of_simple(SimpleFunction([(1.0, lower), (1.0, upper)]))
        np.testing.assert_allclose(value, UNIT_SQUARE_MOMENT, atol=1e-15)

    def test_grid_and_simple_agree(self):
        """Grid functions integrate like their simple-function form."""
        grid = GridFunction(0.25, {(0, 0): 1.5, (-2, 3): -2.0, (1, 1): 0.5}, 2)
        simple = grid.to_simple()
        np.testing.assert_allclose(moment_of_simple(grid), moment_of_simple(simple), atol=1e-15)


class TestValuationSpec(unittest.TestCase):
    """Test cases for ValuationSpec and Psi."""

    def test_psi_example(self):
        """n=2, ξ(t)=t|t|, s=5, h=2·1_[0,1]^2 gives [[4/3, -4], [6, 4/3]]."""
        spec = ValuationSpec(2, 2.0, signed_square_xi(), 5.0)
        h = SimpleFunction.indicator(Box.cube((0.0, 0.0), 1.0), 2.0)
        np.testing.assert_allclose(psi_evaluate(spec, h), [[4 / 3, -4.0], [6.0, 4 / 3]], atol=1e-14)

    def test_evaluation_keeps_no_state(self):
        """Evaluating Psi leaves the valuation object unchanged."""
        psi = PsiValuation(ValuationSpec(2, 2.0, signed_square_xi(), 5.0))
        before = dict(vars(psi))
        h = SimpleFunction.indicator(Box.cube((0.0, 0.0), 1.0), 2.0)
        np.testing.assert_array_equal(psi(h), psi(h))
        self.assertEqual(vars(psi).keys(), before.keys())
        for name, value in before.items():
            self.assertIs(vars(psi)[name], value)

    def test_psi_at_zero(self):
        """Psi(0) = sρ for n = 2 and 0 for n >= 3."""
        planar = ValuationSpec(2, 1.0, builtin_xis(1.0)[1], 5.0)
        planar_zero = psi_evaluate(planar, SimpleFunction.zero(2))
        np.testing.assert_allclose(planar_zero, 5.0 * RHO, atol=1e-12)
        spatial = ValuationSpec(3, 1.0, builtin_xis(1.0)[1])
        zero = SimpleFunction.zero(3)
        np.testing.assert_array_equal(psi_evaluate(spatial, zero), np.zeros((3, 3)))

    def test_rotation_in_high_dim(self):
        """s != 0 with n = 3 is rejected, naming the rotation-free form."""
        with self.assertRaises(RotationInHighDim) as ctx:
            ValuationSpec(3, 1.0, builtin_xis(1.0)[0], 0.1)
        self.assertIn("no rotation term", str(ctx.exception))

    def test_growth_violating_xi(self):
        """ξ(t)=|t| is not growth-bounded for p = 2."""
        xi = CompositionFunction.from_expression("abs(t)", 2.0, 1.0)
        with self.assertRaises(InvalidSpec):
            ValuationSpec(2, 2.0, xi)

    def test_dimension_mismatch(self):
        """Psi on R^2 rejects a function on R^3."""
        spec = ValuationSpec(2, 1.0, builtin_xis(1.0)[0])
        with self.assertRaises(DimensionMismatch):
            psi_evaluate(spec, SimpleFunction.zero(3))
        with self.assertRaises(DimensionMismatch):
            PsiValuation(spec)(SimpleFunction.zero(3))

    def test_rotation_term(self):
        """ρ embedded in the first two coordinates."""
        term = rotation_term(3)
        np.testing.assert_array_equal(term[:2, :2], RHO)
        self.assertEqual(float(np.abs(term[2]).sum() + np.abs(term[:, 2]).sum()), 0.0)

    def test_rho_invariance(self):
        """φρφᵗ = ρ for random SL(2) matrices."""
        for seed in range(20):
            phi = random_sl_matrix(seed, 2, 4, 1.0)
            np.testing.assert_allclose(phi.congruence(RHO), RHO, atol=1e-12)

    def test_valuation_to_json(self):
        """Valuations describe themselves as JSON."""
        valuation = PsiValuation(ValuationSpec(2, 2.0, signed_square_xi(), 1.0))
        data = json.loads(valuation.to_json())
        self.assertEqual(data["valuation_type"], "PsiValuation")
        self.assertEqual(data["parameters"]["spec"]["s"], 1.0)
        with tempfile.TemporaryDirectory() as tmpdir:
            filepath = os.path.join(tmpdir, "valuation.json")
            valuation.save_json(filepath)
            with open(filepath, "r") as f:
                self.assertEqual(json.load(f)["dim"], 2)


class TestResiduals(unittest.TestCase):
    """Test cases for valuation, covariance and decomposition residuals."""

    def setUp(self):
        """Set up test fixtures."""
        self.psi = PsiValuation(ValuationSpec(2, 2.0, signed_square_xi(), 5.0))
        self.cell = GridFunction(1.0, {(0, 0): 1.0}, 2)
        self.neighbor = GridFunction(1.0, {(1, 0): 1.0}, 2)

    def test_valuation_identity_psi(self):
        """Psi satisfies the valuation identity on grid pairs."""
        h = GridFunction(0.5, {(0, 0): 1.0, (1, 0): -2.0, (0, 1): 3.0}, 2)
        f = GridFunction(0.5, {(0, 0): 2.0, (1, 1): 1.0, (0, 1): -1.0}, 2)
        self.assertLessEqual(valuation_residual(self.psi, h, f), 1e-10)
        self.assertEqual(valuation_residual(self.psi, h, h), 0.0)

    def test_squared_moment_fails(self):
        """K(h)K(h) violates the valuation identity on two unit cells."""
        broken = SquaredMomentValuation(2)
        self.assertGreater(valuation_residual(broken, self.cell, self.neighbor), 1e-3)

    def test_grid_mismatch(self):
        """Valuation residuals need a common grid."""
        with self.assertRaises(GridMismatch):
            valuation_residual(self.psi, self.cell, GridFunction(0.5, {(0, 0): 1.0}, 2))

    def test_covariance_psi(self):
        """Psi is SL(2) covariant, including its ρ term."""
        h = SimpleFunction.indicator(Box.cube((0.0, 0.0), 1.0), 2.0)
        for seed in range(5):
            phi = random_sl_matrix(seed, 2, 4, 1.0)
            self.assertLessEqual(covariance_residual(self.psi, h, phi), 1e-9)
        self.assertLessEqual(covariance_residual(self.psi, SimpleFunction.zero(2), phi), 1e-12)

    def test_covariance_psi_in_four_dimensions(self):
        """Psi is SL(4) covariant on a two-piece function."""
        psi = PsiValuation(ValuationSpec(4, 2.0, signed_square_xi()))
        h = SimpleFunction(
            [(2.0, Box.cube((0.0,) * 4, 1.0)), (-1.5, Box.cube((1.0, 0.0, 0.0, 0.0), 1.0))], dim=4
        )
        for seed in range(3):
            phi = random_sl_matrix(seed, 4, 6, 1.0)
            self.assertLessEqual(covariance_residual(psi, h, phi), 1e-9)

    def test_covariance_non_unimodular(self):
        """diag(2, 1) is not in SL(2); the moment operator is not covariant under it."""
        moment = FunctionValuation(moment_of_simple, 2)
        h = SimpleFunction.indicator(Box.cube((0.0, 0.0), 1.0))
        self.assertGreater(covariance_residual(moment, h, np.diag([2.0, 1.0])), 1e-3)

    def test_rotation_leak_breaks_covariance(self):
        """ρ added in R^3 is not covariant."""
        leak = RotationLeakValuation(3, builtin_xis(1.0)[0])
        shear = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
        phi = SLTransform(np.diag([2.0, 0.5, 1.0]) @ shear)
        h = SimpleFunction.indicator(Box.cube((0.0, 0.0, 0.0), 1.0))
        self.assertGreater(covariance_residual(leak, h, phi), 1e-3)

    def test_decomposition(self):
        """Two disjoint unit cells with α = 2, 3."""
        pieces = [(2.0, Box.cube((0.0, 0.0), 1.0)), (3.0, Box.cube((1.0, 0.0), 1.0))]
        self.assertLessEqual(decomposition_residual(self.psi, pieces), 1e-10)
        self.assertEqual(decomposition_residual(self.psi, pieces[:1]), 0.0)

    def test_decomposition_errors(self):
        """Mixed signs and overlapping supports are rejected."""
        cell, right = Box.cube((0.0, 0.0), 1.0), Box.cube((1.0, 0.0), 1.0)
        with self.assertRaises(MixedSigns):
            decomposition_residual(self.psi, [(2.0, cell), (-3.0, right)])
        with self.assertRaises(OverlappingInteriors):
            decomposition_residual(self.psi, [(2.0, cell), (3.0, Box.cube((0.5, 0.0), 1.0))])

    def test_sign_split(self):
        """V(h∨0) + V(h∧0) = V(h) + V(0)."""
        h = GridFunction(0.25, {(0, 0): 1.0, (1, 2): -2.5, (-1, 0): 0.5}, 2)
        self.assertLessEqual(sign_split_residual(self.psi, h), 1e-10)

    def test_weak_simplicity(self):
        """Psi(α 1_P) = Psi(0) on lower-dimensional P."""
        segment = Polytope([[0.0, 0.0], [1.0, 2.0]])
        self.assertEqual(weak_simplicity_residual(self.psi, 2.0, [segment]), 0.0)
        with self.assertRaises(ValueError):
            weak_simplicity_residual(self.psi, 2.0, [Polytope.simplex(2)])

    def test_polytope_valuation(self):
        """Y(P) = Psi(α 1_P) is a valuation on slices."""
        square = Box.cube((0.0, 0.0), 1.0).to_polytope()
        residual = polytope_valuation_residual(self.psi, 1.5, square, [1.0, 1.0], 0.8, 1.2)
        self.assertLessEqual(residual, 1e-10)

    def test_norm_bound(self):
        """‖K(ξ∘h)‖ <= d ‖h‖^p for growth-bounded ξ."""
        h = SimpleFunction([(2.0, Box.cube((0.0, 0.0), 1.0)), (-1.0, Box.cube((1.0, 1.0), 1.0))])
        for xi in builtin_xis(2.0):
            self.assertEqual(norm_bound_residual(xi, h), 0.0)

    def test_agreement(self):
        """Valuations differing by a constant agree up to their value at 0."""
        shifted = FunctionValuation(lambda h: self.psi(h) + np.eye(2), 2, exponent_p=2.0)
        functions = [self.cell, SimpleFunction.indicator(Polytope.simplex(2), -1.0)]
        self.assertLessEqual(agreement_residual(self.psi, shifted, functions), 1e-12)


class TestZeroStructure(unittest.TestCase):
    """Test cases for the value at the zero function."""

    def test_planar(self):
        """n=2, s=5: conformant with ŝ = 5."""
        report = zero_structure(PsiValuation(ValuationSpec(2, 1.0, builtin_xis(1.0)[0], 5.0)))
        self.assertTrue(report.conformant)
        self.assertAlmostEqual(report.rotation_coefficient, 5.0, places=12)
        self.assertEqual(report.invariance_residual, 0.0)

    def test_spatial(self):
        """n=3, s=0: conformant zero matrix."""
        report = zero_structure(PsiValuation(ValuationSpec(3, 1.0, builtin_xis(1.0)[0])))
        self.assertTrue(report.conformant)
        self.assertEqual(report.value, np.zeros((3, 3)).tolist())

    def test_symmetric_constant(self):
        """A nonzero symmetric constant at 0 is not conformant."""
        constant = FunctionValuation(lambda h: np.eye(2), 2)
        report = zero_structure(constant)
        self.assertFalse(report.conformant)
        self.assertGreater(report.invariance_residual, 0.0)

    def test_rotation_leak(self):
        """ρ in R^3 is not conformant."""
        report = zero_structure(RotationLeakValuation(3, builtin_xis(1.0)[0]))
        self.assertFalse(report.conformant)


class TestExtraction(unittest.TestCase):
    """Test cases for recovering (ξ, s) from a black box."""

    def setUp(self):
        """Set up test fixtures."""
        self.square = Box.cube((0.0, 0.0), 1.0)

    def test_round_trip(self):
        """ξ(t)=t|t|, s=5 on the unit square."""
        psi = PsiValuation(ValuationSpec(2, 2.0, signed_square_xi(), 5.0))
        report = extract_xi_and_s(psi, [-2.0, -1.0, 1.0, 2.0], self.square)
        np.testing.assert_allclose(report.xi_hat, [-4.0, -1.0, 1.0, 4.0], atol=1e-12)
        self.assertAlmostEqual(report.s_hat, 5.0, places=10)
        self.assertLessEqual(report.max_fit_residual, 1e-10)

    def test_builtin_family(self):
        """Every built-in ξ and s in {-5, 0, 5} is recovered on a 17-point grid."""
        alphas = np.linspace(-2.0, 2.0, 17)
        for xi in builtin_xis(2.0):
            for s in (-5.0, 0.0, 5.0):
                psi = PsiValuation(ValuationSpec(2, 2.0, xi, s))
                report = extract_xi_and_s(psi, alphas, self.square)
                np.testing.assert_allclose(report.xi_hat, xi(alphas), atol=1e-9, err_msg=xi.label)
                self.assertAlmostEqual(report.s_hat, s, delta=1e-10)
                self.assertLessEqual(report.max_fit_residual, 1e-10)

    def test_symmetric_without_rotation(self):
        """s = 0 gives ŝ = 0."""
        psi = PsiValuation(ValuationSpec(2, 1.0, builtin_xis(1.0)[1]))
        report = extract_xi_and_s(psi, [-1.0, 1.0], Polytope.simplex(2))
        self.assertEqual(report.s_hat, 0.0)

    def test_degenerate_support(self):
        """A segment has zero moment."""
        psi = PsiValuation(ValuationSpec(2, 1.0, builtin_xis(1.0)[1]))
        with self.assertRaises(DegenerateSupport):
            extract_xi_and_s(psi, [1.0], Polytope([[0.0, 0.0], [1.0, 1.0]]))

    def test_classification_evidence(self):
        """Psi is reproduced from its extracted (ξ̂, ŝ) at the probed coefficients."""
        psi = PsiValuation(ValuationSpec(2, 2.0, signed_square_xi(), -5.0))
        alphas = [-2.0, -1.0, 0.5, 1.0, 2.0]
        functions = [
            SimpleFunction([(1.0, Box.cube((0.0, 0.0), 1.0)), (-2.0, Box.cube((1.0, 0.0), 1.0))]),
            SimpleFunction.indicator(Polytope.simplex(2), 0.5),
        ]
        report = classification_evidence(psi, alphas, self.square, functions)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.details["s_hat"], -5.0, places=10)


class TestMonteCarlo(unittest.TestCase):
    """Test cases for the Monte Carlo moment oracle."""

    def test_unit_square(self):
        """Entry (1,1) within 4 standard errors of 1/3."""
        square = Box.cube((0.0, 0.0), 1.0)
        sampler = MonteCarloSampler(square, 200_000, seed=3)
        estimate, stderr = moment_monte_carlo(indicator_density(square), sampler)
        self.assertLessEqual(abs(estimate[0, 0] - 1 / 3), 4 * stderr[0, 0])
        self.assertLessEqual(abs(estimate[0, 1] - 1 / 4), 4 * stderr[0, 1])

    def test_zero_density(self):
        """Zero density gives zero estimate and stderr."""
        sampler = MonteCarloSampler(Box.cube((0.0, 0.0), 1.0), 1000, seed=0)
        estimate, stderr = moment_monte_carlo(lambda points: np.zeros(len(points)), sampler)
        np.testing.assert_array_equal(estimate, np.zeros((2, 2)))
        np.testing.assert_array_equal(stderr, np.zeros((2, 2)))

    def test_deterministic(self):
        """Same seed, same estimate."""
        triangle = Polytope.simplex(2)
        sampler = MonteCarloSampler(triangle.bounding_box(), 5000, seed=9, chunk=1000)
        first = moment_monte_carlo(indicator_density(triangle), sampler)
        second = moment_monte_carlo(indicator_density(triangle), sampler)
        np.testing.assert_array_equal(first[0], second[0])

    def test_stderr_scaling(self):
        """Quadrupling the samples roughly halves the standard error."""
        square = Box.cube((0.0, 0.0), 1.0)
        density = indicator_density(square)
        small = moment_monte_carlo(density, MonteCarloSampler(square, 40_000, 1))[1]
        large = moment_monte_carlo(density, MonteCarloSampler(square, 160_000, 1))[1]
        np.testing.assert_allclose(large / small, 0.5, rtol=0.05)

    def test_too_few_samples(self):
        """At least two samples are needed for a standard error."""
        with self.assertRaises(InvalidParameter):
            MonteCarloSampler(Box.cube((0.0,), 1.0), 1, seed=0)


if __name__ == "__main__":
    unittest.main()
