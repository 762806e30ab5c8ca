"""
The moment operator K and the covariant valuation family Ψ(h) = K(ξ∘h) + s ρ.

Besides evaluation, this module measures how far an arbitrary black-box valuation is
from each defining property (valuation identity, SL(n) covariance, zero structure) and
recovers (ξ, s) from a valuation that has them.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .base import BlackBoxValuation
from .config import DEFAULT_TOLERANCES, MONTE_CARLO_CHUNK, Tolerances
from .exceptions import (
    DegenerateSupport,
    DimensionMismatch,
    InvalidParameter,
    InvalidSpec,
    MixedSigns,
    RotationInHighDim,
)
from .functions import (
    CompositionFunction,
    Function,
    GridFunction,
    SimpleFunction,
    check_growth,
    compose,
    lattice_join_meet,
    lp_norm,
    pullback,
)
from .geometry import (
    Box,
    MomentMatrix,
    Polytope,
    SLTransform,
    Support,
    _box_moments_sum,
    _check_dimension,
    _frozen,
    halfspace_slice,
    slab,
    zero_structure_transforms,
)
from .reports import ExtractionReport, ProbeReport, ZeroReport

logger = logging.getLogger(__name__)

RHO = _frozen(np.array([[0.0, -1.0], [1.0, 0.0]]))


def rotation_term(n: int) -> np.ndarray:
    """ρ in the first two coordinates of R^n (the planar quarter turn when n = 2)."""
    matrix = np.zeros((n, n))
    matrix[:2, :2] = RHO
    return matrix


@dataclass(frozen=True)
class ValuationSpec:
    """
    Parameters (n, p, ξ, s) of Ψ(h) = K(ξ∘h) + s ρ.

    Attributes:
        dim: Ambient dimension n
        exponent_p: Exponent p of L^p(μ_n)
        xi: Composition function, growth-bounded for exponent p
        rotation_coefficient: s; must be 0 when n >= 3

    Raises:
        RotationInHighDim: If s != 0 with n >= 3
        InvalidSpec: If ξ fails the sampled growth check for exponent p
    """

    dim: int
    exponent_p: float
    xi: CompositionFunction
    rotation_coefficient: float = 0.0

    def __post_init__(self):
        _check_dimension(self.dim)
        if self.exponent_p < 1:
            raise InvalidSpec(f"exponent p must be >= 1, got {self.exponent_p}")
        if not math.isfinite(self.rotation_coefficient):
            raise InvalidSpec(
                f"rotation coefficient must be finite, got {self.rotation_coefficient}"
            )
        if self.dim >= 3 and self.rotation_coefficient != 0.0:
            raise RotationInHighDim(
                f"s = {self.rotation_coefficient} with n = {self.dim}: for n >= 3 the form is "
                "Psi(h) = K(xi o h) with no rotation term"
            )
        growth = check_growth(self.xi, p=self.exponent_p)
        if not growth.passed:
            raise InvalidSpec(
                f"xi {self.xi.label!r} is not growth-bounded for p = {self.exponent_p}: "
                f"{growth.summary}"
            )

    def to_dict(self) -> Dict[str, object]:
        return {
            "n": self.dim,
            "p": self.exponent_p,
            "xi": self.xi.to_dict(),
            "s": self.rotation_coefficient,
        }


def moment_of_simple(h: Function) -> MomentMatrix:
    """
    K(h) = Σ α_i M(P_i) for a simple or grid function.

    Box supports are integrated together in closed form; other supports through
    their cached polytope moments.
    """
    n = h.dim
    if isinstance(h, GridFunction):
        if not h.cells:
            return np.zeros((n, n))
        lower, upper = h.corners()
        return _box_moments_sum(lower, upper, h.values)
    total = np.zeros((n, n))
    boxes = [(alpha, support) for alpha, support in h.pieces if isinstance(support, Box)]
    if boxes:
        lower = np.array([support.lower for _, support in boxes])
        upper = np.array([support.upper for _, support in boxes])
        total += _box_moments_sum(lower, upper, np.array([alpha for alpha, _ in boxes]))
    for alpha, support in h.pieces:
        if not isinstance(support, Box):
            total += alpha * support.moment
    return total


def psi_evaluate(spec: ValuationSpec, h: Function) -> MomentMatrix:
    """
    Ψ(h) = K(ξ∘h) + s ρ (n = 2) or K(ξ∘h) (n >= 3).

    Raises:
        DimensionMismatch: If h does not live in R^n
    """
    if h.dim != spec.dim:
        raise DimensionMismatch(f"spec for R^{spec.dim} applied to a function on R^{h.dim}")
    value = moment_of_simple(compose(spec.xi, h))
    if spec.dim == 2:
        value = value + spec.rotation_coefficient * RHO
    return value


class PsiValuation(BlackBoxValuation):
    """The constructive valuation Ψ of a ValuationSpec."""

    def __init__(self, spec: ValuationSpec):
        exported = spec.to_dict() if spec.xi.expression else None
        super().__init__(spec.dim, spec.exponent_p, spec=exported)
        self.spec = spec

    def evaluate(self, h: SimpleFunction) -> MomentMatrix:
        return psi_evaluate(self.spec, h)


class FunctionValuation(BlackBoxValuation):
    """
    Wrap any callable SimpleFunction -> matrix as a black-box valuation.

    Args:
        evaluator: The callable
        dim: Ambient dimension
        exponent_p: Exponent of the function space
        serial: Whether the callable must not run concurrently
        label: Name echoed in JSON output
    """

    def __init__(
        self,
        evaluator: Callable[[SimpleFunction], np.ndarray],
        dim: int,
        exponent_p: float = 1.0,
        serial: bool = False,
        label: str = "function",
    ):
        super().__init__(dim, exponent_p, serial=serial, label=label)
        self.evaluator = evaluator

    def evaluate(self, h: SimpleFunction) -> MomentMatrix:
        return self.evaluator(h)


class SquaredMomentValuation(BlackBoxValuation):
    """V(h) = K(h) K(h), a matrix-valued map that is not a valuation."""

    def evaluate(self, h: SimpleFunction) -> MomentMatrix:
        moment = moment_of_simple(h)
        return moment @ moment


class RotationLeakValuation(BlackBoxValuation):
    """
    K(ξ∘h) + s ρ with ρ embedded in the first two coordinates, in any dimension.

    For n = 2 this is Ψ; for n >= 3 the rotation term breaks covariance and the zero
    structure.
    """

    def __init__(self, dim: int, xi: CompositionFunction, rotation_coefficient: float = 1.0):
        super().__init__(dim, xi.exponent_p, xi=xi.label, s=rotation_coefficient)
        self.xi = xi
        self.rotation_coefficient = rotation_coefficient

    def evaluate(self, h: SimpleFunction) -> MomentMatrix:
        leak = self.rotation_coefficient * rotation_term(self.dim)
        return moment_of_simple(compose(self.xi, h)) + leak


@dataclass(frozen=True)
class MonteCarloSampler:
    """
    Uniform sampling plan over a box.

    Attributes:
        region: Box the density is supported in
        sample_count: Number of uniform samples
        seed: Seed of the private random stream
        chunk: Samples drawn per batch
    """

    region: Box
    sample_count: int
    seed: int
    chunk: int = MONTE_CARLO_CHUNK

    def __post_init__(self):
        if self.sample_count < 2:
            raise InvalidParameter(f"sample_count must be at least 2, got {self.sample_count}")


def moment_monte_carlo(
    density: Callable[[np.ndarray], np.ndarray], sampler: MonteCarloSampler
) -> Tuple[MomentMatrix, MomentMatrix]:
    """
    Monte Carlo estimate of ∫ h(x) x xᵗ dx over the sampler's box.

    Args:
        density: Vectorized h, mapping an (N, n) array to N values
        sampler: Sampling plan

    Returns:
        Tuple (estimate, stderr) of n x n matrices
    """
    region = sampler.region
    n = region.dim
    lower, upper = np.asarray(region.lower), np.asarray(region.upper)
    volume = region.volume
    rng = np.random.default_rng(sampler.seed)
    total = np.zeros((n, n))
    total_sq = np.zeros((n, n))
    remaining = sampler.sample_count
    while remaining > 0:
        size = min(sampler.chunk, remaining)
        points = rng.uniform(lower, upper, size=(size, n))
        weights = np.asarray(density(points), dtype=float)
        terms = np.einsum("k,ki,kj->kij", weights, points, points)
        total += terms.sum(axis=0)
        total_sq += np.square(terms).sum(axis=0)
        remaining -= size
    count = sampler.sample_count
    mean = total / count
    variance = np.maximum(total_sq / count - mean**2, 0.0) * count / (count - 1)
    return volume * mean, volume * np.sqrt(variance / count)


def indicator_density(support: Support) -> Callable[[np.ndarray], np.ndarray]:
    return lambda points: support.contains(points).astype(float)


def valuation_residual(V: BlackBoxValuation, h: GridFunction, f: GridFunction) -> float:
    """
    ‖V(h∨f) + V(h∧f) - V(h) - V(f)‖_F.

    Raises:
        GridMismatch: If h and f are not on a common grid
    """
    join, meet = lattice_join_meet(h, f)
    return float(np.linalg.norm(V(join) + V(meet) - V(h) - V(f)))


def _as_linear_map(phi: Union[SLTransform, np.ndarray]) -> SLTransform:
    if isinstance(phi, SLTransform):
        return phi
    # general linear maps are accepted as negative controls
    return SLTransform(phi, det_tolerance=math.inf)


def covariance_residual(
    V: BlackBoxValuation, h: Function, phi: Union[SLTransform, np.ndarray]
) -> float:
    """
    ‖V(h∘φ⁻¹) - φ V(h) φᵗ‖_F / (1 + ‖V(h)‖_F).

    Args:
        V: Valuation under test
        h: Simple or grid function
        phi: SL(n) transform; a plain matrix is accepted without the determinant check

    Raises:
        DimensionMismatch: If φ, h and V do not share a dimension
    """
    phi = _as_linear_map(phi)
    if phi.dim != h.dim or V.dim != h.dim:
        raise DimensionMismatch(f"phi in dimension {phi.dim}, h on R^{h.dim}, V on R^{V.dim}")
    base = V(h)
    moved = V(pullback(h, phi))
    return float(np.linalg.norm(moved - phi.congruence(base)) / (1.0 + np.linalg.norm(base)))


def decomposition_residual(V: BlackBoxValuation, pieces: Sequence[Tuple[float, Support]]) -> float:
    """
    ‖[V(h) - V(0)] - Σ_i [V(α_i 1_{P_i}) - V(0)]‖_F for h = Σ α_i 1_{P_i}.

    With same-signed coefficients and interior-disjoint supports, h is the join (α_i >= 0)
    or the meet (α_i <= 0) of its pieces.

    Raises:
        MixedSigns: If coefficients of both signs occur
        OverlappingInteriors: If two supports overlap
    """
    if not pieces:
        return 0.0
    alphas = np.array([alpha for alpha, _ in pieces], dtype=float)
    if np.any(alphas > 0) and np.any(alphas < 0):
        raise MixedSigns(f"coefficients {alphas.tolist()} have mixed signs")
    h = SimpleFunction(pieces)
    zero = V(SimpleFunction.zero(h.dim))
    parts = sum(V(SimpleFunction.indicator(support, alpha)) - zero for alpha, support in h.pieces)
    return float(np.linalg.norm(V(h) - zero - parts))


def zero_structure(V: BlackBoxValuation, tol: float = DEFAULT_TOLERANCES.exact) -> ZeroReport:
    """
    Inspect V(0): s ρ for n = 2, the zero matrix for n >= 3.

    Args:
        V: Valuation under test
        tol: Absolute tolerance, scaled by max(1, |ŝ|) when n = 2

    Returns:
        ZeroReport with the extracted ŝ and a conformance verdict
    """
    n = V.dim
    value = V(SimpleFunction.zero(n))
    symmetric = 0.5 * (value + value.T)
    if n == 2:
        s_hat = 0.5 * float(value[1, 0] - value[0, 1])
        remainder = float(np.linalg.norm(symmetric))
        threshold = tol * max(1.0, abs(s_hat))
    else:
        s_hat = 0.0
        remainder = float(np.linalg.norm(value))
        threshold = tol
    invariance = max(
        (
            float(np.linalg.norm(phi.congruence(value) - value))
            for phi in zero_structure_transforms(n)
        ),
        default=0.0,
    )
    conformant = remainder <= threshold
    if not conformant:
        logger.warning("V(0) of %r is not of the covariant form (residual %.3g)", V, remainder)
    return ZeroReport(
        dim=n,
        value=value.tolist(),
        symmetric_norm=float(np.linalg.norm(symmetric)),
        rotation_coefficient=s_hat,
        invariance_residual=invariance,
        tolerance=tol,
        conformant=bool(conformant),
    )


def extract_xi_and_s(
    V: BlackBoxValuation, alphas: Iterable[float], support: Support
) -> ExtractionReport:
    """
    Recover ξ̂(α) and ŝ from V(α 1_P) = ξ(α) M(P) + s ρ.

    ξ̂(α) is the Frobenius projection of the symmetric part of V(α 1_P) onto M(P).

    Args:
        V: Valuation under test
        alphas: Coefficients to probe
        support: Full-dimensional polytope or box P

    Returns:
        ExtractionReport with per-α fit residuals normalized by 1 + ‖V(α 1_P)‖_F

    Raises:
        DegenerateSupport: If M(P) = 0
    """
    n = V.dim
    moment = support.moment
    weight = float(np.sum(moment * moment))
    if weight == 0.0 or not support.is_full_dimensional:
        raise DegenerateSupport(f"support {support!r} has zero moment matrix")
    alphas = [float(alpha) for alpha in alphas]
    xi_hat, s_values, fits, entries = [], [], [], []
    for alpha in alphas:
        value = V(SimpleFunction.indicator(support, alpha))
        symmetric = 0.5 * (value + value.T)
        s_alpha = 0.5 * float(value[1, 0] - value[0, 1]) if n == 2 else 0.0
        xi_alpha = float(np.sum(symmetric * moment)) / weight
        residual = value - xi_alpha * moment
        if n == 2:
            residual = residual - s_alpha * RHO
        xi_hat.append(xi_alpha)
        s_values.append(s_alpha)
        fits.append(float(np.linalg.norm(residual) / (1.0 + np.linalg.norm(value))))
        entries.append(float(np.max(np.abs(residual))))
    s_hat = float(np.mean(s_values)) if s_values else 0.0
    spread = max((abs(s - s_hat) for s in s_values), default=0.0)
    logger.debug("Extracted s=%.6g (spread %.3g) from %d coefficients", s_hat, spread, len(alphas))
    return ExtractionReport(
        dim=n,
        alphas=alphas,
        xi_hat=xi_hat,
        s_hat=s_hat,
        s_spread=spread,
        fit_residuals=fits,
        entry_residuals=entries,
    )


def norm_bound_residual(xi: CompositionFunction, h: Function) -> float:
    """
    max(0, ‖K(ξ∘h)‖_F - d ‖h‖^p_{L^p(μ_n)}), zero whenever |ξ(t)| <= d |t|^p.
    """
    moment = moment_of_simple(compose(xi, h))
    bound = xi.growth_constant_d * lp_norm(h, xi.exponent_p) ** xi.exponent_p
    return max(0.0, float(np.linalg.norm(moment)) - bound)


def sign_split_residual(V: BlackBoxValuation, h: GridFunction) -> float:
    """‖V(h∨0) + V(h∧0) - V(h) - V(0)‖_F."""
    zero = V(SimpleFunction.zero(h.dim))
    return float(np.linalg.norm(V(h.positive_part()) + V(h.negative_part()) - V(h) - zero))


def weak_simplicity_residual(
    V: BlackBoxValuation, alpha: float, polytopes: Iterable[Polytope]
) -> float:
    """
    max_P ‖V(α 1_P) - V(0)‖_F over lower-dimensional polytopes P.
    """
    zero = V(SimpleFunction.zero(V.dim))
    worst = 0.0
    for polytope in polytopes:
        if polytope.is_full_dimensional:
            raise InvalidParameter(
                f"weak simplicity is tested on lower-dimensional polytopes, got {polytope!r}"
            )
        value = V(SimpleFunction.indicator(polytope, alpha))
        worst = max(worst, float(np.linalg.norm(value - zero)))
    return worst


def polytope_valuation_residual(
    V: BlackBoxValuation, alpha: float, polytope: Polytope, u, c_lo: float, c_hi: float
) -> float:
    """
    ‖Y(P₁) + Y(P₂) - Y(P) - Y(P₁ ∩ P₂)‖_F for Y(Q) = V(α 1_Q) and the slice P = P₁ ∪ P₂.
    """
    first, second = halfspace_slice(polytope, u, c_lo, c_hi)
    overlap = slab(polytope, u, c_lo, c_hi)

    def piece(q: Polytope) -> np.ndarray:
        return V(SimpleFunction.indicator(q, alpha))

    return float(np.linalg.norm(piece(first) + piece(second) - piece(polytope) - piece(overlap)))


def agreement_residual(
    first: BlackBoxValuation, second: BlackBoxValuation, functions: Iterable[Function]
) -> float:
    """max_h ‖[V₁(h) - V₁(0)] - [V₂(h) - V₂(0)]‖_F."""
    if first.dim != second.dim:
        raise DimensionMismatch(f"valuations on R^{first.dim} and R^{second.dim}")
    zero = SimpleFunction.zero(first.dim)
    offset = first(zero) - second(zero)
    worst = 0.0
    for h in functions:
        worst = max(worst, float(np.linalg.norm(first(h) - second(h) - offset)))
    return worst


def classification_evidence(
    V: BlackBoxValuation,
    alphas: Sequence[float],
    support: Support,
    functions: Iterable[Function],
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ProbeReport:
    """
    Extract (ξ̂, ŝ) from V, rebuild K(ξ̂∘h) + ŝρ and compare it with V on given functions.

    The rebuilt valuation interpolates ξ̂ linearly between the probed coefficients, so
    it is exact only on functions whose coefficients are among ``alphas``.

    Returns:
        ProbeReport with one row per function; passes when every reproduction residual
        is within ``tolerances.reproduction`` and V(0) has the covariant form
    """
    extraction = extract_xi_and_s(V, alphas, support)
    xi_hat = CompositionFunction.from_samples(extraction.alphas, extraction.xi_hat, V.exponent_p)
    zero_report = zero_structure(V, tolerances.exact)
    rotation = extraction.s_hat * rotation_term(V.dim) if V.dim == 2 else np.zeros((V.dim, V.dim))
    rows: List[Dict[str, object]] = []
    for index, h in enumerate(functions):
        value = V(h)
        rebuilt = moment_of_simple(compose(xi_hat, h)) + rotation
        residual = float(np.linalg.norm(value - rebuilt) / (1.0 + np.linalg.norm(value)))
        rows.append({"function": index, "residual": residual})
    worst = max((row["residual"] for row in rows), default=0.0)
    passed = worst <= tolerances.reproduction and zero_report.conformant
    return ProbeReport(
        name="classification_evidence",
        rows=rows,
        passed=bool(passed),
        verdict="reproduced" if passed else "not reproduced",
        details={
            "s_hat": extraction.s_hat,
            "s_spread": extraction.s_spread,
            "max_fit_residual": extraction.max_fit_residual,
            "max_reproduction_residual": worst,
            "zero_structure_conformant": zero_report.conformant,
            "xi_hat": dict(zip(extraction.alphas, extraction.xi_hat)),
        },
    )
