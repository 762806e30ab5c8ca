"""
Seeded randomized property suites and convergence probes.

Every case derives its own seed from (master seed, property, case index), so a failure
is reproduced by rerunning that single case and reports do not depend on scheduling.
"""

import hashlib
import logging
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy
import sympy

from .base import BlackBoxValuation
from .config import (
    CONDITION_BOUND,
    CONVERGENCE_RATIO_BAND,
    DEFAULT_TOLERANCES,
    MAX_DIMENSION,
    MONTE_CARLO_COVERAGE,
    MONTE_CARLO_Z,
    RANDOM_POLYTOPE_ATTEMPTS,
    Tolerances,
    threads_from_env,
)
from .exceptions import InvalidParameter, InvalidSpec
from .functions import (
    CompositionFunction,
    FunctionSequence,
    GridFunction,
    SimpleFunction,
    builtin_xis,
    check_growth,
)
from .geometry import (
    Polytope,
    SLTransform,
    dyadic_inner_cubes,
    fan_triangulation,
    halfspace_slice,
    polytope_moment,
    random_polytope,
    random_sl_matrix,
    transform_polytope,
)
from .reports import ProbeReport, PropertyResult, SuiteReport
from .valuation import (
    RHO,
    MonteCarloSampler,
    PsiValuation,
    RotationLeakValuation,
    ValuationSpec,
    covariance_residual,
    extract_xi_and_s,
    indicator_density,
    moment_monte_carlo,
    moment_of_simple,
    sign_split_residual,
    valuation_residual,
    weak_simplicity_residual,
    zero_structure,
)

logger = logging.getLogger(__name__)

ValuationFactory = Callable[[ValuationSpec], BlackBoxValuation]

FAMILIES = ("psi", "rotation-leak")
EXTRACTION_ALPHAS = tuple(float(alpha) for alpha in np.linspace(-2.0, 2.0, 17))
CONTINUITY_LADDER = tuple(2**j for j in range(0, 31, 2))
CUBE_LEVELS = tuple(2.0**-k for k in range(2, 7))
GROWTH_RELATIVE_SLACK = 1e-9


def case_seed(master_seed: int, property_id: str, index: int) -> int:
    """63-bit seed from SHA-256 of (master seed, property id, case index)."""
    digest = hashlib.sha256(f"{master_seed}:{property_id}:{index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def family_factory(family: str) -> ValuationFactory:
    """
    Valuation built from a spec for a named family.

    "psi" is the covariant family itself; "rotation-leak" adds the planar rotation term in
    every dimension, which is wrong for n >= 3.
    """
    if family == "psi":
        return PsiValuation
    if family == "rotation-leak":
        return lambda spec: RotationLeakValuation(
            spec.dim, spec.xi, spec.rotation_coefficient if spec.dim == 2 else 1.0
        )
    raise InvalidSpec(f"family must be one of {FAMILIES}, got {family!r}")


@dataclass
class SuiteConfig:
    """
    Configuration of a verification suite run.

    Attributes:
        master_seed: Seed every case seed is derived from
        dims: Ambient dimensions, cycled over case indices
        p_values: Exponents, cycled over case indices
        cases_per_property: Number of cases per property
        tolerances: Per-property tolerance overrides
        parallel: Evaluate cases on a thread pool
        threads: Worker threads when parallel (0 reads VALUATION_LAB_THREADS)
        mc_samples: Monte Carlo samples per oracle target
        oracle_targets: Random polytopes per dimension in the oracle cross-check
        family: Valuation family under test: "psi" or "rotation-leak"
        condition_bound: Largest condition number of a random SL(n) matrix
        ratio_band: Accepted per-halving error ratio in the cube convergence probe
        properties: Names of the properties to run (all when empty)
        base_tolerances: Defaults behind the per-property tolerances
    """

    master_seed: int = 0
    dims: Tuple[int, ...] = (2, 3, 4)
    p_values: Tuple[float, ...] = (1.0, 2.0, 3.0)
    cases_per_property: int = 20
    tolerances: Dict[str, float] = field(default_factory=dict)
    parallel: bool = False
    threads: int = 0
    mc_samples: int = 10**6
    oracle_targets: int = 10
    family: str = "psi"
    condition_bound: float = CONDITION_BOUND
    ratio_band: Tuple[float, float] = CONVERGENCE_RATIO_BAND
    properties: Tuple[str, ...] = ()
    base_tolerances: Tolerances = DEFAULT_TOLERANCES

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        self.p_values = tuple(float(p) for p in self.p_values)
        self.properties = tuple(self.properties)
        self.ratio_band = tuple(self.ratio_band)
        if self.cases_per_property < 1:
            raise InvalidSpec(f"cases_per_property must be >= 1, got {self.cases_per_property}")
        if not self.dims or any(not 2 <= n <= MAX_DIMENSION for n in self.dims):
            raise InvalidSpec(f"dims must be in 2..{MAX_DIMENSION}, got {self.dims}")
        if not self.p_values or any(p < 1 for p in self.p_values):
            raise InvalidSpec(f"p values must be >= 1, got {self.p_values}")
        if self.family not in FAMILIES:
            raise InvalidSpec(f"family must be one of {FAMILIES}, got {self.family!r}")
        for name, value in self.tolerances.items():
            if name not in PROPERTIES or not PROPERTIES[name].overridable:
                raise InvalidSpec(f"no overridable tolerance for property {name!r}")
            if value <= 0:
                raise InvalidSpec(f"tolerance of {name} must be positive, got {value}")
        unknown = [name for name in self.properties if name not in PROPERTIES]
        if unknown:
            raise InvalidSpec(f"unknown properties {unknown}; known: {sorted(PROPERTIES)}")
        if self.mc_samples < 2 or self.oracle_targets < 1:
            raise InvalidSpec("mc_samples must be >= 2 and oracle_targets >= 1")
        if not 0 < self.ratio_band[0] <= self.ratio_band[1] < 1:
            raise InvalidSpec(f"ratio band must satisfy 0 < low <= high < 1, got {self.ratio_band}")

    def tolerance(self, name: str) -> float:
        if name in self.tolerances:
            return self.tolerances[name]
        return PROPERTIES[name].default_tolerance(self)

    def selected(self) -> List[str]:
        return list(self.properties) if self.properties else list(PROPERTIES)

    def worker_count(self) -> int:
        if not self.parallel:
            return 0
        return self.threads if self.threads > 0 else threads_from_env()

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["base_tolerances"] = self.base_tolerances.to_dict()
        data["resolved_tolerances"] = {name: self.tolerance(name) for name in self.selected()}
        # scheduling never changes the numbers
        data.pop("parallel")
        data.pop("threads")
        return data


@dataclass(frozen=True)
class CaseContext:
    config: SuiteConfig
    factory: ValuationFactory

    def tolerance(self, name: str) -> float:
        return self.config.tolerance(name)


@dataclass
class CaseOutcome:
    residual: float
    passed: bool
    descriptor: Dict[str, Any]


@lru_cache(maxsize=None)
def _xis(p: float) -> Tuple[CompositionFunction, ...]:
    return tuple(builtin_xis(p))


def _case_shape(config: SuiteConfig, index: int) -> Tuple[int, float]:
    n = config.dims[index % len(config.dims)]
    p = config.p_values[(index // len(config.dims)) % len(config.p_values)]
    return n, p


def _random_spec(rng: np.random.Generator, n: int, p: float) -> ValuationSpec:
    xis = _xis(p)
    xi = xis[int(rng.integers(len(xis)))]
    s = float(rng.choice([-5.0, 0.0, 5.0])) if n == 2 else 0.0
    return ValuationSpec(n, p, xi, s)


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**62))


def _bounded_sl_matrix(rng: np.random.Generator, n: int, bound: float) -> SLTransform:
    for _ in range(RANDOM_POLYTOPE_ATTEMPTS):
        phi = random_sl_matrix(_seed(rng), n, shear_count=2 * n, shear_bound=1.0)
        if phi.condition() <= bound:
            return phi
    logger.debug("No SL(%d) draw under condition %.3g, using a single shear", n, bound)
    return random_sl_matrix(_seed(rng), n, shear_count=1, shear_bound=1.0)


def _random_simple(rng: np.random.Generator, n: int) -> SimpleFunction:
    pieces = []
    for i in range(int(rng.integers(1, 4))):
        polytope = random_polytope(_seed(rng), n, n + 3, 1.0)
        shift = np.zeros(n)
        shift[0] = 3.0 * i
        pieces.append((float(rng.uniform(-3.0, 3.0)), Polytope(polytope.vertices + shift, dim=n)))
    return SimpleFunction(pieces, dim=n, validate=False)


def _random_grid(rng: np.random.Generator, n: int, delta: float) -> GridFunction:
    count = int(rng.integers(1, 7))
    indices = rng.integers(-4, 4, size=(count, n))
    values = rng.uniform(-3.0, 3.0, size=count)
    return GridFunction.from_arrays(delta, indices, values, n)


def _relative(difference: np.ndarray, reference: np.ndarray) -> float:
    return float(np.linalg.norm(difference) / max(1.0, float(np.linalg.norm(reference))))


def _k_bridge(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    n, _ = _case_shape(ctx.config, index)
    alpha = float(rng.uniform(-5.0, 5.0))
    polytope = random_polytope(_seed(rng), n, 2 * n + 2, 1.0)
    direct = alpha * polytope_moment(polytope)
    pieces = [(alpha, Polytope(simplex.vertices)) for simplex in fan_triangulation(polytope)]
    composed = moment_of_simple(SimpleFunction(pieces, n, validate=False))
    residual = _relative(composed - direct, direct)
    return CaseOutcome(residual, residual <= ctx.tolerance("k_bridge"), {"dim": n, "alpha": alpha})


def _covariance(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    n, p = _case_shape(ctx.config, index)
    spec = _random_spec(rng, n, p)
    h = _random_simple(rng, n)
    phi = _bounded_sl_matrix(rng, n, ctx.config.condition_bound)
    residual = covariance_residual(ctx.factory(spec), h, phi)
    descriptor = {
        "dim": n,
        "p": p,
        "xi": spec.xi.label,
        "s": spec.rotation_coefficient,
        "condition": phi.condition(),
    }
    return CaseOutcome(residual, residual <= ctx.tolerance("covariance"), descriptor)


def _valuation_identity(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    n, p = _case_shape(ctx.config, index)
    spec = _random_spec(rng, n, p)
    h, f = _random_grid(rng, n, 0.25), _random_grid(rng, n, 0.25)
    residual = valuation_residual(ctx.factory(spec), h, f)
    descriptor = {"dim": n, "p": p, "xi": spec.xi.label, "cells": [len(h.cells), len(f.cells)]}
    return CaseOutcome(residual, residual <= ctx.tolerance("valuation_identity"), descriptor)


def _zero_structure(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    n, p = _case_shape(ctx.config, index)
    spec = _random_spec(rng, n, p)
    report = zero_structure(ctx.factory(spec), ctx.tolerance("zero_structure"))
    if n == 2:
        residual = report.symmetric_norm / max(1.0, abs(report.rotation_coefficient))
    else:
        residual = float(np.linalg.norm(report.value))
    descriptor = {"dim": n, "s": spec.rotation_coefficient, "s_hat": report.rotation_coefficient}
    return CaseOutcome(residual, report.conformant, descriptor)


def _extraction(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    n, p = _case_shape(ctx.config, index)
    spec = _random_spec(rng, n, p)
    polytope = random_polytope(_seed(rng), n, 2 * n + 2, 1.0)
    report = extract_xi_and_s(ctx.factory(spec), EXTRACTION_ALPHAS, polytope)
    expected = spec.xi(np.array(report.alphas))
    xi_error = float(np.max(np.abs(np.array(report.xi_hat) - expected)))
    s_error = abs(report.s_hat - spec.rotation_coefficient) + report.s_spread
    xi_tol = ctx.tolerance("extraction")
    strict_tol = ctx.config.tolerances.get("extraction", ctx.config.base_tolerances.composed)
    strict_error = max(s_error, report.max_fit_residual)
    # scaled so that passed holds exactly when residual <= xi_tol
    residual = max(xi_error, strict_error * xi_tol / strict_tol)
    descriptor = {
        "dim": n,
        "p": p,
        "xi": spec.xi.label,
        "s": spec.rotation_coefficient,
        "xi_error": xi_error,
        "s_error": s_error,
        "max_fit_residual": report.max_fit_residual,
    }
    passed = xi_error <= xi_tol and strict_error <= strict_tol
    return CaseOutcome(residual, passed, descriptor)


def _continuity(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    n, p = _case_shape(ctx.config, index)
    spec = _random_spec(rng, n, p)
    alpha = float(rng.uniform(-1.0, 1.0))
    polytope = random_polytope(_seed(rng), n, n + 3, 0.5)
    sequence = FunctionSequence.coefficient_sequence(alpha, polytope)
    report = continuity_probe(
        ctx.factory(spec), sequence, p=p, ks=CONTINUITY_LADDER, tol=ctx.tolerance("continuity")
    )
    residual = report.rows[-1]["value_residual"]
    descriptor = {"dim": n, "p": p, "xi": spec.xi.label, "alpha": alpha}
    return CaseOutcome(residual, report.passed, descriptor)


def _cube_convergence(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    triangle = Polytope.simplex(2)
    levels = CUBE_LEVELS
    if index > 0:
        triangle = transform_polytope(_bounded_sl_matrix(rng, 2, 4.0), triangle)
        levels = tuple(level / 2 for level in CUBE_LEVELS)
    alpha = float(rng.uniform(0.5, 2.0))
    report = cube_convergence_probe(triangle, _xis(2.0)[0], alpha, levels, ctx.config.ratio_band)
    descriptor = {"vertices": triangle.vertices.tolist(), "alpha": alpha, "verdict": report.verdict}
    return CaseOutcome(report.details["last_ratio"], report.passed, descriptor)


def _oracle_crosscheck(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    config = ctx.config
    n = config.dims[index % len(config.dims)]
    targets = [random_polytope(_seed(rng), n, n + 4, 1.0) for _ in range(config.oracle_targets)]
    report = oracle_crosscheck(targets, config.mc_samples, _seed(rng))
    residual = 1.0 - report.details["coverage"]
    return CaseOutcome(residual, report.passed, {"dim": n, "targets": len(targets)})


def _rho_invariance(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    phi = _bounded_sl_matrix(rng, 2, ctx.config.condition_bound)
    residual = float(np.linalg.norm(phi.congruence(RHO) - RHO))
    passed = residual <= ctx.tolerance("rho_invariance")
    return CaseOutcome(residual, passed, {"phi": phi.to_list()})


def _simplex_covariance(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    n, _ = _case_shape(ctx.config, index)
    simplex = random_polytope(_seed(rng), n, n + 1, 1.0)
    phi = _bounded_sl_matrix(rng, n, ctx.config.condition_bound)
    expected = phi.congruence(simplex.moment)
    residual = _relative(transform_polytope(phi, simplex).moment - expected, expected)
    return CaseOutcome(residual, residual <= ctx.tolerance("simplex_covariance"), {"dim": n})


def _polytope_additivity(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    n, _ = _case_shape(ctx.config, index)
    polytope = random_polytope(_seed(rng), n, 2 * n + 2, 1.0)
    u = rng.normal(size=n)
    level = float(polytope.vertices.mean(axis=0) @ u)
    first, second = halfspace_slice(polytope, u, level, level)
    residual = _relative(first.moment + second.moment - polytope.moment, polytope.moment)
    descriptor = {"dim": n, "direction": u.tolist(), "level": level}
    return CaseOutcome(residual, residual <= ctx.tolerance("polytope_additivity"), descriptor)


def _sign_split(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    n, p = _case_shape(ctx.config, index)
    spec = _random_spec(rng, n, p)
    residual = sign_split_residual(ctx.factory(spec), _random_grid(rng, n, 0.25))
    descriptor = {"dim": n, "p": p, "xi": spec.xi.label}
    return CaseOutcome(residual, residual <= ctx.tolerance("sign_split"), descriptor)


def _weak_simplicity(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    n, p = _case_shape(ctx.config, index)
    spec = _random_spec(rng, n, p)
    flat = []
    for _ in range(3):
        points = rng.uniform(-1.0, 1.0, size=(n + 2, n))
        points[:, -1] = float(rng.uniform(-1.0, 1.0))
        flat.append(Polytope(points, dim=n))
    alpha = float(rng.uniform(-3.0, 3.0))
    residual = weak_simplicity_residual(ctx.factory(spec), alpha, flat)
    passed = residual <= ctx.tolerance("weak_simplicity")
    return CaseOutcome(residual, passed, {"dim": n, "alpha": alpha})


def _growth_probe(ctx: CaseContext, index: int, rng: np.random.Generator) -> CaseOutcome:
    _, p = _case_shape(ctx.config, index)
    xis = _xis(p)
    xi = xis[index % len(xis)]
    report = check_growth(xi)
    if report.d > 0:
        residual = max(0.0, report.max_ratio / report.d - 1.0)
    else:
        residual = report.max_ratio
    descriptor = {"p": p, "xi": xi.label, "max_ratio": report.max_ratio}
    return CaseOutcome(residual, residual <= ctx.tolerance("growth_probe"), descriptor)


@dataclass(frozen=True)
class SuiteProperty:
    """
    One suite property.

    Attributes:
        name: Property id, part of every case seed
        run: Case function (context, index, rng) -> CaseOutcome
        default_tolerance: Tolerance used unless the config overrides it
        cases: Number of cases for a config
        overridable: Whether the tolerance may be overridden (probe verdicts carry their own)
    """

    name: str
    run: Callable[[CaseContext, int, np.random.Generator], CaseOutcome]
    default_tolerance: Callable[[SuiteConfig], float]
    cases: Callable[[SuiteConfig], int] = lambda config: config.cases_per_property
    overridable: bool = True


def _base(field_name: str) -> Callable[[SuiteConfig], float]:
    return lambda config: getattr(config.base_tolerances, field_name)


PROPERTIES: Dict[str, SuiteProperty] = {
    prop.name: prop
    for prop in [
        SuiteProperty("k_bridge", _k_bridge, _base("exact")),
        SuiteProperty("covariance", _covariance, _base("covariance")),
        SuiteProperty("valuation_identity", _valuation_identity, _base("composed")),
        SuiteProperty("zero_structure", _zero_structure, _base("exact")),
        SuiteProperty("extraction", _extraction, _base("covariance")),
        SuiteProperty("continuity", _continuity, _base("continuity")),
        SuiteProperty(
            "cube_convergence",
            _cube_convergence,
            lambda config: config.ratio_band[1],
            cases=lambda config: min(config.cases_per_property, 4),
            overridable=False,
        ),
        SuiteProperty(
            "oracle_crosscheck",
            _oracle_crosscheck,
            lambda config: 1.0 - MONTE_CARLO_COVERAGE,
            cases=lambda config: len(config.dims),
            overridable=False,
        ),
        SuiteProperty("rho_invariance", _rho_invariance, _base("exact")),
        SuiteProperty("simplex_covariance", _simplex_covariance, _base("covariance")),
        SuiteProperty("polytope_additivity", _polytope_additivity, _base("composed")),
        SuiteProperty("sign_split", _sign_split, _base("composed")),
        SuiteProperty("weak_simplicity", _weak_simplicity, _base("exact")),
        SuiteProperty("growth_probe", _growth_probe, lambda config: GROWTH_RELATIVE_SLACK),
    ]
}

COVERAGE = {
    "moment bridge K(alpha 1_P) = alpha M(P)": ["k_bridge", "oracle_crosscheck"],
    "valuation identity on the function lattice": ["valuation_identity", "sign_split"],
    "SL(n) covariance": ["covariance", "simplex_covariance", "rho_invariance"],
    "value at the zero function": ["zero_structure"],
    "extraction of (xi, s)": ["extraction"],
    "continuity in L^p(mu_n)": ["continuity"],
    "dyadic cube approximation": ["cube_convergence"],
    "polytope valuations and weak simplicity": ["polytope_additivity", "weak_simplicity"],
    "growth class of xi": ["growth_probe"],
}


def platform_info() -> Dict[str, str]:
    return {
        "python_version": platform.python_version(),
        "python_implementation": platform.python_implementation(),
        "machine": platform.machine(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
    }


def run_case(ctx: CaseContext, name: str, index: int) -> Dict[str, Any]:
    """Run one case; (master seed, name, index) alone reproduce it."""
    seed = case_seed(ctx.config.master_seed, name, index)
    outcome = PROPERTIES[name].run(ctx, index, np.random.default_rng(seed))
    descriptor = {"property": name, "index": index, "seed": seed}
    descriptor.update(outcome.descriptor)
    return {"residual": float(outcome.residual), "passed": bool(outcome.passed), "case": descriptor}


def run_suite(config: SuiteConfig, factory: Optional[ValuationFactory] = None) -> SuiteReport:
    """
    Run every selected property over freshly generated cases.

    Args:
        config: Suite configuration
        factory: Builds the valuation under test from a random spec; defaults to
            the configured family. Valuations flagged serial disable the thread pool.

    Returns:
        SuiteReport; identical for a given config whether or not cases run in parallel
    """
    started = time.perf_counter()
    factory = factory or family_factory(config.family)
    ctx = CaseContext(config, factory)
    names = config.selected()
    jobs = [(name, index) for name in names for index in range(PROPERTIES[name].cases(config))]
    workers = config.worker_count()
    if workers > 0:
        p = config.p_values[0]
        if factory(ValuationSpec(config.dims[0], p, _xis(p)[0])).serial:
            logger.info("Valuation is flagged serial, running cases serially")
            workers = 0
    logger.info("Running %d cases over %d properties (workers=%d)", len(jobs), len(names), workers)
    if workers > 0:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda job: run_case(ctx, *job), jobs))
    else:
        outcomes = [run_case(ctx, name, index) for name, index in jobs]

    properties: Dict[str, PropertyResult] = {}
    for name in names:
        cases = [outcome for (job_name, _), outcome in zip(jobs, outcomes) if job_name == name]
        worst = max(cases, key=lambda outcome: outcome["residual"])
        failures = [outcome["case"] for outcome in cases if not outcome["passed"]]
        properties[name] = PropertyResult(
            name=name,
            cases=len(cases),
            tolerance=config.tolerance(name),
            max_residual=worst["residual"],
            argmax_case=worst["case"],
            failures=failures,
            passed=not failures,
        )
        if failures:
            logger.warning("Property %s failed on %d of %d cases", name, len(failures), len(cases))
    coverage = {
        item: [name for name in covered if name in properties]
        for item, covered in COVERAGE.items()
    }
    report = SuiteReport(
        config=config.to_dict(),
        properties=properties,
        coverage={item: covered for item, covered in coverage.items() if covered},
        platform=platform_info(),
        wall_time=time.perf_counter() - started,
    )
    verdict = "pass" if report.passed else "fail"
    logger.info("Suite finished in %.2fs: %s", report.wall_time, verdict)
    return report


def _nonincreasing_tail(values: Sequence[float], window: int = 5, slack: float = 1e-15) -> bool:
    tail = list(values)[-window:]
    return all(later <= earlier * (1 + 1e-9) + slack for earlier, later in zip(tail, tail[1:]))


def continuity_probe(
    V: BlackBoxValuation,
    seq: FunctionSequence,
    k_max: Optional[int] = None,
    p: Optional[float] = None,
    ks: Optional[Sequence[int]] = None,
    tol: float = DEFAULT_TOLERANCES.continuity,
    norm_threshold: float = DEFAULT_TOLERANCES.continuity,
) -> ProbeReport:
    """
    Tabulate (‖h_k - h‖_{L^p(μ_n)}, ‖V(h_k) - V(h)‖_F) along a sequence.

    Passes when the residual column does not increase over its last five entries and,
    if the final norm is below ``norm_threshold``, the final residual is below ``tol``.

    Args:
        V: Valuation under test
        seq: Sequence with its limit
        k_max: Use k = 1..k_max
        p: Exponent of the norm (defaults to V.exponent_p)
        ks: Explicit increasing indices instead of 1..k_max
        tol: Bound on the final residual
        norm_threshold: Norm below which the final residual must be small

    Returns:
        ProbeReport with rows {k, norm, value_residual}
    """
    if ks is None:
        if k_max is None or k_max < 1:
            raise InvalidParameter("continuity_probe needs k_max >= 1 or explicit indices")
        ks = range(1, k_max + 1)
    p = V.exponent_p if p is None else p
    limit_value = V(seq.limit)
    rows = []
    for k in ks:
        rows.append(
            {
                "k": int(k),
                "norm": seq.distance_to_limit(k, p),
                "value_residual": float(np.linalg.norm(V(seq.term(k)) - limit_value)),
            }
        )
    monotone = _nonincreasing_tail([row["value_residual"] for row in rows])
    final = rows[-1]
    settled = final["norm"] >= norm_threshold or final["value_residual"] < tol
    passed = monotone and settled
    return ProbeReport(
        name="continuity",
        rows=rows,
        passed=bool(passed),
        verdict="pass" if passed else "fail",
        details={"monotone_tail": monotone, "tolerance": tol, "norm_threshold": norm_threshold},
    )


def cube_convergence_probe(
    polytope: Polytope,
    xi: CompositionFunction,
    alpha: float,
    levels: Sequence[float],
    ratio_band: Tuple[float, float] = CONVERGENCE_RATIO_BAND,
) -> ProbeReport:
    """
    Moment error E(δ) = ‖K(ξ(α) 1_{cubes(δ)}) - ξ(α) M(P)‖_F over halving grid sizes.

    Passes when E vanishes at every level (exact tiling) or decreases strictly at every
    halving with the last ratio E(δ/2)/E(δ) inside ``ratio_band``.
    """
    levels = [float(level) for level in levels]
    if any(later != earlier / 2 for earlier, later in zip(levels, levels[1:])):
        raise InvalidParameter(f"levels must halve at every step, got {levels}")
    coefficient = float(xi(alpha))
    target = coefficient * polytope.moment
    rows = []
    for delta in levels:
        cells, gap = dyadic_inner_cubes(polytope, delta)
        h = SimpleFunction([(coefficient, cell) for cell in cells], polytope.dim, validate=False)
        error = float(np.linalg.norm(moment_of_simple(h) - target))
        rows.append({"delta": delta, "cells": len(cells), "gap": gap, "error": error})
    errors = [row["error"] for row in rows]
    ratios = [later / earlier if earlier > 0 else 0.0 for earlier, later in zip(errors, errors[1:])]
    for row, ratio in zip(rows[1:], ratios):
        row["ratio"] = ratio
    scale = max(1.0, float(np.linalg.norm(target)))
    if all(error <= DEFAULT_TOLERANCES.exact * scale for error in errors):
        passed, verdict = True, "exact"
    else:
        decreasing = all(later < earlier for earlier, later in zip(errors, errors[1:]))
        in_band = bool(ratios) and ratio_band[0] <= ratios[-1] <= ratio_band[1]
        passed = decreasing and in_band
        verdict = "pass" if passed else "fail"
    return ProbeReport(
        name="cube_convergence",
        rows=rows,
        passed=bool(passed),
        verdict=verdict,
        details={
            "xi": xi.label,
            "alpha": alpha,
            "ratio_band": list(ratio_band),
            "last_ratio": ratios[-1] if ratios else 0.0,
        },
    )


def oracle_crosscheck(
    targets: Sequence[Polytope],
    samples: int,
    seed: int,
    z: float = MONTE_CARLO_Z,
    coverage: float = MONTE_CARLO_COVERAGE,
) -> ProbeReport:
    """
    Compare exact moments with Monte Carlo estimates over each target's bounding box.

    A target agrees when every entry lies within ``z`` standard errors; the probe passes
    when at least ``coverage`` of the targets agree.
    """
    rows = []
    for index, target in enumerate(targets):
        exact = target.moment
        target_seed = case_seed(seed, "oracle", index)
        sampler = MonteCarloSampler(target.bounding_box(), samples, target_seed)
        estimate, stderr = moment_monte_carlo(indicator_density(target), sampler)
        deviation = np.abs(estimate - exact)
        agrees = bool(np.all(deviation <= z * stderr))
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = np.where(stderr > 0, deviation / stderr, np.where(deviation > 0, np.inf, 0.0))
        rows.append(
            {
                "target": index,
                "exact": exact.tolist(),
                "estimate": estimate.tolist(),
                "stderr": stderr.tolist(),
                "max_z": float(np.max(scores)),
                "agrees": agrees,
            }
        )
        if not agrees:
            logger.warning(
                "Monte Carlo moment of target %d is %.2f standard errors off", index, np.max(scores)
            )
    fraction = sum(row["agrees"] for row in rows) / len(rows) if rows else 1.0
    passed = fraction >= coverage
    return ProbeReport(
        name="oracle_crosscheck",
        rows=rows,
        passed=bool(passed),
        verdict="pass" if passed else "fail",
        details={"coverage": fraction, "required_coverage": coverage, "z": z, "samples": samples},
    )
