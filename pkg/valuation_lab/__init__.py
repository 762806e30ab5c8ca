"""
Valuation Lab Package

This package computes moment matrices of convex polytopes and simple functions, and
tests SL(n)-covariant matrix-valued valuations Psi(h) = K(xi o h) + s rho on L^p spaces
weighted by |x|^2.

Modules:
    - geometry: Polytopes, boxes, SL(n) transforms, exact moments
    - functions: Composition functions, simple and grid functions, norms
    - valuation: The moment operator, the family Psi, residuals and extraction
    - harness: Seeded property suites and convergence probes
    - serialization: JSON interchange documents
"""

__version__ = "0.1.0"

from .base import BlackBoxValuation
from .exceptions import ValuationLabError
from .functions import (
    CompositionFunction,
    FunctionSequence,
    GridFunction,
    SimpleFunction,
    builtin_xis,
    check_growth,
    lp_norm,
)
from .geometry import Box, Polytope, SLTransform, polytope_moment
from .harness import SuiteConfig, continuity_probe, cube_convergence_probe, run_suite
from .valuation import (
    FunctionValuation,
    PsiValuation,
    ValuationSpec,
    extract_xi_and_s,
    moment_of_simple,
    psi_evaluate,
)

__all__ = [
    "BlackBoxValuation",
    "Box",
    "CompositionFunction",
    "FunctionSequence",
    "FunctionValuation",
    "GridFunction",
    "Polytope",
    "PsiValuation",
    "SLTransform",
    "SimpleFunction",
    "SuiteConfig",
    "ValuationLabError",
    "ValuationSpec",
    "builtin_xis",
    "check_growth",
    "continuity_probe",
    "cube_convergence_probe",
    "extract_xi_and_s",
    "lp_norm",
    "moment_of_simple",
    "polytope_moment",
    "psi_evaluate",
    "run_suite",
]
