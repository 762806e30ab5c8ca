"""
Numerical defaults and runtime configuration.
"""

import logging
import os
from dataclasses import asdict, dataclass, replace
from typing import Dict

from .exceptions import InvalidParameter

logger = logging.getLogger(__name__)

MAX_DIMENSION = 6
RANDOM_POLYTOPE_ATTEMPTS = 16

# Sampling grid for growth checks
GROWTH_T_MIN = 1e-8
GROWTH_T_MAX = 1e8
GROWTH_SAMPLES = 400

CONVERGENCE_RATIO_BAND = (0.3, 0.8)
MONTE_CARLO_Z = 4.0
MONTE_CARLO_COVERAGE = 0.95
MONTE_CARLO_CHUNK = 1 << 17
CONDITION_BOUND = 50.0

SCHEMA_VERSION = 1
THREADS_ENV_VAR = "VALUATION_LAB_THREADS"


@dataclass(frozen=True)
class Tolerances:
    """
    Tolerances used across the package.

    Attributes:
        exact: Paths that only add and scale exact moments
        composed: Paths composed of several linear-algebra steps
        covariance: Normalized covariance residuals
        reproduction: Rebuilt valuation versus the black box
        det: Allowed |det - 1| of an SL(n) matrix
        volume: Relative volume below which a simplex or overlap counts as null
        continuity: Norm threshold of the continuity probes
    """

    exact: float = 1e-12
    composed: float = 1e-10
    covariance: float = 1e-9
    reproduction: float = 1e-8
    det: float = 1e-9
    volume: float = 1e-12
    continuity: float = 1e-6

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    def override(self, **values: float) -> "Tolerances":
        """Return a copy with some fields replaced."""
        for name, value in values.items():
            if value <= 0:
                raise InvalidParameter(f"tolerance {name} must be positive, got {value}")
        return replace(self, **values)


DEFAULT_TOLERANCES = Tolerances()


def threads_from_env(default: int = 0) -> int:
    """
    Read the suite thread cap from the environment.

    Args:
        default: Value used when the variable is unset

    Returns:
        Number of worker threads, 0 meaning serial execution
    """
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or raw.strip() == "":
        return default
    try:
        threads = int(raw)
    except ValueError:
        logger.warning("Ignoring %s=%r: not an integer, running serially", THREADS_ENV_VAR, raw)
        return 0
    return max(threads, 0)
