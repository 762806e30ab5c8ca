"""
Error types raised by the valuation lab.

All errors derive from :class:`ValuationLabError`, itself a ``ValueError``, so callers
that only care about bad input can catch ``ValueError``.
"""


class ValuationLabError(ValueError):
    """Base class for every error raised by this package."""


class DimensionMismatch(ValuationLabError):
    """Objects of different ambient dimension were combined."""


class DegenerateSimplex(ValuationLabError):
    """A simplex has (numerically) zero volume."""


class EmptySlice(ValuationLabError):
    """A halfspace slice produced a piece that is not full-dimensional."""


class DegenerateDraw(ValuationLabError):
    """Random sampling failed to produce a full-dimensional polytope."""


class InvalidTransform(ValuationLabError):
    """A matrix is not an element of SL(n)."""


class GridMismatch(ValuationLabError):
    """Grid functions live on different dyadic grids or dimensions."""


class ContainmentViolation(ValuationLabError):
    """An approximation is neither inside its target nor bounded by a given ball."""


class OverlappingInteriors(ValuationLabError):
    """Supports of a simple function overlap in a set of positive volume."""


class MixedSigns(ValuationLabError):
    """Coefficients of a decomposition are neither all >= 0 nor all <= 0."""


class InvalidFunction(ValuationLabError):
    """A composition function violates xi(0) = 0 or cannot be parsed."""


class InvalidSpec(ValuationLabError):
    """A valuation spec violates one of its invariants."""


class RotationInHighDim(InvalidSpec):
    """A rotation coefficient s != 0 was given for n >= 3."""


class DegenerateSupport(ValuationLabError):
    """Extraction was attempted on a support with zero moment matrix."""


class InvalidDocument(ValuationLabError):
    """An interchange document is malformed."""


class InvalidParameter(ValuationLabError):
    """A numeric argument lies outside its allowed range."""
