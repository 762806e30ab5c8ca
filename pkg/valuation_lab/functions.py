"""
Simple functions on R^n, their lattice, and the weighted L^p(μ_n) norm.

μ_n is the measure |x|² dx, so the μ_n-measure of a support equals the trace of its
moment matrix and every norm here is computed exactly from polytope moments.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from tokenize import TokenError
from types import MappingProxyType
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from scipy.integrate import quad
from scipy.special import gamma as gamma_function
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

from .config import DEFAULT_TOLERANCES, GROWTH_SAMPLES, GROWTH_T_MAX, GROWTH_T_MIN
from .exceptions import (
    ContainmentViolation,
    DimensionMismatch,
    GridMismatch,
    InvalidFunction,
    InvalidParameter,
    OverlappingInteriors,
)
from .geometry import (
    Box,
    Polytope,
    SLTransform,
    Support,
    _box_mu_measures,
    _dyadic_exponent,
    dyadic_inner_indices,
    intersect_polytopes,
    transform_polytope,
)
from .reports import GrowthReport, ProbeReport

logger = logging.getLogger(__name__)

_T = sympy.Symbol("t", real=True)
_ALLOWED_FUNCTIONS = (sympy.Abs, sympy.sign, sympy.Min, sympy.Max)
_PARSE_ERRORS = (SyntaxError, TypeError, ValueError, AttributeError, TokenError, sympy.SympifyError)
_EXPRESSION_NAMES = {
    "t": _T,
    "abs": sympy.Abs,
    "Abs": sympy.Abs,
    "sign": sympy.sign,
    "min": sympy.Min,
    "max": sympy.Max,
    "Min": sympy.Min,
    "Max": sympy.Max,
}


def parse_xi_expression(text: str) -> sympy.Expr:
    """
    Parse a composition-function expression in the variable t.

    Accepted: t, abs, sign, min, max, powers (``**`` or ``^``), arithmetic and constants.

    Raises:
        InvalidFunction: If the text does not parse or uses other symbols or functions
    """
    try:
        expr = parse_expr(
            text,
            local_dict=dict(_EXPRESSION_NAMES),
            transformations=standard_transformations + (convert_xor,),
        )
        expr = sympy.sympify(expr)
    except _PARSE_ERRORS as e:
        raise InvalidFunction(f"cannot parse xi expression {text!r}: {e}") from e
    extra = expr.free_symbols - {_T}
    if extra:
        raise InvalidFunction(
            f"xi expression {text!r} uses symbols other than t: {sorted(map(str, extra))}"
        )
    for node in sympy.preorder_traversal(expr):
        if getattr(node, "is_Function", False) and node.func not in _ALLOWED_FUNCTIONS:
            raise InvalidFunction(f"xi expression {text!r} uses unsupported function {node.func}")
    return expr


class CompositionFunction:
    """
    A continuous map ξ: R -> R with ξ(0) = 0 and a claimed bound |ξ(t)| <= d |t|^p.

    Args:
        evaluator: Vectorized callable on numpy arrays
        exponent_p: Exponent p >= 1 of the growth class
        growth_constant_d: Claimed constant d >= 0
        label: Human-readable name
        expression: Source expression, when built from text (required for export)
    """

    def __init__(
        self,
        evaluator: Callable[[np.ndarray], np.ndarray],
        exponent_p: float = 1.0,
        growth_constant_d: float = 1.0,
        label: str = "xi",
        expression: Optional[str] = None,
    ):
        if exponent_p < 1:
            raise InvalidFunction(f"exponent p must be >= 1, got {exponent_p}")
        if growth_constant_d < 0:
            raise InvalidFunction(f"growth constant d must be >= 0, got {growth_constant_d}")
        self.evaluator = evaluator
        self.exponent_p = float(exponent_p)
        self.growth_constant_d = float(growth_constant_d)
        self.label = label
        self.expression = expression
        at_zero = float(self(0.0))
        if at_zero != 0.0:
            raise InvalidFunction(f"xi({label}) must vanish at 0, got xi(0) = {at_zero!r}")

    @classmethod
    def from_expression(
        cls,
        expression: str,
        exponent_p: float = 1.0,
        growth_constant_d: float = 1.0,
        label: Optional[str] = None,
    ) -> "CompositionFunction":
        """Build ξ from an expression in t, compiled with sympy.lambdify."""
        expr = parse_xi_expression(expression)
        # numpy's amin/amax printing does not broadcast scalars against arrays
        expr = expr.replace(
            lambda node: isinstance(node, (sympy.Min, sympy.Max)),
            lambda node: node.rewrite(sympy.Piecewise),
        )
        evaluator = sympy.lambdify(_T, expr, modules="numpy")
        return cls(evaluator, exponent_p, growth_constant_d, label or expression, expression)

    @classmethod
    def from_samples(
        cls, ts: Sequence[float], values: Sequence[float], exponent_p: float, label: str = "xi_hat"
    ) -> "CompositionFunction":
        """
        Piecewise-linear ξ through sampled points; (0, 0) is added when missing.

        Outside the sampled range the end values are held constant.
        """
        ts = np.asarray(ts, dtype=float)
        values = np.asarray(values, dtype=float)
        if ts.shape != values.shape or ts.ndim != 1 or len(ts) == 0:
            raise InvalidFunction("xi samples need matching one-dimensional t and value arrays")
        if not np.any(ts == 0.0):
            ts = np.append(ts, 0.0)
            values = np.append(values, 0.0)
        order = np.argsort(ts)
        ts, values = ts[order], values[order]
        values = np.where(ts == 0.0, 0.0, values)
        nonzero = ts != 0.0
        d = float(np.max(np.abs(values[nonzero]) / np.abs(ts[nonzero]) ** exponent_p, initial=0.0))
        return cls(lambda t: np.interp(t, ts, values), exponent_p, d, label)

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        out = np.broadcast_to(np.asarray(self.evaluator(arr), dtype=float), arr.shape)
        if out.ndim == 0:
            return float(out)
        return np.array(out)

    def in_class_A_tilde(self, **sample_spec) -> bool:
        """Sampled membership in the growth class |ξ(t)| <= d |t|^p."""
        return check_growth(self, **sample_spec).passed

    def in_class_A(self, d: Optional[float] = None, **sample_spec) -> bool:
        """Sampled membership in the linear growth class |ξ(t)| <= d |t|."""
        d = self.growth_constant_d if d is None else d
        return check_growth(self, p=1.0, d=d, **sample_spec).passed

    def to_dict(self) -> Dict[str, object]:
        if self.expression is None:
            raise InvalidFunction(f"xi {self.label!r} has no expression and cannot be exported")
        return {
            "label": self.label,
            "expression": self.expression,
            "p": self.exponent_p,
            "d": self.growth_constant_d,
        }

    def __repr__(self) -> str:
        return (
            f"CompositionFunction(label={self.label!r}, p={self.exponent_p}, "
            f"d={self.growth_constant_d}, expression={self.expression!r})"
        )


def builtin_xis(p: float) -> List[CompositionFunction]:
    """
    The built-in ξ family for exponent p.

    Every member satisfies |ξ(t)| <= d |t|^p with its recorded d.
    """
    p = float(p)
    q = p + 1.0
    specs = [
        ("signed_power", f"sign(t)*abs(t)**{p!r}", 1.0),
        ("odd_power", f"-1.5*t*abs(t)**{p - 1.0!r}", 1.5),
        ("even_power", f"2*abs(t)**{p!r}", 2.0),
        ("clamped_power", f"sign(t)*min(abs(t)**{q!r}, abs(t)**{p!r})", 1.0),
        ("saturated_power", f"0.5*sign(t)*min(abs(t)**{p!r}, 1)", 0.5),
        ("zero", "0*t", 0.0),
    ]
    return [CompositionFunction.from_expression(expr, p, d, label) for label, expr, d in specs]


def check_growth(
    xi: CompositionFunction,
    p: Optional[float] = None,
    d: Optional[float] = None,
    t_min: float = GROWTH_T_MIN,
    t_max: float = GROWTH_T_MAX,
    samples: int = GROWTH_SAMPLES,
) -> GrowthReport:
    """
    Sampled check of |ξ(t)| <= d |t|^p over log-spaced magnitudes of both signs.

    A pass means no violation was found on the sample grid; it is not a proof.

    Args:
        xi: Composition function
        p: Exponent (defaults to xi.exponent_p)
        d: Constant (defaults to xi.growth_constant_d)
        t_min: Smallest sampled magnitude
        t_max: Largest sampled magnitude
        samples: Total number of samples, split evenly between the two signs

    Returns:
        GrowthReport with the largest ratio |ξ(t)| / |t|^p and where it occurs
    """
    p = xi.exponent_p if p is None else p
    d = xi.growth_constant_d if d is None else d
    magnitudes = np.geomspace(t_min, t_max, max(samples // 2, 2))
    ts = np.concatenate([magnitudes, -magnitudes])
    with np.errstate(over="ignore", invalid="ignore"):
        ratios = np.abs(xi(ts)) / np.abs(ts) ** p
    ratios = np.where(np.isnan(ratios), np.inf, ratios)
    index = int(np.argmax(ratios))
    max_ratio = float(ratios[index])
    passed = max_ratio <= d * (1 + 1e-9)
    if not passed:
        logger.warning(
            "Growth bound violated for %s: ratio %.6g at t=%.6g", xi.label, max_ratio, ts[index]
        )
    return GrowthReport(
        label=xi.label,
        p=float(p),
        d=float(d),
        max_ratio=max_ratio,
        argmax_t=float(ts[index]),
        samples=len(ts),
        t_min=float(t_min),
        t_max=float(t_max),
        passed=bool(passed),
    )


def _supports_overlap(first: Support, second: Support, tol: float) -> bool:
    a, b = first.bounding_box(), second.bounding_box()
    lower = np.maximum(a.lower, b.lower)
    upper = np.minimum(a.upper, b.upper)
    if np.any(upper <= lower):
        return False
    if isinstance(first, Box) and isinstance(second, Box):
        overlap = float(np.prod(upper - lower))
    else:
        overlap = intersect_polytopes(first, second).volume
    return overlap > tol * max(1.0, min(first.volume, second.volume))


class SimpleFunction:
    """
    A finite sum Σ α_i 1_{P_i} with pairwise disjoint interiors.

    Args:
        pieces: Iterable of (coefficient, support) pairs; supports are Polytope or Box
        dim: Ambient dimension (required when there are no pieces)
        validate: Check pairwise interior disjointness
        tol: Relative overlap volume treated as zero
    """

    def __init__(
        self,
        pieces: Iterable[Tuple[float, Support]] = (),
        dim: Optional[int] = None,
        validate: bool = True,
        tol: float = DEFAULT_TOLERANCES.exact,
    ):
        normalized = []
        for alpha, support in pieces:
            alpha = float(alpha)
            if not math.isfinite(alpha):
                raise InvalidParameter(f"simple function coefficients must be finite, got {alpha}")
            if dim is None:
                dim = support.dim
            elif support.dim != dim:
                raise DimensionMismatch(f"support in R^{support.dim} for a function on R^{dim}")
            normalized.append((alpha, support))
        if dim is None:
            raise DimensionMismatch("dimension is required for a simple function without pieces")
        self.dim = dim
        self.pieces: Tuple[Tuple[float, Support], ...] = tuple(normalized)
        if validate:
            self._check_disjoint(tol)

    def _check_disjoint(self, tol: float) -> None:
        for (i, (_, first)), (j, (_, second)) in itertools.combinations(enumerate(self.pieces), 2):
            if _supports_overlap(first, second, tol):
                raise OverlappingInteriors(f"supports {i} and {j} overlap in positive volume")

    @classmethod
    def zero(cls, dim: int) -> "SimpleFunction":
        return cls((), dim=dim)

    @classmethod
    def indicator(cls, support: Support, alpha: float = 1.0) -> "SimpleFunction":
        return cls([(alpha, support)], dim=support.dim, validate=False)

    @property
    def coefficients(self) -> List[float]:
        return [alpha for alpha, _ in self.pieces]

    @property
    def supports(self) -> List[Support]:
        return [support for _, support in self.pieces]

    def scaled(self, factor: float) -> "SimpleFunction":
        return SimpleFunction(
            [(factor * alpha, support) for alpha, support in self.pieces], self.dim, validate=False
        )

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Point values; boundaries shared by two supports are a null set."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        values = np.zeros(len(pts))
        for alpha, support in self.pieces:
            values += alpha * support.contains(pts)
        return values

    def __len__(self) -> int:
        return len(self.pieces)

    def __repr__(self) -> str:
        return f"SimpleFunction(dim={self.dim}, pieces={len(self.pieces)})"


class GridFunction:
    """
    A function constant on the cells [iδ, (i+1)δ] of a dyadic grid, zero elsewhere.

    Args:
        delta: Grid size 2^-k
        cells: Mapping from integer index tuples to values; zero values are dropped
        dim: Ambient dimension
    """

    def __init__(self, delta: float, cells: Mapping[Tuple[int, ...], float], dim: int):
        _dyadic_exponent(delta)
        clean: Dict[Tuple[int, ...], float] = {}
        for index, value in cells.items():
            index = tuple(int(i) for i in index)
            if len(index) != dim:
                raise DimensionMismatch(f"cell index {index} for a grid in R^{dim}")
            value = float(value)
            if not math.isfinite(value):
                raise InvalidParameter(f"grid values must be finite, got {value} at {index}")
            if value != 0.0:
                clean[index] = value
        self.delta = float(delta)
        self.dim = dim
        self.cells = MappingProxyType(dict(sorted(clean.items())))

    @classmethod
    def from_arrays(cls, delta: float, indices: np.ndarray, values: Sequence[float], dim: int):
        cells = {tuple(row): value for row, value in zip(np.asarray(indices), values)}
        return cls(delta, cells, dim)

    @classmethod
    def indicator_of_inner_cells(cls, polytope: Polytope, delta: float, alpha: float = 1.0):
        """α times the indicator of the dyadic cells inside a polytope."""
        indices = dyadic_inner_indices(polytope, delta)
        return cls.from_arrays(delta, indices, [alpha] * len(indices), polytope.dim)

    @property
    def indices(self) -> np.ndarray:
        if not self.cells:
            return np.empty((0, self.dim), dtype=np.int64)
        return np.array(list(self.cells.keys()), dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        return np.array(list(self.cells.values()), dtype=float)

    def corners(self) -> Tuple[np.ndarray, np.ndarray]:
        lower = self.indices * self.delta
        return lower, lower + self.delta

    def cell_mu_measures(self) -> np.ndarray:
        lower, upper = self.corners()
        return _box_mu_measures(lower, upper)

    @classmethod
    def from_simple(cls, h: SimpleFunction, delta: float) -> "GridFunction":
        """
        Grid representation of a simple function whose supports are unions of δ-cells.

        Raises:
            GridMismatch: If a support is not a Box aligned with the δ-grid
        """
        _dyadic_exponent(delta)
        cells: Dict[Tuple[int, ...], float] = {}
        for alpha, support in h.pieces:
            if not isinstance(support, Box):
                raise GridMismatch(f"support {support!r} is not a box")
            lower = np.asarray(support.lower) / delta
            upper = np.asarray(support.upper) / delta
            aligned = np.allclose(lower, np.round(lower), atol=1e-9)
            if not (aligned and np.allclose(upper, np.round(upper), atol=1e-9)):
                raise GridMismatch(f"box {support!r} is not aligned with the grid of size {delta}")
            ranges = [range(int(round(lo)), int(round(hi))) for lo, hi in zip(lower, upper)]
            for index in itertools.product(*ranges):
                cells[index] = cells.get(index, 0.0) + alpha
        return cls(delta, cells, h.dim)

    def to_simple(self) -> SimpleFunction:
        pieces = [
            (value, Box.cube(tuple(np.multiply(index, self.delta)), self.delta))
            for index, value in self.cells.items()
        ]
        return SimpleFunction(pieces, dim=self.dim, validate=False)

    def map_values(self, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return GridFunction.from_arrays(self.delta, self.indices, fn(self.values), self.dim)

    def scaled(self, factor: float) -> "GridFunction":
        return self.map_values(lambda v: factor * v)

    def positive_part(self) -> "GridFunction":
        """h ∨ 0."""
        return self.map_values(lambda v: np.maximum(v, 0.0))

    def negative_part(self) -> "GridFunction":
        """h ∧ 0."""
        return self.map_values(lambda v: np.minimum(v, 0.0))

    def refine(self, factor: int) -> "GridFunction":
        """
        The same function on a grid of size delta / factor.

        Args:
            factor: Power of two >= 1
        """
        if factor < 1 or factor & (factor - 1):
            raise GridMismatch(f"refinement factor must be a power of two, got {factor}")
        if factor == 1:
            return self
        offsets = np.array(list(itertools.product(range(factor), repeat=self.dim)), dtype=np.int64)
        indices = (self.indices[:, None, :] * factor + offsets[None, :, :]).reshape(-1, self.dim)
        values = np.repeat(self.values, len(offsets))
        return GridFunction.from_arrays(self.delta / factor, indices, values, self.dim)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        keys = np.floor(pts / self.delta).astype(np.int64)
        return np.array([self.cells.get(tuple(key), 0.0) for key in keys])

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridFunction):
            return NotImplemented
        return (
            self.delta == other.delta
            and self.dim == other.dim
            and dict(self.cells) == dict(other.cells)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"GridFunction(delta={self.delta}, dim={self.dim}, cells={len(self.cells)})"


Function = Union[SimpleFunction, GridFunction]


def common_grid(h: GridFunction, f: GridFunction) -> Tuple[GridFunction, GridFunction]:
    """Refine two grid functions to the finer of their dyadic grids."""
    if h.dim != f.dim:
        raise GridMismatch(f"grid functions on R^{h.dim} and R^{f.dim}")
    delta = min(h.delta, f.delta)
    return h.refine(int(round(h.delta / delta))), f.refine(int(round(f.delta / delta)))


def lattice_join_meet(h: GridFunction, f: GridFunction) -> Tuple[GridFunction, GridFunction]:
    """
    Cellwise max and min of two grid functions, absent cells counting as 0.

    Raises:
        GridMismatch: If the grids or dimensions differ
    """
    if h.delta != f.delta or h.dim != f.dim:
        raise GridMismatch(
            f"lattice operations need a common grid: delta {h.delta} vs {f.delta}, "
            f"dim {h.dim} vs {f.dim}"
        )
    keys = set(h.cells) | set(f.cells)
    join = {key: max(h.cells.get(key, 0.0), f.cells.get(key, 0.0)) for key in keys}
    meet = {key: min(h.cells.get(key, 0.0), f.cells.get(key, 0.0)) for key in keys}
    return GridFunction(h.delta, join, h.dim), GridFunction(h.delta, meet, h.dim)


def compose(xi: CompositionFunction, h: Function) -> Function:
    """
    The function ξ∘h.

    Pieces mapped to zero are dropped; off the supports ξ∘h = ξ(0) = 0.
    """
    if isinstance(h, GridFunction):
        return h.map_values(xi)
    values = xi(np.array(h.coefficients)) if h.pieces else np.empty(0)
    pieces = [(value, support) for value, (_, support) in zip(values, h.pieces) if value != 0.0]
    return SimpleFunction(pieces, dim=h.dim, validate=False)


def _support_mu_measures(h: SimpleFunction) -> np.ndarray:
    return np.array([support.mu_measure for support in h.supports])


def lp_norm(h: Function, p: float) -> float:
    """
    ‖h‖_{L^p(μ_n)} = (Σ |α_i|^p μ_n(P_i))^{1/p}.

    Args:
        h: Simple or grid function
        p: Exponent >= 1
    """
    if p < 1:
        raise InvalidParameter(f"p must be >= 1, got {p}")
    if isinstance(h, GridFunction):
        total = float(np.sum(np.abs(h.values) ** p * h.cell_mu_measures()))
    elif h.pieces:
        total = float(np.sum(np.abs(np.array(h.coefficients)) ** p * _support_mu_measures(h)))
    else:
        total = 0.0
    return total ** (1.0 / p)


def pullback(h: SimpleFunction, phi: SLTransform) -> SimpleFunction:
    """
    The function h∘φ⁻¹, supported on the images φP_i.

    Raises:
        DimensionMismatch: If φ and h live in different dimensions
    """
    if isinstance(h, GridFunction):
        h = h.to_simple()
    if phi.dim != h.dim:
        raise DimensionMismatch(f"SL({phi.dim}) pullback of a function on R^{h.dim}")
    pieces = [(alpha, transform_polytope(phi, support)) for alpha, support in h.pieces]
    return SimpleFunction(pieces, dim=h.dim, validate=False)


@dataclass(frozen=True)
class IndicatorDistance:
    """
    Exact distance ‖α1_A - α1_P‖_{L^p(μ_n)} and the bound |α| a^{2/p} λ(A △ P)^{1/p}.
    """

    exact: float
    bound: float
    lebesgue_gap: float
    mu_gap: float
    radius: float


def _as_pieces(approx) -> List[Support]:
    if isinstance(approx, (Polytope, Box)):
        return [approx]
    return list(approx)


def indicator_distance(
    alpha: float, approx, target: Polytope, p: float, radius: Optional[float] = None
) -> IndicatorDistance:
    """
    Distance between α times the indicators of an approximation and of its target.

    Args:
        alpha: Coefficient α
        approx: Polytope, Box, or sequence of interior-disjoint Boxes/Polytopes
        target: Polytope P
        p: Exponent >= 1
        radius: Radius of a ball containing both sets; required unless approx ⊆ P

    Returns:
        IndicatorDistance with the exact value and the ball bound

    Raises:
        ContainmentViolation: If approx is not inside P and no radius is supplied, or
            a supplied radius does not contain both sets
    """
    pieces = _as_pieces(approx)
    inner = all(bool(np.all(target.contains(piece.vertices))) for piece in pieces)
    approx_volume = sum(piece.volume for piece in pieces)
    approx_mu = sum(piece.mu_measure for piece in pieces)
    if inner:
        lebesgue_gap = target.volume - approx_volume
        mu_gap = target.mu_measure - approx_mu
        a = target.radius() if radius is None else radius
    else:
        if radius is None:
            raise ContainmentViolation(
                "approximation leaves the target and no ball radius was given"
            )
        outer = max([target.radius()] + [piece.radius() for piece in pieces])
        if outer > radius * (1 + 1e-12):
            raise ContainmentViolation(f"sets reach |x| = {outer:.6g} beyond radius {radius:.6g}")
        overlaps = [intersect_polytopes(piece, target) for piece in pieces]
        lebesgue_gap = target.volume + approx_volume - 2 * sum(o.volume for o in overlaps)
        mu_gap = target.mu_measure + approx_mu - 2 * sum(o.mu_measure for o in overlaps)
        a = radius
    lebesgue_gap, mu_gap = max(lebesgue_gap, 0.0), max(mu_gap, 0.0)
    return IndicatorDistance(
        exact=abs(alpha) * mu_gap ** (1.0 / p),
        bound=abs(alpha) * a ** (2.0 / p) * lebesgue_gap ** (1.0 / p),
        lebesgue_gap=lebesgue_gap,
        mu_gap=mu_gap,
        radius=float(a),
    )


def _owners(approx: SimpleFunction, target: SimpleFunction) -> np.ndarray:
    """Index of the target support containing each approx support, -1 if none."""
    owners = np.full(len(approx.pieces), -1, dtype=np.int64)
    boxes = [i for i, s in enumerate(approx.supports) if isinstance(s, Box)]
    others = [i for i, s in enumerate(approx.supports) if not isinstance(s, Box)]
    if boxes:
        corners = np.stack([approx.supports[i].vertices for i in boxes])
        flat = corners.reshape(-1, approx.dim)
        for j, support in enumerate(target.supports):
            inside = support.contains(flat).reshape(len(boxes), -1).all(axis=1)
            for position in np.where(inside)[0]:
                if owners[boxes[position]] < 0:
                    owners[boxes[position]] = j
    for i in others:
        vertices = approx.supports[i].vertices
        for j, support in enumerate(target.supports):
            if np.all(support.contains(vertices)):
                owners[i] = j
                break
    return owners


def lp_distance(approx: SimpleFunction, target: SimpleFunction, p: float) -> float:
    """
    Exact ‖approx - target‖_{L^p(μ_n)} for nested supports.

    Each piece of ``approx`` must lie inside one piece of ``target`` or be interior-disjoint
    from all of them.

    Raises:
        ContainmentViolation: If a piece straddles a target support
    """
    if approx.dim != target.dim:
        raise DimensionMismatch(f"functions on R^{approx.dim} and R^{target.dim}")
    owners = _owners(approx, target)
    approx_mu = _support_mu_measures(approx) if approx.pieces else np.empty(0)
    total = 0.0
    for j, (beta, support) in enumerate(target.pieces):
        mine = owners == j
        alphas = np.array(approx.coefficients)[mine] if approx.pieces else np.empty(0)
        covered = approx_mu[mine] if approx.pieces else np.empty(0)
        total += float(np.sum(np.abs(alphas - beta) ** p * covered))
        total += abs(beta) ** p * max(support.mu_measure - float(np.sum(covered)), 0.0)
    for i in np.where(owners < 0)[0]:
        alpha, support = approx.pieces[i]
        for other in target.supports:
            if _supports_overlap(support, other, DEFAULT_TOLERANCES.exact):
                raise ContainmentViolation(f"approximation piece {i} straddles a target support")
        total += abs(alpha) ** p * approx_mu[i]
    return total ** (1.0 / p)


@dataclass(frozen=True)
class FunctionSequence:
    """
    A sequence h_k -> limit in L^p(μ_n).

    Attributes:
        generator: Maps k >= 1 to h_k
        limit: The limit function h
        distance: Optional exact distance (h_k, h, p) -> float; defaults to lp_distance
    """

    generator: Callable[[int], SimpleFunction]
    limit: SimpleFunction
    distance: Optional[Callable[[SimpleFunction, SimpleFunction, float], float]] = None

    def term(self, k: int) -> SimpleFunction:
        return self.generator(k)

    def distance_to_limit(self, k: int, p: float) -> float:
        measure = self.distance or lp_distance
        return measure(self.term(k), self.limit, p)

    @classmethod
    def coefficient_sequence(cls, alpha: float, support: Support) -> "FunctionSequence":
        """h_k = (α + 1/k) 1_P converging to α 1_P."""
        return cls(
            generator=lambda k: SimpleFunction.indicator(support, alpha + 1.0 / k),
            limit=SimpleFunction.indicator(support, alpha),
        )

    @classmethod
    def dyadic_sequence(
        cls, alpha: float, polytope: Polytope, offset: int = 0
    ) -> "FunctionSequence":
        """h_k = α times the indicator of the inner dyadic cubes of size 2^-(k+offset)."""
        return cls(
            generator=lambda k: GridFunction.indicator_of_inner_cells(
                polytope, 2.0 ** -(k + offset), alpha
            ).to_simple(),
            limit=SimpleFunction.indicator(polytope, alpha),
        )


def _sphere_area(n: int) -> float:
    return 2.0 * math.pi ** (n / 2.0) / float(gamma_function(n / 2.0))


def radial_membership_and_K_probe(
    xi: CompositionFunction, p: float, n: int, gamma: float, r_max: float = 1e6
) -> ProbeReport:
    """
    Probe finiteness of K(ξ∘h) on h(x) = |x|^-γ 1_{1 <= |x| <= R} as R -> ∞.

    Membership h ∈ L^p(μ_n) is decided symbolically (∫_1^∞ r^{n+1-γp} dr finite iff
    γp > n+2). The reduced integral ∫_1^R ξ(r^-γ) r^{n+1} dr, which is the trace of
    K(ξ∘h) up to the sphere area, is tabulated at R = 10, 10², 10³ and r_max; its
    divergence is judged from the growth of the last two decade increments.

    Args:
        xi: Composition function
        p: Exponent of the space
        n: Ambient dimension
        gamma: Decay rate γ > 0
        r_max: Largest radius tabulated, >= 1000

    Returns:
        ProbeReport; ``passed`` is False when h ∈ L^p(μ_n) but the reduced integral diverges
    """
    if gamma <= 0:
        raise InvalidParameter(f"gamma must be positive, got {gamma}")
    if r_max < 1e3:
        raise InvalidParameter(f"r_max must be at least 1000, got {r_max}")
    r = sympy.Symbol("r", positive=True)
    power = sympy.nsimplify(n + 1) - sympy.nsimplify(gamma) * sympy.nsimplify(p)
    membership = sympy.integrate(r**power, (r, 1, sympy.oo))
    in_space = bool(membership.is_finite)
    norm_power = float(membership) * _sphere_area(n) if in_space else math.inf

    def integrand(u: float) -> float:
        return float(xi(math.exp(-gamma * u))) * math.exp((n + 2) * u)

    def membership_partial(radius: float) -> float:
        exponent = n + 2 - gamma * p
        if abs(exponent) < 1e-12:
            return math.log(radius)
        return (radius**exponent - 1.0) / exponent

    radii = [10.0, 100.0, 1000.0, float(r_max)]
    checkpoints = sorted(set(radii))
    cache: Dict[float, float] = {}
    value, previous = 0.0, 0.0
    for radius in checkpoints:
        upper = math.log(radius)
        value += quad(integrand, previous, upper, limit=200)[0]
        cache[radius], previous = value, upper
    rows = [
        {
            "R": radius,
            "reduced_integral": cache[radius],
            "membership_integral": membership_partial(radius),
        }
        for radius in checkpoints
    ]
    # decade increments integrated directly; differences of the running sum lose them
    first = quad(integrand, math.log(r_max / 100.0), math.log(r_max / 10.0), limit=200)[0]
    second = quad(integrand, math.log(r_max / 10.0), math.log(r_max), limit=200)[0]
    if abs(second) == 0.0:
        slope = -math.inf
    elif abs(first) == 0.0:
        slope = math.inf
    else:
        slope = math.log10(abs(second) / abs(first))
    divergent = slope > -1e-6
    d = xi.growth_constant_d
    dominated = abs(cache[r_max]) <= d * membership_partial(r_max) * (1 + 1e-9) + 1e-12
    return ProbeReport(
        name="radial_membership",
        rows=rows,
        passed=not (in_space and divergent),
        verdict="divergent" if divergent else "convergent",
        details={
            "xi": xi.label,
            "n": n,
            "p": float(p),
            "gamma": float(gamma),
            "in_space": in_space,
            "membership_criterion": f"gamma*p > n+2: {gamma * p} > {n + 2}",
            "norm_power": norm_power,
            "decade_growth_exponent": slope,
            "dominated_by_growth_bound": bool(dominated),
        },
    )
