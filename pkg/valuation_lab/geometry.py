"""
Exact convex-polytope machinery.

Polytopes are stored by their extreme points in lexicographic order. Second moments
M_ij(P) = ∫_P x_i x_j dx are computed exactly by fan triangulation and the closed-form
second moment of a simplex; axis-aligned boxes use a tensor-product formula.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .config import DEFAULT_TOLERANCES, MAX_DIMENSION, RANDOM_POLYTOPE_ATTEMPTS
from .exceptions import (
    DegenerateDraw,
    DegenerateSimplex,
    DimensionMismatch,
    EmptySlice,
    InvalidParameter,
    InvalidTransform,
)

logger = logging.getLogger(__name__)

Point = Tuple[float, ...]
MomentMatrix = np.ndarray


def _check_dimension(n: int) -> None:
    if not 1 <= n <= MAX_DIMENSION:
        raise DimensionMismatch(f"ambient dimension must be in 1..{MAX_DIMENSION}, got {n}")


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class SLTransform:
    """
    A real n x n matrix with determinant one.

    Args:
        entries: Square matrix (nested sequences or array)
        det_tolerance: Allowed deviation |det - 1|
    """

    def __init__(self, entries, det_tolerance: float = DEFAULT_TOLERANCES.det):
        matrix = np.array(entries, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidTransform(f"expected a square matrix, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise InvalidTransform("matrix entries must be finite")
        det = float(np.linalg.det(matrix))
        if abs(det - 1.0) > det_tolerance:
            raise InvalidTransform(f"det = {det!r} is not 1 within {det_tolerance}")
        self.entries = _frozen(matrix)
        self.det_tolerance = det_tolerance

    @classmethod
    def identity(cls, n: int) -> "SLTransform":
        return cls(np.eye(n))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map row vectors x to φx."""
        return np.asarray(points, dtype=float) @ self.entries.T

    def congruence(self, matrix: np.ndarray) -> np.ndarray:
        """Return φ A φᵗ."""
        return self.entries @ np.asarray(matrix, dtype=float) @ self.entries.T

    def inverse(self) -> "SLTransform":
        return SLTransform(np.linalg.inv(self.entries), self.det_tolerance)

    def compose(self, other: "SLTransform") -> "SLTransform":
        """Return the transform x -> self(other(x))."""
        if other.dim != self.dim:
            raise DimensionMismatch(f"cannot compose SL({self.dim}) with SL({other.dim})")
        tolerance = max(self.det_tolerance, other.det_tolerance)
        return SLTransform(self.entries @ other.entries, tolerance)

    def __matmul__(self, other: "SLTransform") -> "SLTransform":
        return self.compose(other)

    def condition(self) -> float:
        return float(np.linalg.cond(self.entries))

    def to_list(self) -> List[List[float]]:
        return self.entries.tolist()

    def __repr__(self) -> str:
        return f"SLTransform({self.entries.tolist()!r})"


class Simplex:
    """
    Nondegenerate simplex given by n+1 vertices in R^n.

    Args:
        vertices: (n+1, n) array of vertex coordinates
        volume_tolerance: Relative threshold on |det| of the edge matrix
    """

    def __init__(self, vertices, volume_tolerance: float = DEFAULT_TOLERANCES.volume):
        verts = np.array(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[0] != verts.shape[1] + 1:
            raise DimensionMismatch(f"a simplex in R^n needs n+1 points, got shape {verts.shape}")
        n = verts.shape[1]
        edges = verts[1:] - verts[0]
        det = float(np.linalg.det(edges))
        scale = float(np.max(np.linalg.norm(edges, axis=1)))
        if scale == 0.0 or abs(det) <= volume_tolerance * scale**n:
            raise DegenerateSimplex(f"simplex volume determinant {det!r} is degenerate")
        self.vertices = _frozen(verts)
        self.det = det

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def volume(self) -> float:
        return abs(self.det) / math.factorial(self.dim)


def simplex_moment(simplex: Simplex) -> MomentMatrix:
    """
    Second moment matrix of a simplex.

    Uses vol(S) / ((n+1)(n+2)) * (Σ v vᵗ + s sᵗ) with s the vertex sum.

    Args:
        simplex: Nondegenerate simplex

    Returns:
        n x n symmetric matrix ∫_S x xᵗ dx
    """
    n = simplex.dim
    verts = simplex.vertices
    total = verts.sum(axis=0)
    gram = verts.T @ verts + np.outer(total, total)
    return simplex.volume / ((n + 1) * (n + 2)) * gram


def _simplex_moments_sum(simplices: np.ndarray, volume_tolerance: float) -> np.ndarray:
    """Sum of simplex_moment over a (F, n+1, n) stack, skipping degenerate members."""
    n = simplices.shape[2]
    if simplices.shape[0] == 0:
        return np.zeros((n, n))
    edges = simplices[:, 1:, :] - simplices[:, :1, :]
    dets = np.linalg.det(edges)
    scales = np.max(np.linalg.norm(edges, axis=2), axis=1)
    keep = np.abs(dets) > volume_tolerance * scales**n
    if not np.any(keep):
        return np.zeros((n, n))
    verts = simplices[keep]
    volumes = np.abs(dets[keep]) / math.factorial(n)
    totals = verts.sum(axis=1)
    grams = np.einsum("fki,fkj->fij", verts, verts) + np.einsum("fi,fj->fij", totals, totals)
    moment = np.einsum("f,fij->ij", volumes, grams) / ((n + 1) * (n + 2))
    return 0.5 * (moment + moment.T)


def _box_moments_sum(lower: np.ndarray, upper: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Σ_k w_k ∫_{box_k} x xᵗ dx for (N, n) arrays of box corners."""
    n = lower.shape[1]
    widths = upper - lower
    first = (upper**2 - lower**2) / 2.0
    second = (upper**3 - lower**3) / 3.0
    moment = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            others = [k for k in range(n) if k != i and k != j]
            base = np.prod(widths[:, others], axis=1) if others else np.ones(len(weights))
            factor = second[:, i] if i == j else first[:, i] * first[:, j]
            moment[i, j] = moment[j, i] = float(np.sum(weights * base * factor))
    return moment


def _box_mu_measures(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Per-box μ_n measures ∫_box |x|² dx for (N, n) corner arrays."""
    n = lower.shape[1]
    widths = upper - lower
    second = (upper**3 - lower**3) / 3.0
    total = np.zeros(len(lower))
    for i in range(n):
        others = [k for k in range(n) if k != i]
        total += second[:, i] * (np.prod(widths[:, others], axis=1) if others else 1.0)
    return total


@dataclass(frozen=True)
class Box:
    """
    Axis-aligned box [lower, upper] in R^n.

    Attributes:
        lower: Lower corner
        upper: Upper corner, componentwise >= lower
    """

    lower: Point
    upper: Point

    def __post_init__(self):
        lower = tuple(float(x) for x in self.lower)
        upper = tuple(float(x) for x in self.upper)
        if len(lower) != len(upper):
            raise DimensionMismatch(f"box corners of length {len(lower)} and {len(upper)}")
        if any(lo > hi for lo, hi in zip(lower, upper)):
            raise InvalidParameter(f"box lower corner {lower} exceeds upper corner {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, corner: Sequence[float], side: float) -> "Box":
        return cls(tuple(corner), tuple(c + side for c in corner))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def side_lengths(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    def is_cube(self, tol: float = DEFAULT_TOLERANCES.exact) -> bool:
        sides = self.side_lengths
        return bool(np.all(np.abs(sides - sides[0]) <= tol * max(1.0, sides[0])))

    @property
    def volume(self) -> float:
        return float(np.prod(self.side_lengths))

    @property
    def vertices(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lower, self.upper))), dtype=float)

    @property
    def moment(self) -> MomentMatrix:
        return _box_moments_sum(np.array([self.lower]), np.array([self.upper]), np.ones(1))

    @property
    def mu_measure(self) -> float:
        return float(_box_mu_measures(np.array([self.lower]), np.array([self.upper]))[0])

    @property
    def affine_dim(self) -> int:
        return int(np.count_nonzero(self.side_lengths))

    @property
    def is_full_dimensional(self) -> bool:
        return self.affine_dim == self.dim

    def radius(self) -> float:
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def contains(self, points: np.ndarray, tol: float = DEFAULT_TOLERANCES.exact) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = (pts >= np.subtract(self.lower, tol)) & (pts <= np.add(self.upper, tol))
        return np.all(inside, axis=1)

    def to_polytope(self) -> "Polytope":
        return Polytope(self.vertices, dim=self.dim)

    def transform(self, phi: SLTransform) -> "Polytope":
        return transform_polytope(phi, self.to_polytope())

    def bounding_box(self) -> "Box":
        return self


class Polytope:
    """
    Bounded convex polytope in R^n given by its extreme points.

    The vertex list is canonicalized on construction: points that are not extreme are
    dropped and the remainder sorted lexicographically. Lower-dimensional polytopes
    (including the empty one) are valid values with zero moment.

    Args:
        points: (m, n) array of points whose convex hull is the polytope
        dim: Ambient dimension, required when ``points`` is empty
        tol: Relative tolerance for rank and containment decisions
    """

    def __init__(self, points, dim: Optional[int] = None, tol: float = DEFAULT_TOLERANCES.exact):
        pts = np.array(points, dtype=float)
        if pts.size == 0:
            if dim is None:
                raise DimensionMismatch("dimension is required for an empty polytope")
            pts = pts.reshape(0, dim)
        if pts.ndim != 2:
            raise DimensionMismatch(f"expected an (m, n) point array, got shape {pts.shape}")
        if dim is not None and pts.shape[1] != dim:
            raise DimensionMismatch(f"points of dimension {pts.shape[1]} for a polytope in R^{dim}")
        _check_dimension(pts.shape[1])
        if not np.all(np.isfinite(pts)):
            raise InvalidParameter("polytope coordinates must be finite")
        self.tol = tol
        self._setup(pts)

    @classmethod
    def empty(cls, dim: int) -> "Polytope":
        return cls(np.empty((0, dim)), dim=dim)

    @classmethod
    def simplex(cls, dim: int) -> "Polytope":
        """The standard simplex conv{0, e_1, ..., e_n}."""
        return cls(np.vstack([np.zeros(dim), np.eye(dim)]))

    def _setup(self, pts: np.ndarray) -> None:
        m, n = pts.shape
        self.dim = n
        self._origin = np.zeros(n)
        self._basis = np.eye(n)
        self._local_equations = np.empty((0, n + 1))
        self.scale = 1.0
        if m == 0:
            self.affine_dim = -1
            self.vertices = _frozen(pts)
            return

        centroid = pts.mean(axis=0)
        centered = pts - centroid
        self.scale = float(max(np.max(np.abs(pts)), np.max(np.abs(centered)), 1e-300))
        _, singular, vt = np.linalg.svd(centered, full_matrices=False)
        rank = int(np.sum(singular > self.tol * self.scale * max(1.0, math.sqrt(m))))
        self.affine_dim = rank

        if rank == n:
            extreme = self._full_extreme(pts)
        else:
            self._origin = centroid
            self._basis = vt[:rank]
            local = centered @ self._basis.T
            extreme, self._local_equations = self._lowdim_extreme(pts, local, rank)

        order = np.lexsort(extreme.T[::-1])
        self.vertices = _frozen(np.ascontiguousarray(extreme[order]))
        if rank == n:
            self._local_equations = self._full_equations()

    def _full_extreme(self, pts: np.ndarray) -> np.ndarray:
        if self.dim == 1:
            return np.array([[pts[:, 0].min()], [pts[:, 0].max()]])
        return pts[_hull(pts).vertices]

    def _lowdim_extreme(self, pts: np.ndarray, local: np.ndarray, rank: int):
        if rank == 0:
            return pts[:1], np.empty((0, 1))
        if rank == 1:
            coords = local[:, 0]
            lo, hi = int(np.argmin(coords)), int(np.argmax(coords))
            equations = np.array([[-1.0, coords[lo]], [1.0, -coords[hi]]])
            return pts[[lo, hi]], equations
        hull = _hull(local)
        return pts[hull.vertices], hull.equations

    def _full_equations(self) -> np.ndarray:
        if self.dim == 1:
            lo, hi = self.vertices[0, 0], self.vertices[-1, 0]
            return np.array([[-1.0, lo], [1.0, -hi]])
        return self.hull.equations

    @cached_property
    def hull(self) -> ConvexHull:
        """Qhull object over the canonical vertex list (full-dimensional, n >= 2 only)."""
        if not self.is_full_dimensional or self.dim < 2:
            raise DegenerateSimplex("hull facets exist only for full-dimensional polytopes, n >= 2")
        return _hull(self.vertices)

    @property
    def is_empty(self) -> bool:
        return self.affine_dim < 0

    @property
    def is_full_dimensional(self) -> bool:
        return self.affine_dim == self.dim

    @property
    def facet_equations(self) -> np.ndarray:
        """Rows (a, b) with a·x + b <= 0 inside; only meaningful when full-dimensional."""
        return self._local_equations

    @cached_property
    def volume(self) -> float:
        if not self.is_full_dimensional:
            return 0.0
        if self.dim == 1:
            return float(self.vertices[-1, 0] - self.vertices[0, 0])
        return float(self.hull.volume)

    @cached_property
    def moment(self) -> MomentMatrix:
        return polytope_moment(self)

    @property
    def mu_measure(self) -> float:
        """μ_n(P) = ∫_P |x|² dx, the trace of the moment matrix."""
        return float(np.trace(self.moment))

    def contains(self, points: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
        """
        Vectorized closed-set membership test.

        Args:
            points: (N, n) array
            tol: Absolute slack; defaults to tol * max(1, scale)

        Returns:
            Boolean array of length N
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_empty:
            return np.zeros(len(pts), dtype=bool)
        slack = self.tol * max(1.0, self.scale) if tol is None else tol
        shifted = pts - self._origin
        local = shifted @ self._basis.T
        inside = np.ones(len(pts), dtype=bool)
        if not self.is_full_dimensional:
            off_plane = np.linalg.norm(shifted - local @ self._basis, axis=1)
            inside &= off_plane <= slack
            if self.affine_dim == 0:
                return inside
        equations = self._local_equations
        values = local @ equations[:, :-1].T + equations[:, -1]
        inside &= np.all(values <= slack, axis=1)
        return inside

    def transform(self, phi: SLTransform) -> "Polytope":
        return transform_polytope(phi, self)

    def to_polytope(self) -> "Polytope":
        return self

    def bounding_box(self) -> Box:
        if self.is_empty:
            return Box((0.0,) * self.dim, (0.0,) * self.dim)
        return Box(tuple(self.vertices.min(axis=0)), tuple(self.vertices.max(axis=0)))

    def radius(self) -> float:
        """Largest |x| over the polytope (attained at a vertex)."""
        if self.is_empty:
            return 0.0
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polytope):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.vertices.shape == other.vertices.shape
            and bool(np.allclose(self.vertices, other.vertices, rtol=0.0, atol=1e-12))
        )

    __hash__ = None

    def __repr__(self) -> str:
        return (
            f"Polytope(dim={self.dim}, affine_dim={self.affine_dim}, "
            f"vertices={self.vertices.tolist()!r})"
        )


Support = Union[Polytope, Box]


def _hull(points: np.ndarray) -> ConvexHull:
    try:
        return ConvexHull(points)
    except QhullError:
        logger.debug("Qhull failed on %d points, retrying with joggle", len(points))
        return ConvexHull(points, qhull_options="QJ")


def _fan_simplices(polytope: Polytope) -> np.ndarray:
    """(F, n+1, n) stack of fan simplices from the first vertex over boundary facets."""
    verts = polytope.vertices
    n = polytope.dim
    if n == 1:
        return verts.reshape(1, 2, 1)
    facets = polytope.hull.simplices
    facets = facets[~np.any(facets == 0, axis=1)]
    apex = np.broadcast_to(verts[0], (len(facets), 1, n))
    return np.concatenate([apex, verts[facets]], axis=1)


def fan_triangulation(polytope: Polytope) -> List[Simplex]:
    """
    Decompose a full-dimensional polytope into simplices sharing its first vertex.

    Args:
        polytope: Full-dimensional polytope

    Returns:
        List of nondegenerate simplices with pairwise disjoint interiors
    """
    if not polytope.is_full_dimensional:
        return []
    simplices = []
    for verts in _fan_simplices(polytope):
        try:
            simplices.append(Simplex(verts, polytope.tol))
        except DegenerateSimplex:
            continue
    return simplices


def polytope_moment(polytope: Polytope) -> MomentMatrix:
    """
    Exact moment matrix M_ij(P) = ∫_P x_i x_j dx.

    Args:
        polytope: Any polytope; lower-dimensional ones are Lebesgue-null

    Returns:
        n x n symmetric positive semidefinite matrix
    """
    if not polytope.is_full_dimensional:
        return np.zeros((polytope.dim, polytope.dim))
    return _simplex_moments_sum(_fan_simplices(polytope), polytope.tol)


def transform_polytope(phi: SLTransform, polytope: Support) -> Polytope:
    """
    Image φP of a polytope (or box) under an SL(n) map.

    Raises:
        DimensionMismatch: If φ and P live in different dimensions
    """
    if phi.dim != polytope.dim:
        raise DimensionMismatch(
            f"SL({phi.dim}) transform applied to a polytope in R^{polytope.dim}"
        )
    if isinstance(polytope, Box):
        polytope = polytope.to_polytope()
    return Polytope(phi.apply(polytope.vertices), dim=polytope.dim, tol=polytope.tol)


def _cyclic_order(vertices: np.ndarray) -> np.ndarray:
    center = vertices.mean(axis=0)
    angles = np.arctan2(vertices[:, 1] - center[1], vertices[:, 0] - center[0])
    return vertices[np.argsort(angles)]


def _clip_polygon(polytope: Polytope, normal: np.ndarray, offset: float, slack: float) -> Polytope:
    """Single-edge vertex walk: keep {x·normal <= offset} of a convex polygon."""
    ring = _cyclic_order(polytope.vertices)
    output = []
    previous = ring[-1]
    prev_value = previous @ normal - offset
    for current in ring:
        value = current @ normal - offset
        if value <= slack:
            if prev_value > slack:
                output.append(previous + (current - previous) * prev_value / (prev_value - value))
            output.append(current)
        elif prev_value <= slack:
            output.append(previous + (current - previous) * prev_value / (prev_value - value))
        previous, prev_value = current, value
    if not output:
        return Polytope.empty(polytope.dim)
    return Polytope(np.array(output), dim=polytope.dim, tol=polytope.tol)


def _crossing_points(polytope: Polytope, values: np.ndarray, slack: float) -> np.ndarray:
    """Vertices on the kept side plus every vertex-pair segment crossing the plane."""
    verts = polytope.vertices
    kept = [verts[values <= slack]]
    inside = np.where(values < -slack)[0]
    outside = np.where(values > slack)[0]
    if len(inside) and len(outside):
        a = verts[inside][:, None, :]
        b = verts[outside][None, :, :]
        va = values[inside][:, None, None]
        vb = values[outside][None, :, None]
        kept.append((a + (b - a) * va / (va - vb)).reshape(-1, polytope.dim))
    return np.vstack(kept)


def _chebyshev_center(equations: np.ndarray) -> Tuple[np.ndarray, float]:
    """Center and radius of the largest ball inside {x: A x + b <= 0}."""
    normals, offsets = equations[:, :-1], equations[:, -1]
    norms = np.linalg.norm(normals, axis=1)
    n = normals.shape[1]
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    result = linprog(
        cost,
        A_ub=np.hstack([normals, norms[:, None]]),
        b_ub=-offsets,
        bounds=[(None, None)] * n + [(0.0, None)],
        method="highs",
    )
    if not result.success:
        return np.zeros(n), 0.0
    return result.x[:-1], float(result.x[-1])


def clip_halfspace(polytope: Polytope, normal, offset: float) -> Polytope:
    """
    Intersection P ∩ {x : x·normal <= offset}.

    Convex polygons are clipped by a vertex walk. In higher dimension the clipped
    polytope is found by halfspace intersection with vertex enumeration; when the
    result has empty interior it lies in the cutting plane and is rebuilt from the
    kept vertices and the plane's crossings of vertex-pair segments.

    Args:
        polytope: Polytope to clip
        normal: Normal vector a
        offset: Right-hand side b

    Returns:
        The clipped polytope, possibly lower-dimensional or empty
    """
    normal = np.asarray(normal, dtype=float)
    if normal.shape != (polytope.dim,):
        raise DimensionMismatch(
            f"normal of shape {normal.shape} for a polytope in R^{polytope.dim}"
        )
    if polytope.is_empty:
        return polytope
    values = polytope.vertices @ normal - offset
    slack = polytope.tol * max(1.0, polytope.scale) * max(1.0, float(np.linalg.norm(normal)))
    if np.all(values <= slack):
        return polytope
    if np.all(values > slack):
        return Polytope.empty(polytope.dim)

    if polytope.is_full_dimensional and polytope.dim == 2:
        return _clip_polygon(polytope, normal, offset, slack)

    if polytope.is_full_dimensional and polytope.dim >= 3:
        cut = np.append(normal, -offset) / np.linalg.norm(normal)
        equations = np.vstack([polytope.facet_equations, cut])
        center, radius = _chebyshev_center(equations)
        if radius > polytope.tol * max(1.0, polytope.scale):
            try:
                vertices = HalfspaceIntersection(equations, center).intersections
                return Polytope(vertices, dim=polytope.dim, tol=polytope.tol)
            except QhullError:
                logger.debug("Halfspace intersection failed, falling back to segment crossings")
        else:
            logger.debug("Clipped piece has empty interior (radius %.3g)", radius)

    return Polytope(_crossing_points(polytope, values, slack), dim=polytope.dim, tol=polytope.tol)


def intersect_polytopes(first: Support, second: Support) -> Polytope:
    """
    Intersection of two convex polytopes by clipping with each facet of the second.

    At least one operand must be full-dimensional for the result to be exact; when both
    are lower-dimensional the (Lebesgue-null) intersection is returned as empty.

    Returns:
        P ∩ Q, possibly empty
    """
    if first.dim != second.dim:
        raise DimensionMismatch(f"cannot intersect polytopes in R^{first.dim} and R^{second.dim}")
    result = first.to_polytope()
    other = second.to_polytope()
    if result.is_empty or other.is_empty:
        return Polytope.empty(first.dim)
    if not other.is_full_dimensional:
        if not result.is_full_dimensional:
            return Polytope.empty(first.dim)
        result, other = other, result
    first_box, second_box = result.bounding_box(), other.bounding_box()
    if np.any(np.array(first_box.upper) < np.array(second_box.lower)) or np.any(
        np.array(second_box.upper) < np.array(first_box.lower)
    ):
        return Polytope.empty(first.dim)
    for row in other.facet_equations:
        result = clip_halfspace(result, row[:-1], -row[-1])
        if result.is_empty:
            break
    return result


def halfspace_slice(
    polytope: Polytope, u, c_lo: float, c_hi: float, strict: bool = False
) -> Tuple[Polytope, Polytope]:
    """
    Split P into two overlapping convex pieces along direction u.

    Returns P₁ = P ∩ {x·u <= c_hi} and P₂ = P ∩ {x·u >= c_lo}; P₁ ∪ P₂ = P and
    P₁ ∩ P₂ = slab(P, u, c_lo, c_hi).

    Args:
        polytope: Polytope to split
        u: Nonzero direction
        c_lo: Lower slab level
        c_hi: Upper slab level, >= c_lo
        strict: Raise EmptySlice when a piece is not full-dimensional

    Returns:
        Tuple (P₁, P₂)
    """
    u = np.asarray(u, dtype=float)
    if c_lo > c_hi:
        raise InvalidParameter(f"c_lo = {c_lo} exceeds c_hi = {c_hi}")
    if not np.any(u):
        raise InvalidParameter("slice direction must be nonzero")
    lower = clip_halfspace(polytope, u, c_hi)
    upper = clip_halfspace(polytope, -u, -c_lo)
    if strict and not (lower.is_full_dimensional and upper.is_full_dimensional):
        raise EmptySlice("a slice piece is not full-dimensional")
    return lower, upper


def slab(polytope: Polytope, u, c_lo: float, c_hi: float) -> Polytope:
    """P ∩ {c_lo <= x·u <= c_hi}."""
    u = np.asarray(u, dtype=float)
    return clip_halfspace(clip_halfspace(polytope, u, c_hi), -u, -c_lo)


def _dyadic_exponent(delta: float) -> int:
    k = -math.log2(delta) if delta > 0 else float("nan")
    if not math.isfinite(k) or k < -1e-12 or abs(k - round(k)) > 1e-12:
        raise InvalidParameter(f"grid size must be 2^-k for integer k >= 0, got {delta!r}")
    return int(round(k))


def dyadic_inner_indices(polytope: Polytope, delta: float, max_batch: int = 1 << 21) -> np.ndarray:
    """
    Integer indices i of grid cells [iδ, (i+1)δ] contained in P.

    Args:
        polytope: Full-dimensional polytope
        delta: Dyadic grid size 2^-k
        max_batch: Cap on corner points tested at once

    Returns:
        (C, n) integer array in lexicographic order
    """
    _dyadic_exponent(delta)
    n = polytope.dim
    if not polytope.is_full_dimensional:
        return np.empty((0, n), dtype=np.int64)
    low = np.floor(polytope.vertices.min(axis=0) / delta).astype(np.int64)
    high = np.ceil(polytope.vertices.max(axis=0) / delta).astype(np.int64)
    axes = [np.arange(lo, hi) for lo, hi in zip(low, high)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    offsets = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    per_batch = max(1, max_batch // len(offsets))
    kept = []
    for start in range(0, len(grid), per_batch):
        cells = grid[start : start + per_batch]
        corners = ((cells[:, None, :] + offsets[None, :, :]) * delta).reshape(-1, n)
        inside = polytope.contains(corners).reshape(len(cells), len(offsets))
        kept.append(cells[np.all(inside, axis=1)])
    return np.vstack(kept) if kept else np.empty((0, n), dtype=np.int64)


def dyadic_inner_cubes(polytope: Polytope, delta: float) -> Tuple[List[Box], float]:
    """
    Grid cubes of side δ inside P and the uncovered volume.

    Args:
        polytope: Full-dimensional polytope
        delta: Dyadic grid size 2^-k

    Returns:
        Tuple (cells, gap) with gap = λ(P) - Σ λ(cells) = λ(P △ ∪cells)
    """
    indices = dyadic_inner_indices(polytope, delta)
    cells = [Box.cube(tuple(row * delta), delta) for row in indices]
    gap = polytope.volume - len(cells) * delta**polytope.dim
    return cells, max(gap, 0.0)


def random_sl_matrix(seed: int, n: int, shear_count: int, shear_bound: float) -> SLTransform:
    """
    Deterministic random element of SL(n).

    Product of elementary shears (one off-diagonal entry in [-shear_bound, shear_bound])
    interleaved with determinant-one diagonal scalings.

    Args:
        seed: Random seed
        n: Dimension, >= 2
        shear_count: Number of shear factors
        shear_bound: Bound on the shear entries, > 0

    Returns:
        SLTransform
    """
    if n < 2:
        raise InvalidParameter(f"random SL(n) matrices need n >= 2, got {n}")
    if shear_bound <= 0:
        raise InvalidParameter(f"shear_bound must be positive, got {shear_bound}")
    rng = np.random.default_rng(seed)
    matrix = np.eye(n)
    for _ in range(shear_count):
        i, j = rng.choice(n, size=2, replace=False)
        shear = np.eye(n)
        shear[i, j] = rng.uniform(-shear_bound, shear_bound)
        log_scale = rng.uniform(-0.25, 0.25, size=n)
        log_scale -= log_scale.mean()
        matrix = np.diag(np.exp(log_scale)) @ shear @ matrix
    return SLTransform(matrix)


def random_polytope(seed: int, n: int, m_points: int, scale: float) -> Polytope:
    """
    Convex hull of uniform samples in [-scale, scale]^n.

    Raises:
        DegenerateDraw: If no full-dimensional hull appears within the retry budget
    """
    if m_points < n + 1:
        raise InvalidParameter(f"need at least n+1 = {n + 1} points, got {m_points}")
    _check_dimension(n)
    rng = np.random.default_rng(seed)
    for attempt in range(RANDOM_POLYTOPE_ATTEMPTS):
        polytope = Polytope(rng.uniform(-scale, scale, size=(m_points, n)), dim=n)
        if polytope.is_full_dimensional and polytope.volume > 1e-9 * (2 * scale) ** n:
            return polytope
        logger.debug("random_polytope seed=%d attempt %d was degenerate", seed, attempt)
    raise DegenerateDraw(f"no full-dimensional hull after {RANDOM_POLYTOPE_ATTEMPTS} attempts")


def zero_structure_transforms(n: int, k: float = 2.0) -> List[SLTransform]:
    """
    Determinant-one matrices that pin down the value of a covariant map at 0.

    For n = 2: diag(k, 1/k) and the unit lower shear. For n >= 3: diag(k, ..., k, k^(1-n)).
    """
    if n == 2:
        return [SLTransform([[k, 0.0], [0.0, 1.0 / k]]), SLTransform([[1.0, 0.0], [1.0, 1.0]])]
    diagonal = np.full(n, k)
    diagonal[-1] = k ** (1 - n)
    return [SLTransform(np.diag(diagonal))]
