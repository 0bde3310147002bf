from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from igelite.cones import DimensionGuard, HCone, VCone, dd_convert
from igelite.numkit import (
    DEFAULT_TOLERANCES,
    Matrix,
    Tolerances,
    Vector,
    as_matrix,
    as_vector,
    nnls_simplex,
)
from igelite.utils import make_rng

logger = logging.getLogger("igelite.setvalues")

# ball polytopes are built in every coordinate plane, which grows quadratically
MAX_ENLARGE_DIMENSION = 4


@dataclass(frozen=True, eq=False)
class ConvexPiece:
    """conv(vertices) + cone(rays); vertices and rays are stored row-wise."""

    vertices: Matrix
    rays: Matrix

    def __post_init__(self) -> None:
        vertices = as_matrix(self.vertices, name="vertices")
        if vertices.shape[0] < 1:
            raise ValueError("a convex piece needs at least one vertex")
        dim = vertices.shape[1]
        rays = np.array(as_matrix(self.rays, dim, "rays"))
        norms = np.linalg.norm(rays, axis=1)
        rays = rays[norms > 0.0] / norms[norms > 0.0][:, None]
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "rays", as_matrix(rays, dim, "rays"))

    @classmethod
    def point(cls, y: Any) -> ConvexPiece:
        y = as_vector(y, "point")
        return cls(y[None, :], np.zeros((0, y.shape[0])))

    @classmethod
    def polytope(cls, vertices: Any) -> ConvexPiece:
        vertices = as_matrix(vertices, name="vertices")
        return cls(vertices, np.zeros((0, vertices.shape[1])))

    @property
    def dim(self) -> int:
        return int(self.vertices.shape[1])

    @property
    def bounded(self) -> bool:
        return self.rays.shape[0] == 0

    def with_rays(self, rays: Matrix) -> ConvexPiece:
        return ConvexPiece(self.vertices, np.vstack((self.rays, rays)))

    def plus(self, other: ConvexPiece) -> ConvexPiece:
        """Minkowski sum of two pieces."""
        sums = (self.vertices[:, None, :] + other.vertices[None, :, :]).reshape(-1, self.dim)
        return ConvexPiece(_dedupe(sums), np.vstack((self.rays, other.rays)))


@dataclass(frozen=True, eq=False)
class SetExpr:
    """A finite union of convex pieces."""

    pieces: tuple[ConvexPiece, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if not self.pieces:
            raise ValueError("a set expression needs at least one piece")
        if len({piece.dim for piece in self.pieces}) != 1:
            raise ValueError("all pieces must share one dimension")

    @classmethod
    def of(cls, *pieces: ConvexPiece) -> SetExpr:
        return cls(tuple(pieces))

    @property
    def dim(self) -> int:
        return self.pieces[0].dim

    def __iter__(self) -> Iterator[ConvexPiece]:
        return iter(self.pieces)

    def vertices(self) -> Matrix:
        return np.vstack([piece.vertices for piece in self.pieces])

    def plus(self, piece: ConvexPiece) -> SetExpr:
        return SetExpr(tuple(own.plus(piece) for own in self.pieces))

    def with_rays(self, rays: Matrix) -> SetExpr:
        return SetExpr(tuple(piece.with_rays(rays) for piece in self.pieces))


def _dedupe(rows: Matrix, eps: float = 1e-12) -> Matrix:
    if rows.shape[0] <= 1:
        return rows
    kept = [rows[0]]
    for row in rows[1:]:
        if all(np.abs(row - other).max() > eps for other in kept):
            kept.append(row)
    return np.array(kept)


@dataclass(frozen=True, eq=False)
class NearestPoint:
    distance: float
    point: Vector
    # false when the projection solver ended above its KKT tolerance
    verified: bool = True


def _piece_distance(y: Vector, piece: ConvexPiece, tol: Tolerances) -> NearestPoint:
    if piece.bounded and piece.vertices.shape[0] == 1:
        vertex = piece.vertices[0]
        return NearestPoint(float(np.linalg.norm(y - vertex)), vertex.copy())
    G = np.hstack((piece.vertices.T, piece.rays.T))
    mask = np.zeros(G.shape[1], dtype=bool)
    mask[: piece.vertices.shape[0]] = True
    result = nnls_simplex(G, y, mask, tol)
    if result.kkt_residual > tol.kkt_tol * max(1.0, float(np.abs(G).max()) * float(np.abs(y).max())):
        logger.debug("distance KKT residual %g above tolerance", result.kkt_residual)
        return NearestPoint(result.residual_norm, result.fitted, verified=False)
    return NearestPoint(result.residual_norm, result.fitted)


def dist_point_to(y: Any, s: SetExpr, tol: Tolerances = DEFAULT_TOLERANCES) -> NearestPoint:
    """Distance from y to a union of pieces and a nearest point (first piece wins ties)."""
    y = as_vector(y, "point")
    if y.shape[0] != s.dim:
        raise ValueError("point and set have different dimensions")
    best: NearestPoint | None = None
    verified = True
    for piece in s:
        candidate = _piece_distance(y, piece, tol)
        verified = verified and candidate.verified
        if best is None or candidate.distance < best.distance:
            best = candidate
    assert best is not None
    return replace(best, verified=verified)


def excess_over_cone(s: SetExpr, C: HCone, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """exc(s, C); infinite as soon as a ray of s leaves C."""
    if s.dim != C.dim:
        raise ValueError("set and cone have different dimensions")
    worst = 0.0
    for piece in s:
        for ray in piece.rays:
            if not C.contains(ray, tol):
                return math.inf
        for vertex in piece.vertices:
            worst = max(worst, C.distance(vertex, tol))
    return worst


def ball_vertices(dim: int, radius: float, sides: int) -> Matrix:
    """Vertices of the polytope inscribed in the ball of the given radius.

    Regular polygons are placed in every coordinate plane; on the line the
    polytope is the ball itself.
    """
    if dim == 1:
        return np.array([[radius], [-radius]])
    angles = 2.0 * math.pi * np.arange(sides) / sides
    eye = np.eye(dim)
    points: list[Vector] = []
    for i, j in itertools.combinations(range(dim), 2):
        points.extend(radius * (np.cos(angle) * eye[i] + np.sin(angle) * eye[j]) for angle in angles)
    return _dedupe(np.array(points), eps=1e-12 * max(radius, 1.0))


def ball_gap(dim: int, sides: int) -> float:
    """Relative radius lost by the inscribed ball polytope."""
    if dim == 1:
        return 0.0
    return 1.0 - math.cos(math.pi / sides) * math.sqrt(2.0 / dim)


@dataclass(frozen=True, eq=False)
class Enlargement:
    inner: SetExpr
    outer: SetExpr
    # radius lost by the inscribed ball polytope, relative to r; the outer ball has radius r / (1 - gap)
    gap: float


def enlarge(s: SetExpr, r: float, sides: int = 16) -> Enlargement:
    """Polytopal inner and outer approximations of s + r·ball."""
    if r < 0.0:
        raise ValueError("enlargement radius must be nonnegative")
    if s.dim > MAX_ENLARGE_DIMENSION:
        raise DimensionGuard(f"ball polytopes limited to dimension {MAX_ENLARGE_DIMENSION}")
    if sides < 4:
        raise ValueError("ball polygons need at least four sides")
    if r == 0.0:
        return Enlargement(inner=s, outer=s, gap=0.0)
    gap = ball_gap(s.dim, sides)
    inner_ball = ConvexPiece.polytope(ball_vertices(s.dim, r, sides))
    outer_ball = ConvexPiece.polytope(ball_vertices(s.dim, r / (1.0 - gap), sides))
    return Enlargement(inner=s.plus(inner_ball), outer=s.plus(outer_ball), gap=gap)


def cone_generators(C: HCone, tol: Tolerances = DEFAULT_TOLERANCES) -> Matrix:
    return dd_convert(C, tol).R


def conic_extension_excess_check(
    s: SetExpr, C: HCone, tol: Tolerances = DEFAULT_TOLERANCES
) -> tuple[float, float]:
    """Both sides of exc(s + C, C) = exc(s, C)."""
    extended = s.with_rays(cone_generators(C, tol))
    return excess_over_cone(extended, C, tol), excess_over_cone(s, C, tol)


def _in_recession(ray: Vector, rays: Matrix, tol: Tolerances) -> bool:
    return VCone(rays, ray.shape[0]).contains(ray, tol)


def excess_between(
    a: SetExpr,
    b: SetExpr,
    tol: Tolerances = DEFAULT_TOLERANCES,
    samples: int = 64,
    seed: int = 0,
) -> float:
    """exc(a, b).

    Exact by the vertex rule when b is a single convex piece. Over a union the
    distance is not convex, so points of a are sampled: vertices, random convex
    combinations and their shifts along the rays of a.
    """
    if a.dim != b.dim:
        raise ValueError("sets have different dimensions")
    if len(b.pieces) == 1:
        target = b.pieces[0]
        worst = 0.0
        for piece in a:
            if any(not _in_recession(ray, target.rays, tol) for ray in piece.rays):
                return math.inf
            for vertex in piece.vertices:
                worst = max(worst, _piece_distance(vertex, target, tol).distance)
        return worst

    rng = make_rng(seed)
    worst = 0.0
    for piece in a:
        for ray in piece.rays:
            if not any(_in_recession(ray, other.rays, tol) for other in b):
                return math.inf
        for point in _sample_piece(piece, samples, rng):
            worst = max(worst, dist_point_to(point, b, tol).distance)
    return worst


def _sample_piece(piece: ConvexPiece, count: int, rng: np.random.Generator) -> Matrix:
    k = piece.vertices.shape[0]
    weights = rng.dirichlet(np.ones(k), size=count) if k > 1 else np.ones((count, 1))
    base = np.vstack((piece.vertices, weights @ piece.vertices))
    if piece.bounded:
        return base
    shifted = [base]
    for length in (0.5, 2.0):
        shifted.extend(base + length * ray for ray in piece.rays)
    return np.vstack(shifted)
