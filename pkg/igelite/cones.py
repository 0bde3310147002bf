from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from igelite.numkit import (
    DEFAULT_TOLERANCES,
    LpProblem,
    Matrix,
    Sense,
    Tolerances,
    Vector,
    as_matrix,
    as_vector,
    feasible_point,
    nnls,
    solve_lp,
)

logger = logging.getLogger("igelite.cones")

# enumeration in the double description method is combinatorial in the dimension
MAX_DD_DIMENSION = 10


class DimensionGuard(Exception):
    pass


class NotInSet(Exception):
    pass


@dataclass(frozen=True, eq=False)
class HCone:
    """The cone {y : A y >= 0}; rows of A are inward normals."""

    A: Matrix
    dim: int

    def __post_init__(self) -> None:
        A = as_matrix(self.A, self.dim, "cone normals")
        keep = np.linalg.norm(A, axis=1) > 0.0
        if not keep.all():
            A = as_matrix(A[keep], self.dim, "cone normals")
        object.__setattr__(self, "A", A)

    @classmethod
    def from_rows(cls, rows: Any, dim: int) -> HCone:
        return cls(as_matrix(rows, dim, "cone normals"), dim)

    @classmethod
    def whole(cls, dim: int) -> HCone:
        return cls(np.zeros((0, dim)), dim)

    @classmethod
    def orthant(cls, dim: int) -> HCone:
        return cls(np.eye(dim), dim)

    @classmethod
    def zero(cls, dim: int) -> HCone:
        return cls(np.vstack((np.eye(dim), -np.eye(dim))), dim)

    @property
    def num_rows(self) -> int:
        return int(self.A.shape[0])

    def margins(self, y: Vector) -> Vector:
        """Normalized constraint values a_j.y / |a_j|."""
        if self.num_rows == 0:
            return np.zeros(0)
        return (self.A @ y) / np.linalg.norm(self.A, axis=1)

    def contains(self, y: Vector, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
        if self.num_rows == 0:
            return True
        return bool(np.all(self.margins(np.asarray(y, dtype=float)) >= -tol.feas_tol))

    def intersect(self, *others: HCone) -> HCone:
        for other in others:
            if other.dim != self.dim:
                raise ValueError("cannot intersect cones of different dimensions")
        return HCone(np.vstack((self.A, *(other.A for other in others))), self.dim)

    def distance(self, y: Vector, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
        """Euclidean distance from y to the cone.

        By Moreau's decomposition it equals the norm of the projection of y
        onto the polar cone generated by the outward normals -a_j.
        """
        y = as_vector(y, "point")
        if self.num_rows == 0 or self.contains(y, tol):
            return 0.0
        result = nnls(-self.A.T, y, tol)
        return float(np.linalg.norm(result.fitted))


@dataclass(frozen=True, eq=False)
class VCone:
    """The cone generated by nonnegative combinations of the rows of R."""

    R: Matrix
    dim: int

    def __post_init__(self) -> None:
        R = np.array(as_matrix(self.R, self.dim, "cone rays"))
        norms = np.linalg.norm(R, axis=1)
        R = R[norms > 0.0] / norms[norms > 0.0][:, None]
        object.__setattr__(self, "R", as_matrix(_unique_rows(R), self.dim, "cone rays"))

    @classmethod
    def from_rays(cls, rays: Any, dim: int) -> VCone:
        return cls(as_matrix(rays, dim, "cone rays"), dim)

    @property
    def num_rays(self) -> int:
        return int(self.R.shape[0])

    def distance(self, y: Vector, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
        y = as_vector(y, "point")
        if self.num_rays == 0:
            return float(np.linalg.norm(y))
        return nnls(self.R.T, y, tol).residual_norm

    def contains(self, y: Vector, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
        y = np.asarray(y, dtype=float)
        return self.distance(y, tol) <= tol.feas_tol * max(1.0, float(np.linalg.norm(y)))


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """The set {x : G x >= g}."""

    G: Matrix
    g: Vector
    dim: int

    def __post_init__(self) -> None:
        G = as_matrix(self.G, self.dim, "polyhedron rows")
        g = as_vector(self.g, "polyhedron rhs")
        if g.shape[0] != G.shape[0]:
            raise ValueError("polyhedron rows and rhs have different lengths")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)

    @classmethod
    def whole(cls, dim: int) -> Polyhedron:
        return cls(np.zeros((0, dim)), np.zeros(0), dim)

    @classmethod
    def from_cone(cls, cone: HCone) -> Polyhedron:
        return cls(cone.A, np.zeros(cone.num_rows), cone.dim)

    @property
    def num_rows(self) -> int:
        return int(self.G.shape[0])

    def slack(self, x: Vector) -> Vector:
        return self.G @ x - self.g

    def _scale(self, x: Vector) -> Vector:
        return np.maximum(1.0, np.linalg.norm(self.G, axis=1) * float(np.linalg.norm(x)))

    def contains(self, x: Vector, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
        if self.num_rows == 0:
            return True
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.slack(x) >= -tol.feas_tol * self._scale(x)))

    def active_rows(self, x: Vector, tol: Tolerances = DEFAULT_TOLERANCES) -> Vector:
        x = np.asarray(x, dtype=float)
        if self.num_rows == 0:
            return np.zeros(0, dtype=bool)
        return np.abs(self.slack(x)) <= tol.feas_tol * self._scale(x)

    def is_interior(self, x: Vector, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
        return self.contains(x, tol) and not self.active_rows(x, tol).any()

    def is_empty(self, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
        return feasible_point(self.G, self.g, tol) is None

    def intersect(self, other: Polyhedron) -> Polyhedron:
        if other.dim != self.dim:
            raise ValueError("cannot intersect polyhedra of different dimensions")
        return Polyhedron(
            np.vstack((self.G, other.G)), np.concatenate((self.g, other.g)), self.dim
        )


def _unique_rows(rows: Matrix, eps: float = 1e-9) -> Matrix:
    kept: list[Vector] = []
    for row in rows:
        if not any(np.linalg.norm(row - other) <= eps for other in kept):
            kept.append(row)
    return np.array(kept).reshape(len(kept), rows.shape[1])


def dd_convert(cone: HCone, tol: Tolerances = DEFAULT_TOLERANCES) -> VCone:
    """Generators of an H-cone by the incremental double description method.

    The lineality space is tracked as an explicit basis and emitted as pairs
    of opposite rays.
    """
    n = cone.dim
    if n > MAX_DD_DIMENSION:
        raise DimensionGuard(f"double description limited to dimension {MAX_DD_DIMENSION}, got {n}")

    lineality = np.eye(n)
    rays = np.zeros((0, n))
    processed: list[Vector] = []
    for a in cone.A:
        eps = tol.feas_tol * float(np.linalg.norm(a))
        on_lineality = lineality @ a
        if lineality.shape[0] > 0 and np.abs(on_lineality).max() > eps:
            k = int(np.argmax(np.abs(on_lineality)))
            pivot = lineality[k] * np.sign(on_lineality[k])
            scale = float(pivot @ a)
            rest = np.delete(lineality, k, axis=0)
            lineality = rest - np.outer(rest @ a / scale, pivot)
            rays = rays - np.outer(rays @ a / scale, pivot)
            rays = np.vstack((rays, pivot))
        else:
            rays = _motzkin_step(rays, a, processed, n - lineality.shape[0], eps)
        rays = _normalize(rays)
        lineality = _orthonormal_basis(lineality)
        processed.append(a)
        logger.debug("dd step: %d rays, lineality %d", rays.shape[0], lineality.shape[0])

    generators = np.vstack((rays, lineality, -lineality))
    return VCone(generators, n)


def _motzkin_step(
    rays: Matrix, a: Vector, processed: list[Vector], free_dim: int, eps: float
) -> Matrix:
    values = rays @ a
    positive = np.flatnonzero(values > eps)
    negative = np.flatnonzero(values < -eps)
    zero = np.flatnonzero(np.abs(values) <= eps)
    kept = [rays[i] for i in (*positive, *zero)]
    previous = np.array(processed).reshape(len(processed), rays.shape[1])
    for p in positive:
        for q in negative:
            if not _adjacent(rays[p], rays[q], previous, free_dim, eps):
                continue
            kept.append(values[p] * rays[q] - values[q] * rays[p])
    return np.array(kept).reshape(len(kept), rays.shape[1])


def _adjacent(r: Vector, s: Vector, previous: Matrix, free_dim: int, eps: float) -> bool:
    if previous.shape[0] == 0:
        return free_dim <= 2
    common = (np.abs(previous @ r) <= eps) & (np.abs(previous @ s) <= eps)
    if not common.any():
        return free_dim <= 2
    return int(np.linalg.matrix_rank(previous[common], tol=eps * 10)) >= free_dim - 2


def _normalize(rows: Matrix) -> Matrix:
    if rows.shape[0] == 0:
        return rows
    norms = np.linalg.norm(rows, axis=1)
    rows = rows[norms > 1e-12] / norms[norms > 1e-12][:, None]
    return _unique_rows(rows)


def _orthonormal_basis(rows: Matrix) -> Matrix:
    if rows.shape[0] == 0:
        return rows
    _, singular, vt = np.linalg.svd(rows, full_matrices=False)
    return vt[singular > 1e-12]


def dd_convert_back(cone: VCone, tol: Tolerances = DEFAULT_TOLERANCES) -> HCone:
    """Inequalities of a V-cone: the generators of its dual give its outward normals."""
    polar = dd_convert(HCone(-cone.R, cone.dim), tol)
    return HCone(-polar.R, cone.dim)


def dual_cone(cone: HCone | VCone) -> HCone | VCone:
    """Negative dual {w : <w, y> <= 0 for all y in the cone}, in the other representation."""
    if isinstance(cone, HCone):
        return VCone(-cone.A, cone.dim)
    return HCone(-cone.R, cone.dim)


def tangent_cone(S: Polyhedron, x: Vector, tol: Tolerances = DEFAULT_TOLERANCES) -> HCone:
    x = as_vector(x, "point")
    if not S.contains(x, tol):
        raise NotInSet(f"point {x.tolist()} violates the polyhedron")
    return HCone(S.G[S.active_rows(x, tol)], S.dim)


def normal_cone(S: Polyhedron, x: Vector, tol: Tolerances = DEFAULT_TOLERANCES) -> VCone:
    result = dual_cone(tangent_cone(S, x, tol))
    assert isinstance(result, VCone)
    return result


def preimage_cone(linear_map: Matrix, cone: HCone) -> HCone:
    linear_map = as_matrix(linear_map, name="linear map")
    if linear_map.shape[0] != cone.dim:
        raise ValueError("linear map range does not match the cone dimension")
    return HCone(cone.A @ linear_map, linear_map.shape[1])


def dual_calculus_sum(Q: HCone, linear_map: Matrix, C: HCone) -> VCone:
    """Generators of Q⁻ + Λᵀ(C⁻), the dual of Q ∩ Λ⁻¹(C)."""
    linear_map = as_matrix(linear_map, Q.dim, "linear map")
    return VCone(np.vstack((-Q.A, -(C.A @ linear_map))), Q.dim)


@dataclass(frozen=True, eq=False)
class InteriorPoint:
    point: Vector
    slack: float


def interior_point(cone: HCone, tol: Tolerances = DEFAULT_TOLERANCES) -> InteriorPoint | None:
    """A point of the box [-1, 1]^n maximizing the normalized slack, if it is positive."""
    n = cone.dim
    norms = np.linalg.norm(cone.A, axis=1)
    problem = LpProblem(
        objective=np.concatenate((np.zeros(n), [1.0])),
        matrix=np.hstack((cone.A, -norms[:, None])),
        senses=(Sense.GE,) * cone.num_rows,
        rhs=np.zeros(cone.num_rows),
        bounds=((-1.0, 1.0),) * n + ((None, 1.0),),
        maximize=True,
    )
    solution = solve_lp(problem, tol)
    if not solution.optimal:
        return None
    assert solution.x is not None
    slack = float(solution.x[-1])
    if slack <= tol.feas_tol:
        return None
    return InteriorPoint(point=solution.x[:n], slack=slack)


def is_pointed(cone: HCone, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Whether the cone contains no line, i.e. {y : A y = 0} is trivial inside the unit box."""
    n = cone.dim
    for i in range(n):
        problem = LpProblem(
            objective=np.eye(n)[i],
            matrix=cone.A,
            senses=(Sense.EQ,) * cone.num_rows,
            rhs=np.zeros(cone.num_rows),
            bounds=((-1.0, 1.0),) * n,
            maximize=True,
        )
        solution = solve_lp(problem, tol)
        assert solution.objective is not None
        if solution.objective > tol.feas_tol:
            return False
    return True
