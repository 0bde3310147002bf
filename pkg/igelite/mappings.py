from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from igelite.cones import HCone, Polyhedron, is_pointed
from igelite.fans import Fan
from igelite.numkit import (
    DEFAULT_TOLERANCES,
    Matrix,
    Tolerances,
    Vector,
    as_matrix,
    as_vector,
)
from igelite.setvalues import ConvexPiece, SetExpr, excess_over_cone

logger = logging.getLogger("igelite.mappings")

Exponent = tuple[int, ...]


class NotAffine(Exception):
    pass


class InvalidProblem(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PolynomialMap:
    """x ↦ Σ c_e · x^e with coefficient vectors c_e ∈ R^m indexed by exponents e."""

    n: int
    m: int
    terms: Mapping[Exponent, Vector]

    def __post_init__(self) -> None:
        terms: dict[Exponent, Vector] = {}
        for exponent, coeffs in self.terms.items():
            exponent = tuple(int(e) for e in exponent)
            if len(exponent) != self.n or any(e < 0 for e in exponent):
                raise ValueError(f"invalid exponent {exponent} for {self.n} variables")
            vector = as_vector(coeffs, "polynomial coefficients")
            if vector.shape[0] != self.m:
                raise ValueError(f"coefficient of {exponent} must have {self.m} entries")
            if exponent in terms:
                vector = as_vector(terms[exponent] + vector)
            terms[exponent] = vector
        object.__setattr__(self, "terms", terms)

    @classmethod
    def affine(cls, A: Any, b: Any | None = None) -> PolynomialMap:
        A = as_matrix(A, name="affine map")
        m, n = A.shape
        terms: dict[Exponent, Vector] = {}
        eye = np.eye(n, dtype=int)
        for j in range(n):
            terms[tuple(int(e) for e in eye[j])] = A[:, j]
        if b is not None:
            terms[(0,) * n] = as_vector(b, "offset")
        return cls(n, m, terms)

    @property
    def degree(self) -> int:
        return max((sum(e) for e, c in self.terms.items() if np.any(c != 0.0)), default=0)

    @property
    def is_affine(self) -> bool:
        return self.degree <= 1

    def __call__(self, x: Vector) -> Vector:
        value = np.zeros(self.m)
        for exponent, coeffs in self.terms.items():
            value += coeffs * float(np.prod(np.power(x, exponent)))
        return value

    def affine_parts(self) -> tuple[Matrix, Vector]:
        if not self.is_affine:
            raise NotAffine(f"vertex path has degree {self.degree}")
        A = np.zeros((self.m, self.n))
        b = np.zeros(self.m)
        for exponent, coeffs in self.terms.items():
            if sum(exponent) == 0:
                b += coeffs
            elif sum(exponent) == 1:
                A[:, exponent.index(1)] += coeffs
        return A, b


@dataclass(frozen=True, eq=False)
class MappingPiece:
    vertex_paths: tuple[PolynomialMap, ...]
    rays: Matrix


@dataclass(frozen=True, eq=False)
class PolytopicMapping:
    """x ↦ ⋃_pieces conv{f_j(x)} + cone(rays)."""

    n: int
    m: int
    pieces: tuple[MappingPiece, ...]

    def __post_init__(self) -> None:
        pieces = tuple(self.pieces)
        if not pieces:
            raise ValueError("a mapping needs at least one piece")
        checked: list[MappingPiece] = []
        for piece in pieces:
            if not piece.vertex_paths:
                raise ValueError("every piece needs at least one vertex path")
            for path in piece.vertex_paths:
                if (path.n, path.m) != (self.n, self.m):
                    raise ValueError("vertex path dimensions do not match the mapping")
            checked.append(
                MappingPiece(tuple(piece.vertex_paths), as_matrix(piece.rays, self.m, "rays"))
            )
        object.__setattr__(self, "pieces", tuple(checked))

    @classmethod
    def affine(
        cls,
        matrices: Sequence[Any],
        offsets: Sequence[Any] | None = None,
        rays: Any | None = None,
    ) -> PolytopicMapping:
        paths = tuple(
            PolynomialMap.affine(A, None if offsets is None else offsets[k])
            for k, A in enumerate(matrices)
        )
        n, m = paths[0].n, paths[0].m
        ray_matrix = np.zeros((0, m)) if rays is None else as_matrix(rays, m, "rays")
        return cls(n, m, (MappingPiece(paths, ray_matrix),))

    @property
    def is_affine(self) -> bool:
        return all(path.is_affine for piece in self.pieces for path in piece.vertex_paths)

    def evaluate(self, x: Any) -> SetExpr:
        x = as_vector(x, "point")
        if x.shape[0] != self.n:
            raise ValueError(f"point must have {self.n} entries")
        return SetExpr(
            tuple(
                ConvexPiece(np.array([path(x) for path in piece.vertex_paths]), piece.rays)
                for piece in self.pieces
            )
        )

    def affine_parts(self) -> list[tuple[Matrix, Vector]]:
        return [path.affine_parts() for piece in self.pieces for path in piece.vertex_paths]


@dataclass(frozen=True, eq=False)
class IGEProblem:
    """Find x ∈ domain with mapping(x) ⊆ cone, studied around the reference point."""

    mapping: PolytopicMapping
    cone: HCone
    domain: Polyhedron
    reference: Vector

    def __post_init__(self) -> None:
        reference = as_vector(self.reference, "reference point")
        object.__setattr__(self, "reference", reference)
        if self.cone.dim != self.mapping.m:
            raise InvalidProblem("cone dimension does not match the mapping range")
        if self.domain.dim != self.mapping.n or reference.shape[0] != self.mapping.n:
            raise InvalidProblem("domain and reference point must live in the mapping domain")
        if not is_pointed(self.cone):
            raise InvalidProblem("the cone must be pointed")
        if not self.domain.contains(reference):
            raise InvalidProblem("the reference point must lie in the domain")


def evaluate_mapping(F: PolytopicMapping, x: Any) -> SetExpr:
    return F.evaluate(x)


def excess_function(p: IGEProblem, x: Any, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    return excess_over_cone(p.mapping.evaluate(x), p.cone, tol)


def membership_in_solutions(p: IGEProblem, x: Any, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    x = as_vector(x, "point")
    return p.domain.contains(x, tol) and excess_function(p, x, tol) <= tol.sample_tol


@dataclass(frozen=True, eq=False)
class SolutionPolyhedron:
    polyhedron: Polyhedron
    empty: bool


def exact_solution_polyhedron(
    p: IGEProblem, tol: Tolerances = DEFAULT_TOLERANCES
) -> SolutionPolyhedron:
    """The solution set of an affine problem as {x : A_C (A_j x + b_j) >= 0} ∩ S.

    Raises NotAffine for polynomial vertex paths. Rays leaving the cone make
    every value unbounded outside it; the result is then flagged empty.
    """
    parts = p.mapping.affine_parts()
    for piece in p.mapping.pieces:
        if any(not p.cone.contains(ray, tol) for ray in piece.rays):
            logger.debug("a ray of the mapping leaves the cone, no solutions")
            impossible = Polyhedron(np.zeros((1, p.mapping.n)), np.ones(1), p.mapping.n)
            return SolutionPolyhedron(p.domain.intersect(impossible), empty=True)
    G = np.vstack([p.cone.A @ A for A, _ in parts])
    g = np.concatenate([-(p.cone.A @ b) for _, b in parts])
    polyhedron = p.domain.intersect(Polyhedron(G, g, p.mapping.n))
    return SolutionPolyhedron(polyhedron, empty=polyhedron.is_empty(tol))


def induced_fan(F: PolytopicMapping) -> Fan:
    """conv of the linear parts of all affine vertex paths."""
    matrices: list[Matrix] = []
    for A, _ in F.affine_parts():
        if not any(np.array_equal(A, other) for other in matrices):
            matrices.append(A)
    return Fan(tuple(matrices))


def from_fan(h: Fan) -> PolytopicMapping:
    return PolytopicMapping.affine(h.generators)


def robust_mapping(
    scenarios: Sequence[tuple[Any, Any]], rays: Any | None = None
) -> PolytopicMapping:
    """One affine vertex path x ↦ A(ω)x + b(ω) per sampled scenario ω."""
    if not scenarios:
        raise ValueError("at least one scenario is required")
    return PolytopicMapping.affine(
        [A for A, _ in scenarios], [b for _, b in scenarios], rays
    )


def scenario_fan(scenarios: Sequence[tuple[Any, Any]]) -> Fan:
    return induced_fan(robust_mapping(scenarios))
