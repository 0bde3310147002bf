from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from igelite import hypotheses as hyp
from igelite.cones import HCone, dd_convert, interior_point, normal_cone, tangent_cone
from igelite.encoding import claim
from igelite.fans import Fan, increase_certificate, upper_inverse
from igelite.hypotheses import Hypotheses, Provenance
from igelite.mappings import IGEProblem
from igelite.numkit import (
    DEFAULT_TOLERANCES,
    LpProblem,
    Matrix,
    Sense,
    Tolerances,
    Vector,
    as_matrix,
    as_vector,
    nnls,
    solve_lp,
)
from igelite.setvalues import ConvexPiece
from igelite.tangency import strong_satisfaction_margin

logger = logging.getLogger("igelite.optimality")


class PreconditionFailed(Exception):
    pass


class QualificationFailed(Exception):
    pass


class ObjectiveKind(Enum):
    QUADRATIC = "quadratic"
    CONCAVE_MIN = "concave_min"


@dataclass(frozen=True, eq=False)
class Objective:
    """½xᵀQx + cᵀx + d, or min_k (c_k·x + d_k) for the concave piecewise-affine kind."""

    kind: ObjectiveKind
    Q: Matrix | None = None
    c: Vector | None = None
    d: float = 0.0
    slopes: Matrix | None = None
    offsets: Vector | None = None

    @classmethod
    def quadratic(cls, Q: Any, c: Any, d: float = 0.0) -> Objective:
        Q = as_matrix(Q, name="Q")
        c = as_vector(c, "c")
        if Q.shape != (c.shape[0], c.shape[0]):
            raise ValueError("Q must be square and match c")
        if not np.allclose(Q, Q.T):
            raise ValueError("Q must be symmetric")
        return cls(ObjectiveKind.QUADRATIC, Q=Q, c=c, d=d)

    @classmethod
    def linear(cls, c: Any, d: float = 0.0) -> Objective:
        c = as_vector(c, "c")
        return cls.quadratic(np.zeros((c.shape[0], c.shape[0])), c, d)

    @classmethod
    def concave_min(cls, slopes: Any, offsets: Any) -> Objective:
        slopes = as_matrix(slopes, name="slopes")
        offsets = as_vector(offsets, "offsets")
        if slopes.shape[0] < 1 or offsets.shape[0] != slopes.shape[0]:
            raise ValueError("concave-min objectives need matching slopes and offsets")
        return cls(ObjectiveKind.CONCAVE_MIN, slopes=slopes, offsets=offsets)

    @property
    def dim(self) -> int:
        if self.kind is ObjectiveKind.QUADRATIC:
            assert self.c is not None
            return int(self.c.shape[0])
        assert self.slopes is not None
        return int(self.slopes.shape[1])

    def value(self, x: Vector) -> float:
        if self.kind is ObjectiveKind.QUADRATIC:
            assert self.Q is not None and self.c is not None
            return float(0.5 * x @ self.Q @ x + self.c @ x + self.d)
        assert self.slopes is not None and self.offsets is not None
        return float(np.min(self.slopes @ x + self.offsets))

    def gradient(self, x: Vector) -> Vector:
        if self.kind is not ObjectiveKind.QUADRATIC:
            raise PreconditionFailed("objective is not differentiable")
        assert self.Q is not None and self.c is not None
        return self.Q @ x + self.c

    def active_pieces(self, x: Vector, tol: Tolerances = DEFAULT_TOLERANCES) -> Vector:
        assert self.slopes is not None and self.offsets is not None
        values = self.slopes @ x + self.offsets
        return np.flatnonzero(values <= values.min() + tol.feas_tol * max(1.0, abs(values.min())))


def upper_subdifferential(
    phi: Objective, x: Any, tol: Tolerances = DEFAULT_TOLERANCES
) -> ConvexPiece:
    x = as_vector(x, "point")
    if phi.kind is ObjectiveKind.QUADRATIC:
        return ConvexPiece.point(phi.gradient(x))
    assert phi.slopes is not None
    return ConvexPiece.polytope(phi.slopes[phi.active_pieces(x, tol)])


def lower_subdifferential(
    phi: Objective, x: Any, tol: Tolerances = DEFAULT_TOLERANCES
) -> ConvexPiece | None:
    """Fréchet subdifferential; empty (None) at a kink of a concave-min objective."""
    x = as_vector(x, "point")
    if phi.kind is ObjectiveKind.QUADRATIC:
        return ConvexPiece.point(phi.gradient(x))
    active = phi.active_pieces(x, tol)
    slopes = phi.slopes
    assert slopes is not None
    if len({tuple(row) for row in slopes[active]}) != 1:
        return None
    return ConvexPiece.point(slopes[active[0]])


def _hypotheses_certified(bundle: Hypotheses | None) -> bool:
    if bundle is None:
        return False
    names = (hyp.REFERENCE_SOLUTION, hyp.OUTER_PREDERIVATIVE, hyp.METRIC_INCREASE)
    return all(name in bundle and bundle.get(name).holds for name in names)


@dataclass(frozen=True, eq=False)
class GeneralNocReport:
    holds: bool = field(metadata=claim(Provenance.EXACT))
    # largest distance from -w to the dual cone over the vertices w
    worst_margin: float = field(metadata=claim(Provenance.EXACT))
    branch: str
    verified: bool
    # φ(x̄)
    objective_value: float = field(metadata=claim(Provenance.EXACT))


def check_general_noc(
    p: IGEProblem,
    h: Fan,
    phi: Objective,
    hypotheses: Hypotheses | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> GeneralNocReport:
    """-∂̂⁺φ(x̄) ⊆ [H⁺(C) ∩ T(S)(x̄)]⁻, checked vertex by vertex."""
    verified = _hypotheses_certified(hypotheses)
    if not verified:
        logger.warning("necessary condition checked without certified hypotheses")
    x = p.reference
    if strong_satisfaction_margin(p, tol) > tol.feas_tol and p.domain.is_interior(x, tol):
        lower = lower_subdifferential(phi, x, tol)
        gap = float(np.linalg.norm(lower.vertices, axis=1).min()) if lower is not None else np.inf
        return GeneralNocReport(
            holds=gap <= tol.feas_tol,
            worst_margin=gap,
            branch="strong-satisfaction",
            verified=verified,
            objective_value=phi.value(x),
        )

    K = upper_inverse(h, p.cone).intersect(tangent_cone(p.domain, x, tol))
    worst = 0.0
    for w in upper_subdifferential(phi, x, tol).vertices:
        if K.num_rows == 0:
            worst = max(worst, float(np.linalg.norm(w)))
            continue
        # the dual of K is generated by the outward normals -a_j
        worst = max(worst, nnls(-K.A.T, -w, tol).residual_norm)
    scale = max(1.0, float(np.abs(upper_subdifferential(phi, x, tol).vertices).max()))
    return GeneralNocReport(
        holds=worst <= tol.feas_tol * scale,
        worst_margin=worst,
        branch="dual-cone",
        verified=verified,
        objective_value=phi.value(x),
    )


@dataclass(frozen=True, eq=False)
class VertexDecomposition:
    target: Vector
    feasible: bool
    residual: float


@dataclass(frozen=True, eq=False)
class QualifiedNocReport:
    holds: bool = field(metadata=claim(Provenance.EXACT))
    vertices: tuple[VertexDecomposition, ...]
    qualification_failures: tuple[str, ...]

    def raise_if_unqualified(self) -> None:
        if self.qualification_failures:
            raise QualificationFailed(", ".join(self.qualification_failures))


@dataclass(frozen=True, eq=False)
class _ConicFit:
    weights: Vector
    residual: float
    feasible: bool


def _conic_fit(columns: Matrix, target: Vector, tol: Tolerances) -> _ConicFit:
    """min |M μ - target|₁ over μ >= 0, by LP with split slacks."""
    dim, k = columns.shape
    if k == 0:
        residual = float(np.abs(target).sum())
        return _ConicFit(np.zeros(0), residual, residual <= tol.feas_tol)
    problem = LpProblem(
        objective=np.concatenate((np.zeros(k), np.ones(2 * dim))),
        matrix=np.hstack((columns, np.eye(dim), -np.eye(dim))),
        senses=(Sense.EQ,) * dim,
        rhs=target,
    )
    solution = solve_lp(problem, tol)
    assert solution.optimal and solution.x is not None
    weights = solution.x[:k]
    residual = float(np.linalg.norm(columns @ weights - target))
    scale = max(1.0, float(np.abs(target).max(initial=0.0)))
    return _ConicFit(weights, residual, residual <= tol.feas_tol * scale)


def _multiplier_columns(h: Fan, C: HCone) -> Matrix:
    """Columns Λᵢᵀ(-a_j): images of the generators of C⁻ under every Λᵢᵀ."""
    return np.hstack([g.T @ (-C.A.T) for g in h.generators])


def check_qualified_noc(
    p: IGEProblem,
    h: Fan,
    phi: Objective,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> QualifiedNocReport:
    """-∂̂⁺φ(x̄) ⊆ Σ Λᵢᵀ(C⁻) + N(S)(x̄), together with the interiority qualifications."""
    x = p.reference
    inverse = upper_inverse(h, p.cone)
    failures: list[str] = []
    if interior_point(inverse.intersect(tangent_cone(p.domain, x, tol)), tol) is None:
        failures.append("tangent qualification: int T(S)(x̄) ∩ int H⁺(C) is empty")
    if interior_point(inverse, tol) is None:
        failures.append("generator qualification: ∩ int Λᵢ⁻¹(C) is empty")
    if failures:
        logger.warning("qualification fails (%s), testing the closed sum", "; ".join(failures))

    columns = np.hstack((_multiplier_columns(h, p.cone), normal_cone(p.domain, x, tol).R.T))
    rows: list[VertexDecomposition] = []
    for w in upper_subdifferential(phi, x, tol).vertices:
        fit = _conic_fit(columns, -w, tol)
        rows.append(VertexDecomposition(target=-w, feasible=fit.feasible, residual=fit.residual))
    return QualifiedNocReport(
        holds=all(row.feasible for row in rows),
        vertices=tuple(rows),
        qualification_failures=tuple(failures),
    )


@dataclass(frozen=True, eq=False)
class MultiplierCertificate:
    multipliers: tuple[Vector, ...]
    residual_norm: float = field(metadata=claim(Provenance.CERTIFICATE))
    # max over generators r of C of <y_i, r>, clipped at zero
    duality_margins: tuple[float, ...] = field(metadata=claim(Provenance.CERTIFICATE))


@dataclass(frozen=True, eq=False)
class Infeasible:
    residual: float = field(metadata=claim(Provenance.EXACT))


def multiplier_rule(
    p: IGEProblem,
    h: Fan,
    phi: Objective,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> MultiplierCertificate | Infeasible:
    """∇φ(x̄) + Σ Λᵢᵀ yᵢ = 0 with yᵢ ∈ C⁻, solved as an LP over the generators of C⁻."""
    x = p.reference
    if not p.domain.is_interior(x, tol):
        raise PreconditionFailed("x̄ is not an interior point of S")
    if phi.kind is not ObjectiveKind.QUADRATIC:
        raise PreconditionFailed("objective is not differentiable")
    if interior_point(upper_inverse(h, p.cone), tol) is None:
        raise PreconditionFailed("∩ int Λᵢ⁻¹(C) is empty")
    if increase_certificate(h, p.cone, tol) is None:
        raise PreconditionFailed("no u with H(u) + η·ball ⊆ C")

    gradient = phi.gradient(x)
    fit = _conic_fit(_multiplier_columns(h, p.cone), -gradient, tol)
    if not fit.feasible:
        return Infeasible(residual=fit.residual)

    rows = p.cone.num_rows
    generators = dd_convert(p.cone, tol).R
    multipliers: list[Vector] = []
    margins: list[float] = []
    for i in range(h.p):
        y = -(p.cone.A.T @ fit.weights[i * rows : (i + 1) * rows])
        multipliers.append(y)
        margins.append(max(0.0, float((generators @ y).max(initial=0.0))))
    residual = float(np.linalg.norm(gradient + sum(g.T @ y for g, y in zip(h.generators, multipliers, strict=True))))
    return MultiplierCertificate(
        multipliers=tuple(multipliers),
        residual_norm=residual,
        duality_margins=tuple(margins),
    )
