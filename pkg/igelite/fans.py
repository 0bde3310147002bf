from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from igelite.cones import HCone, Polyhedron, interior_point
from igelite.numkit import (
    DEFAULT_TOLERANCES,
    LpProblem,
    Matrix,
    Sense,
    Tolerances,
    Vector,
    as_matrix,
    as_vector,
    largest_singular_value,
    smallest_singular_value,
    solve_lp,
)
from igelite.setvalues import ConvexPiece, excess_between
from igelite.utils import make_rng, sample_ball, sample_sphere

if TYPE_CHECKING:  # pragma: no cover
    from igelite.increase import IncreaseGrid
    from igelite.mappings import PolytopicMapping

logger = logging.getLogger("igelite.fans")

DEFAULT_RADII = (1e-1, 1e-2, 1e-3, 1e-4)


@dataclass(frozen=True, eq=False)
class Fan:
    """The finitely generated fan x ↦ conv{Λ₁x, …, Λ_px}."""

    generators: tuple[Matrix, ...]

    def __post_init__(self) -> None:
        generators = tuple(as_matrix(g, name="fan generator") for g in self.generators)
        if not generators:
            raise ValueError("a fan needs at least one generator")
        if len({g.shape for g in generators}) != 1:
            raise ValueError("fan generators must share their dimensions")
        object.__setattr__(self, "generators", generators)

    @classmethod
    def of(cls, *generators: Any) -> Fan:
        return cls(tuple(as_matrix(g, name="fan generator") for g in generators))

    @classmethod
    def identity(cls, n: int) -> Fan:
        return cls((np.eye(n),))

    @classmethod
    def zero(cls, n: int, m: int) -> Fan:
        return cls((np.zeros((m, n)),))

    @property
    def n(self) -> int:
        return int(self.generators[0].shape[1])

    @property
    def m(self) -> int:
        return int(self.generators[0].shape[0])

    @property
    def p(self) -> int:
        return len(self.generators)


def evaluate(h: Fan, x: Any) -> ConvexPiece:
    x = as_vector(x, "point")
    return ConvexPiece.polytope(np.array([g @ x for g in h.generators]))


def lipschitz_bound(h: Fan, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    return max(largest_singular_value(g, tol) for g in h.generators)


def upper_inverse(h: Fan, C: HCone) -> HCone:
    """{x : H(x) ⊆ C}, stacking the preimage constraints of every generator."""
    if C.dim != h.m:
        raise ValueError("cone dimension does not match the fan range")
    return HCone(np.vstack([C.A @ g for g in h.generators]), h.n)


@dataclass(frozen=True, eq=False)
class IncreaseCertificate:
    """H(u) + η·ball ⊆ C with |u| = 1."""

    u: Vector
    eta: float
    cone: HCone


def increase_certificate(
    h: Fan,
    C: HCone,
    tol: Tolerances = DEFAULT_TOLERANCES,
    tangent: HCone | None = None,
) -> IncreaseCertificate | None:
    """Single LP over the ∞-norm ball, rescaled to a Euclidean unit direction.

    With `tangent` the direction is additionally kept inside that cone.
    """
    if C.dim != h.m:
        raise ValueError("cone dimension does not match the fan range")
    n = h.n
    norms = np.linalg.norm(C.A, axis=1)
    blocks = [np.hstack((C.A @ g, -norms[:, None])) for g in h.generators]
    if tangent is not None and tangent.num_rows > 0:
        blocks.append(np.hstack((tangent.A, np.zeros((tangent.num_rows, 1)))))
    matrix = np.vstack(blocks)
    problem = LpProblem(
        objective=np.concatenate((np.zeros(n), [1.0])),
        matrix=matrix,
        senses=(Sense.GE,) * matrix.shape[0],
        rhs=np.zeros(matrix.shape[0]),
        bounds=((-1.0, 1.0),) * n + ((0.0, None),),
        maximize=True,
    )
    solution = solve_lp(problem, tol)
    if not solution.optimal:
        logger.debug("certificate LP ended %s", solution.status.value)
        return None
    assert solution.x is not None
    eta = float(solution.x[-1])
    u = solution.x[:n]
    length = float(np.linalg.norm(u))
    if eta <= tol.feas_tol or length <= tol.feas_tol:
        return None
    return IncreaseCertificate(u=u / length, eta=eta / length, cone=C)


@dataclass(frozen=True)
class NecessityCheck:
    definitional_pass: bool
    certificate_found: bool

    @property
    def consistent(self) -> bool:
        # a passing global check without a certificate can only be a sampling artifact
        return self.certificate_found or not self.definitional_pass


def compact_values_necessity_check(
    h: Fan,
    C: HCone,
    grid: IncreaseGrid | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    seed: int | None = None,
    alpha: float = 1.05,
) -> NecessityCheck:
    from igelite.increase import IncreaseGrid, check_increase_definitional  # noqa: PLC0415
    from igelite.mappings import IGEProblem, from_fan  # noqa: PLC0415

    problem = IGEProblem(
        mapping=from_fan(h),
        cone=C,
        domain=Polyhedron.whole(h.n),
        reference=np.zeros(h.n),
    )
    report = check_increase_definitional(
        problem, alpha, 1.0, grid or IncreaseGrid(), tol, seed=seed, global_=True
    )
    result = NecessityCheck(
        definitional_pass=report.passed,
        certificate_found=increase_certificate(h, C, tol) is not None,
    )
    if not result.consistent:
        logger.warning("global increase observed without a certificate, numerical artifact")
    return result


def openness_increase_condition(h: Fan, C: HCone, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    openness = min(smallest_singular_value(g, tol) for g in h.generators)
    holds = openness > tol.feas_tol and interior_point(upper_inverse(h, C), tol) is not None
    if holds and increase_certificate(h, C, tol) is None:
        logger.warning("openness condition holds but the certificate LP found nothing")
    return holds


@dataclass(frozen=True, eq=False)
class RadiusResidual:
    radius: float
    outer: float
    inner: float
    strict: float


@dataclass(frozen=True, eq=False)
class PrederivativeReport:
    residuals: tuple[RadiusResidual, ...]
    level: float

    def _passes(self, values: Sequence[float]) -> bool:
        return bool(values) and values[-1] <= self.level

    @property
    def outer_passes(self) -> bool:
        return self._passes([item.outer for item in self.residuals])

    @property
    def inner_passes(self) -> bool:
        return self._passes([item.inner for item in self.residuals])

    @property
    def strict_passes(self) -> bool:
        return self._passes([item.strict for item in self.residuals])


def prederivative_residuals(
    F: PolytopicMapping,
    h: Fan,
    x: Any,
    radii: Sequence[float] = DEFAULT_RADII,
    samples: int = 16,
    tol: Tolerances = DEFAULT_TOLERANCES,
    seed: int | None = None,
) -> PrederivativeReport:
    """Largest sampled one-sided Hausdorff violations, relative to the step.

    outer:  F(x) ⊆ F(x̄) + H(x − x̄)
    inner:  F(x̄) + H(x − x̄) ⊆ F(x)
    strict: F(x₂) ⊆ F(x₁) + H(x₂ − x₁) for pairs near x̄
    """
    center = as_vector(x, "reference point")
    if h.n != F.n or h.m != F.m:
        raise ValueError("fan and mapping have different dimensions")
    rng = make_rng(seed)
    base = F.evaluate(center)
    residuals: list[RadiusResidual] = []
    for radius in radii:
        points = np.vstack(
            (
                sample_sphere(center, radius, samples, rng),
                sample_ball(center, radius, samples, rng),
            )
        )
        outer = inner = 0.0
        for point in points:
            step = point - center
            length = float(np.linalg.norm(step))
            if length == 0.0:
                continue
            value = F.evaluate(point)
            shifted = base.plus(evaluate(h, step))
            outer = max(outer, excess_between(value, shifted, tol) / length)
            inner = max(inner, excess_between(shifted, value, tol) / length)
        strict = 0.0
        for first, second in zip(points[:samples], points[samples:], strict=True):
            step = second - first
            length = float(np.linalg.norm(step))
            if length == 0.0:
                continue
            target = F.evaluate(first).plus(evaluate(h, step))
            strict = max(strict, excess_between(F.evaluate(second), target, tol) / length)
        residuals.append(RadiusResidual(radius, outer, inner, strict))
        logger.debug("radius %g: outer %g inner %g strict %g", radius, outer, inner, strict)
    return PrederivativeReport(tuple(residuals), tol.residual_tol)
