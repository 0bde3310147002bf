from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from igelite.cones import HCone, VCone, dd_convert, dual_cone, tangent_cone
from igelite.encoding import claim
from igelite.fans import Fan, increase_certificate, prederivative_residuals
from igelite.hypotheses import Provenance
from igelite.mappings import IGEProblem, induced_fan
from igelite.numkit import DEFAULT_TOLERANCES, Matrix, Tolerances, Vector
from igelite.setvalues import ConvexPiece, SetExpr, dist_point_to
from igelite.utils import geometric_grid, make_rng, sample_ball, unit_directions

logger = logging.getLogger("igelite.increase")

# spread of the sampled points, relative to delta, in the global check
GLOBAL_SPREAD = 10.0


@dataclass(frozen=True)
class IncreaseGrid:
    x_samples: int = 32
    directions: int = 64
    radii: int = 8
    # polygon resolution of the balls in the inclusion test
    sides: int = 64


@dataclass(frozen=True, eq=False)
class IncreaseCheckReport:
    alpha: float
    delta: float
    samples: int
    worst_violation: float = field(metadata=claim(Provenance.SAMPLED))
    passed: bool = field(metadata=claim(Provenance.SAMPLED))
    worst_point: Vector | None = None
    worst_radius: float | None = None
    global_: bool = False


def _right_side(value: SetExpr, cone_rays: Matrix, C: HCone, tol: Tolerances) -> SetExpr:
    """F(x) + C with rays already inside C dropped and duplicate pieces merged."""
    pieces: list[ConvexPiece] = []
    for piece in value:
        own = [ray for ray in piece.rays if not C.contains(ray, tol)]
        extended = ConvexPiece(
            piece.vertices, np.vstack((np.array(own).reshape(len(own), C.dim), cone_rays))
        )
        if not any(_same_piece(extended, other) for other in pieces):
            pieces.append(extended)
    return SetExpr(tuple(pieces))


def _same_piece(a: ConvexPiece, b: ConvexPiece, eps: float = 1e-12) -> bool:
    def key(rows: Matrix) -> Matrix:
        return rows[np.lexsort(rows.T[::-1])] if rows.shape[0] else rows

    return (
        a.vertices.shape == b.vertices.shape
        and a.rays.shape == b.rays.shape
        and bool(np.all(np.abs(key(a.vertices) - key(b.vertices)) <= eps))
        and bool(np.all(np.abs(key(a.rays) - key(b.rays)) <= eps))
    )


class _InclusionTest:
    """Defect of B(F(z), αr) ⊆ B(F(x) + C, r) for a fixed right side."""

    def __init__(
        self,
        right: SetExpr,
        directions: Matrix,
        grid: IncreaseGrid,
        tol: Tolerances,
        rng: np.random.Generator,
    ) -> None:
        self.right = right
        self.tol = tol
        self.grid = grid
        self.convex = len(right.pieces) == 1
        m = right.dim
        self.recession = VCone(right.pieces[0].rays, m) if self.convex else None
        self.inflation = 1.0 if m == 1 else 1.0 / math.cos(math.pi / grid.directions)
        if self.convex:
            assert self.recession is not None
            # support functions are finite only on the polar of the recession cone
            polar = dual_cone(self.recession)
            assert isinstance(polar, HCone)
            extreme = dd_convert(polar, tol).R if m > 1 else np.zeros((0, m))
            candidates = np.vstack((directions, extreme))
            keep = [polar.contains(w, tol) for w in candidates]
            self.normals = candidates[np.array(keep, dtype=bool)]
            self.support = np.max(self.normals @ right.pieces[0].vertices.T, axis=1)
        else:
            self.boundary = unit_directions(m, grid.directions, rng)

    def defect(self, left: SetExpr, alpha: float, r: float) -> float:
        if self.convex:
            return self._support_defect(left, alpha, r)
        return self._sampled_defect(left, alpha, r)

    def _support_defect(self, left: SetExpr, alpha: float, r: float) -> float:
        assert self.recession is not None
        for piece in left:
            if any(not self.recession.contains(ray, self.tol) for ray in piece.rays):
                return math.inf
        if self.normals.shape[0] == 0:
            return 0.0
        support = np.max(self.normals @ left.vertices().T, axis=1)
        gaps = support + alpha * r * self.inflation - self.support - r
        return max(0.0, float(gaps.max()))

    def _sampled_defect(self, left: SetExpr, alpha: float, r: float) -> float:
        worst = 0.0
        for piece in left:
            for ray in piece.rays:
                if not any(VCone(other.rays, self.right.dim).contains(ray, self.tol) for other in self.right):
                    return math.inf
            for vertex in piece.vertices:
                for direction in self.boundary:
                    point = vertex + alpha * r * self.inflation * direction
                    worst = max(worst, dist_point_to(point, self.right, self.tol).distance - r)
        return max(0.0, worst)


def _sample_domain(
    p: IGEProblem, radius: float, count: int, rng: np.random.Generator, tol: Tolerances
) -> list[Vector]:
    points = [p.reference.copy()]
    attempts = 0
    while len(points) < count and attempts < 50:
        attempts += 1
        for candidate in sample_ball(p.reference, radius, count, rng):
            if len(points) >= count:
                break
            if p.domain.contains(candidate, tol):
                points.append(candidate)
    return points


def check_increase_definitional(
    p: IGEProblem,
    alpha: float,
    delta: float,
    grid: IncreaseGrid | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    seed: int | None = None,
    direction: Vector | None = None,
    global_: bool = False,
) -> IncreaseCheckReport:
    """Sampled falsifier of metric C-increase around the reference point.

    For sampled x and radii r the candidates z = x + r·u run over a direction
    grid, seeded with `direction` when a certificate supplies one. A pass is
    evidence; a reported defect above the sample tolerance is a counterexample.
    """
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    grid = grid or IncreaseGrid()
    rng = make_rng(seed)
    n = p.mapping.n
    directions = unit_directions(n, grid.directions, rng)
    if direction is not None:
        directions = np.vstack((direction / np.linalg.norm(direction), directions))
    range_directions = unit_directions(p.mapping.m, grid.directions, rng)
    cone_rays = dd_convert(p.cone, tol).R
    radii = geometric_grid(0.5 * delta, grid.radii)
    spread = delta * GLOBAL_SPREAD if global_ else delta
    points = _sample_domain(p, spread, grid.x_samples, rng, tol)

    worst = 0.0
    worst_point: Vector | None = None
    worst_radius: float | None = None
    for x in points:
        right = _right_side(p.mapping.evaluate(x), cone_rays, p.cone, tol)
        test = _InclusionTest(right, range_directions, grid, tol, rng)
        for r in radii:
            best = math.inf
            for u in directions:
                z = x + r * u
                if not p.domain.contains(z, tol):
                    continue
                best = min(best, test.defect(p.mapping.evaluate(z), alpha, r))
                if best <= tol.sample_tol:
                    break
            if best > worst:
                worst, worst_point, worst_radius = best, x, r
    passed = worst <= tol.sample_tol
    logger.debug("increase check alpha=%g delta=%g: worst defect %g", alpha, delta, worst)
    return IncreaseCheckReport(
        alpha=alpha,
        delta=delta,
        samples=len(points),
        worst_violation=worst,
        passed=passed,
        worst_point=None if passed else worst_point,
        worst_radius=None if passed else worst_radius,
        global_=global_,
    )


@dataclass(frozen=True, eq=False)
class CertificateSample:
    x: Vector
    u: Vector
    eta: float


@dataclass(frozen=True, eq=False)
class LocalizedCertificate:
    eta: float = field(metadata=claim(Provenance.CERTIFICATE))
    delta: float
    samples: tuple[CertificateSample, ...]
    # whether the fan passed the sampled strict prederivative test at the reference point
    strict_prederivative: bool


def localized_certificate(
    p: IGEProblem,
    h: Fan,
    delta: float,
    grid: IncreaseGrid | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    seed: int | None = None,
) -> LocalizedCertificate | None:
    """Certificate directions inside the tangent cone of S at sampled points near x̄."""
    grid = grid or IncreaseGrid()
    rng = make_rng(seed)
    samples: list[CertificateSample] = []
    for x in _sample_domain(p, delta, grid.x_samples, rng, tol):
        certificate = increase_certificate(h, p.cone, tol, tangent=tangent_cone(p.domain, x, tol))
        if certificate is None:
            logger.debug("no certificate at %s", x.tolist())
            return None
        samples.append(CertificateSample(x=x, u=certificate.u, eta=certificate.eta))
    strict = prederivative_residuals(p.mapping, h, p.reference, tol=tol, seed=seed).strict_passes
    if not strict:
        logger.warning("fan failed the strict prederivative test, certificate is not conclusive")
    return LocalizedCertificate(
        eta=min(sample.eta for sample in samples),
        delta=delta,
        samples=tuple(samples),
        strict_prederivative=strict,
    )


@dataclass(frozen=True, eq=False)
class BoundEstimate:
    lower: float | None = field(metadata=claim(Provenance.CERTIFICATE))
    upper: float = field(metadata=claim(Provenance.SAMPLED))


def exact_bound_estimate(
    p: IGEProblem,
    delta: float,
    grid: IncreaseGrid | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    seed: int | None = None,
    h: Fan | None = None,
    alpha_max: float = 4.0,
    step: float = 0.05,
) -> BoundEstimate:
    """Bracket the exact increase bound: certificate from below, bisection from above."""
    if h is None and p.mapping.is_affine:
        h = induced_fan(p.mapping)
    lower: float | None = None
    certificate = None
    if h is not None:
        certificate = localized_certificate(p, h, delta, grid, tol, seed)
        if certificate is not None and certificate.strict_prederivative:
            lower = 1.0 + certificate.eta

    direction = certificate.samples[0].u if certificate is not None else None

    def passes(alpha: float) -> bool:
        report = check_increase_definitional(p, alpha, delta, grid, tol, seed, direction)
        return report.passed

    if not passes(1.0 + step):
        return BoundEstimate(lower=lower, upper=1.0)
    if passes(alpha_max):
        return BoundEstimate(lower=lower, upper=math.inf)
    good, bad = 1.0 + step, alpha_max
    while bad - good > step:
        middle = 0.5 * (good + bad)
        if passes(middle):
            good = middle
        else:
            bad = middle
    return BoundEstimate(lower=lower, upper=bad)
