from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from igelite import hypotheses as hyp
from igelite.cones import HCone, tangent_cone
from igelite.encoding import claim, claim_from, omitted
from igelite.fans import (
    Fan,
    PrederivativeReport,
    increase_certificate,
    prederivative_residuals,
    upper_inverse,
)
from igelite.hypotheses import Hypotheses, Hypothesis, Provenance, Status
from igelite.increase import IncreaseGrid, check_increase_definitional, localized_certificate
from igelite.mappings import (
    IGEProblem,
    exact_solution_polyhedron,
    excess_function,
    membership_in_solutions,
)
from igelite.numkit import (
    DEFAULT_TOLERANCES,
    EmptyIntersection,
    Tolerances,
    Vector,
    as_vector,
    dykstra_project,
)
from igelite.setvalues import dist_point_to
from igelite.utils import make_rng, sample_ball, unit_directions

logger = logging.getLogger("igelite.tangency")

ORACLE_STARTS = 16
BISECTION_STEPS = 60


class ReferenceNotSolution(Exception):
    pass


class HypothesesNotCertified(Exception):
    pass


class NotApplicable(Exception):
    pass


class BoundaryEmpty(Exception):
    pass


def _require_solution(p: IGEProblem, tol: Tolerances) -> None:
    if not membership_in_solutions(p, p.reference, tol):
        raise ReferenceNotSolution(
            f"reference point {p.reference.tolist()} does not solve the problem"
        )


class SolutionDistance:
    """dist(·, Solv): polyhedral projection for affine problems, a search oracle otherwise."""

    def __init__(self, p: IGEProblem, tol: Tolerances = DEFAULT_TOLERANCES, seed: int | None = None) -> None:
        self.problem = p
        self.tol = tol
        self.seed = seed
        self._distance: Callable[[Vector], float]
        if p.mapping.is_affine:
            solution = exact_solution_polyhedron(p, tol)
            if solution.empty:
                raise EmptyIntersection("the solution set is empty")
            self.provenance = Provenance.EXACT
            polyhedron = solution.polyhedron
            self._distance = lambda x: dykstra_project(polyhedron.G, polyhedron.g, x, tol).distance
        else:
            self.provenance = Provenance.ORACLE
            self._distance = self._search

    def __call__(self, x: Vector) -> float:
        return self._distance(as_vector(x, "point"))

    def _member(self, x: Vector) -> bool:
        # same cutoff as the members skipped by verify_error_bound
        p = self.problem
        return p.domain.contains(x, self.tol) and excess_function(p, x, self.tol) <= self.tol.feas_tol

    def _search(self, x: Vector) -> float:
        """Bisect segments from x towards known solutions and keep the closest boundary point."""
        p = self.problem
        if self._member(x):
            return 0.0
        rng = make_rng(self.seed)
        starts = [p.reference]
        radius = float(np.linalg.norm(x - p.reference))
        for candidate in sample_ball(x, radius, 8 * ORACLE_STARTS, rng):
            if len(starts) >= ORACLE_STARTS:
                break
            if self._member(candidate):
                starts.append(candidate)
        best = math.inf
        for start in starts:
            outside, inside = 0.0, 1.0
            for _ in range(BISECTION_STEPS):
                middle = 0.5 * (outside + inside)
                if self._member(x + middle * (start - x)):
                    inside = middle
                else:
                    outside = middle
            best = min(best, inside * float(np.linalg.norm(start - x)))
        return best


@dataclass(frozen=True, eq=False)
class ErrorBoundSample:
    x: Vector
    distance: float
    excess: float
    ratio: float


@dataclass(frozen=True, eq=False)
class ErrorBoundReport:
    alpha: float
    delta: float
    samples: tuple[ErrorBoundSample, ...] = field(metadata=omitted())
    max_ratio: float = field(metadata=claim_from("provenance"))
    bound: float = field(metadata=claim(Provenance.EXACT))
    passed: bool = field(metadata=claim_from("provenance"))
    provenance: Provenance = field(metadata=omitted())

    @property
    def sample_count(self) -> int:
        return len(self.samples)


def verify_error_bound(
    p: IGEProblem,
    alpha: float,
    delta: float,
    samples: int = 500,
    tol: Tolerances = DEFAULT_TOLERANCES,
    seed: int | None = None,
    distance: SolutionDistance | None = None,
) -> ErrorBoundReport:
    """Compare dist(x, Solv) with exc(F(x), C)/(α − 1) on samples near x̄."""
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    _require_solution(p, tol)
    distance = distance or SolutionDistance(p, tol, seed)
    rng = make_rng(seed)
    bound = 1.0 / (alpha - 1.0)
    rows: list[ErrorBoundSample] = []
    for x in sample_ball(p.reference, delta, samples, rng):
        if not p.domain.contains(x, tol):
            continue
        excess = excess_function(p, x, tol)
        if excess <= tol.feas_tol:
            continue
        dist = distance(x)
        rows.append(ErrorBoundSample(x=x, distance=dist, excess=excess, ratio=dist / excess))
    max_ratio = max((row.ratio for row in rows), default=0.0)
    return ErrorBoundReport(
        alpha=alpha,
        delta=delta,
        samples=tuple(rows),
        max_ratio=max_ratio,
        bound=bound,
        passed=max_ratio <= bound + tol.sample_tol,
        provenance=distance.provenance,
    )


@dataclass(frozen=True, eq=False)
class ContingentResult:
    member: bool
    trace: tuple[float, ...]


def contingent_membership(
    p: IGEProblem,
    v: Vector,
    t0: float = 1.0,
    steps: int = 20,
    tol: Tolerances = DEFAULT_TOLERANCES,
    distance: SolutionDistance | None = None,
) -> ContingentResult:
    """Evaluate dist(x̄ + t v, Solv)/t along t = t0·2^-k; member when the ratios reach zero."""
    _require_solution(p, tol)
    v = as_vector(v, "direction")
    distance = distance or SolutionDistance(p, tol)
    trace = tuple(
        distance(p.reference + t * v) / t for t in (t0 * 2.0**-k for k in range(steps + 1))
    )
    return ContingentResult(member=min(trace) <= tol.sample_tol, trace=trace)


def strong_satisfaction_margin(p: IGEProblem, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Largest η with F(x̄) + η·ball ⊆ C; zero when F(x̄) touches the boundary of C."""
    margin = math.inf
    norms = np.linalg.norm(p.cone.A, axis=1)
    for piece in p.mapping.evaluate(p.reference):
        if any(not p.cone.contains(ray, tol) for ray in piece.rays):
            return 0.0
        values = (p.cone.A @ piece.vertices.T) / norms[:, None]
        margin = min(margin, float(values.min(initial=math.inf)))
    return max(0.0, margin) if math.isfinite(margin) else 0.0


def _active_rows(p: IGEProblem, tol: Tolerances) -> npt.NDArray[np.bool_]:
    """Rows of C vanishing at some vertex of F(x̄), i.e. at some point of F(x̄) ∩ bd C."""
    norms = np.linalg.norm(p.cone.A, axis=1)
    active = np.zeros(p.cone.num_rows, dtype=bool)
    for piece in p.mapping.evaluate(p.reference):
        values = (p.cone.A @ piece.vertices.T) / norms[:, None]
        active |= np.any(np.abs(values) <= tol.feas_tol * max(1.0, float(np.abs(piece.vertices).max())), axis=1)
    return active


@dataclass(frozen=True)
class HypothesisSettings:
    delta: float = 0.1
    alpha: float = 1.05
    grid: IncreaseGrid = field(default_factory=IncreaseGrid)


def prederivative_hypotheses(report: PrederivativeReport) -> Hypotheses:
    bundle = Hypotheses()
    for name, passed in (
        (hyp.OUTER_PREDERIVATIVE, report.outer_passes),
        (hyp.INNER_PREDERIVATIVE, report.inner_passes),
        (hyp.STRICT_PREDERIVATIVE, report.strict_passes),
    ):
        bundle = bundle.add(
            Hypothesis(name, Status.VERIFIED if passed else Status.FAILED, Provenance.SAMPLED)
        )
    return bundle


def assess_hypotheses(
    p: IGEProblem,
    h: Fan,
    tol: Tolerances = DEFAULT_TOLERANCES,
    seed: int | None = None,
    settings: HypothesisSettings | None = None,
) -> Hypotheses:
    """Check every hypothesis of the tangential approximation results that can be checked."""
    settings = settings or HypothesisSettings()
    bundle = Hypotheses()
    reference_ok = membership_in_solutions(p, p.reference, tol)
    bundle = bundle.add(
        Hypothesis(
            hyp.REFERENCE_SOLUTION,
            Status.VERIFIED if reference_ok else Status.FAILED,
            Provenance.EXACT,
        )
    )
    bundle = bundle.add(
        Hypothesis(
            hyp.SEMICONTINUITY,
            Status.ASSUMED,
            Provenance.EXACT,
            "polynomial vertex paths and constant rays",
        )
    )
    residuals = prederivative_residuals(p.mapping, h, p.reference, tol=tol, seed=seed)
    bundle = bundle.merge(prederivative_hypotheses(residuals))

    certificate = localized_certificate(p, h, settings.delta, settings.grid, tol, seed)
    if certificate is not None and certificate.strict_prederivative:
        bundle = bundle.add(
            Hypothesis(
                hyp.METRIC_INCREASE,
                Status.VERIFIED,
                Provenance.CERTIFICATE,
                f"eta={certificate.eta:.6g}",
            )
        )
    else:
        global_certificate = increase_certificate(h, p.cone, tol)
        direction = global_certificate.u if global_certificate is not None else None
        report = check_increase_definitional(
            p, settings.alpha, settings.delta, settings.grid, tol, seed, direction
        )
        bundle = bundle.add(
            Hypothesis(
                hyp.METRIC_INCREASE,
                Status.VERIFIED if report.passed else Status.FAILED,
                Provenance.SAMPLED,
                f"alpha={settings.alpha:g} worst={report.worst_violation:.3g}",
            )
        )

    zero_in_value = dist_point_to(np.zeros(p.mapping.m), p.mapping.evaluate(p.reference), tol)
    bundle = bundle.add(
        Hypothesis(
            hyp.ZERO_IN_VALUE,
            Status.VERIFIED if zero_in_value.distance <= tol.feas_tol else Status.FAILED,
            Provenance.EXACT if zero_in_value.verified else Provenance.ORACLE,
        )
    )
    bundle = bundle.add(
        Hypothesis(
            hyp.BOUNDARY_CONTACT,
            Status.VERIFIED if _active_rows(p, tol).any() else Status.FAILED,
            Provenance.EXACT,
        )
    )
    return bundle


@dataclass(frozen=True, eq=False)
class ConeApproximation:
    cone: HCone = field(metadata=claim_from("provenance"))
    kind: str
    hypotheses: Hypotheses
    verified: bool
    provenance: Provenance = field(metadata=omitted())
    interior_reference: bool = False

    def require_verified(self) -> None:
        if not self.verified:
            failed = ", ".join(item.name for item in self.hypotheses.failed) or "not supplied"
            raise HypothesesNotCertified(f"{self.kind} approximation unverified: {failed}")


def _holds(bundle: Hypotheses | None, *names: str) -> bool:
    return bundle is not None and all(name in bundle and bundle.get(name).holds for name in names)


def inner_approximation(
    p: IGEProblem,
    h: Fan,
    hypotheses: Hypotheses | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ConeApproximation:
    """H⁺(C) ∩ T(S)(x̄), contained in the contingent cone of Solv under the hypotheses."""
    cone = upper_inverse(h, p.cone).intersect(tangent_cone(p.domain, p.reference, tol))
    verified = _holds(
        hypotheses, hyp.REFERENCE_SOLUTION, hyp.OUTER_PREDERIVATIVE, hyp.METRIC_INCREASE
    )
    if not verified:
        logger.warning("inner approximation computed with unverified hypotheses")
    return ConeApproximation(
        cone=cone,
        kind="inner",
        hypotheses=hypotheses if hypotheses is not None else Hypotheses(),
        verified=verified,
        provenance=Provenance.CERTIFICATE if verified else Provenance.SAMPLED,
    )


def outer_approximation(
    p: IGEProblem,
    h: Fan,
    hypotheses: Hypotheses | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ConeApproximation:
    """H⁺(T_J) ∩ T(S)(x̄) where J collects the rows of C active somewhere on F(x̄).

    Tangent cones of C are constant on relative interiors of faces, so the
    intersection over boundary points of F(x̄) reduces to the union of their
    active rows.
    """
    _require_solution(p, tol)
    active = _active_rows(p, tol)
    if not active.any():
        msg = "F(x̄) does not meet the boundary of C"
        if strong_satisfaction_margin(p, tol) > tol.feas_tol and p.domain.is_interior(p.reference, tol):
            msg += "; strongly satisfied at an interior point, so T(Solv)(x̄) is the whole space"
        raise BoundaryEmpty(msg)
    face_cone = HCone(p.cone.A[active], p.cone.dim)
    cone = upper_inverse(h, face_cone).intersect(tangent_cone(p.domain, p.reference, tol))
    verified = _holds(hypotheses, hyp.REFERENCE_SOLUTION, hyp.INNER_PREDERIVATIVE)
    if not verified:
        logger.warning("outer approximation computed with unverified hypotheses")
    return ConeApproximation(
        cone=cone,
        kind="outer",
        hypotheses=hypotheses if hypotheses is not None else Hypotheses(),
        verified=verified,
        provenance=Provenance.CERTIFICATE if verified else Provenance.SAMPLED,
    )


def exact_tangent_cone(
    p: IGEProblem,
    h: Fan,
    hypotheses: Hypotheses,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ConeApproximation:
    """T(Solv)(x̄) = H⁺(C) ∩ T(S)(x̄) when 0 ∈ F(x̄) and H is a full prederivative."""
    for name in (
        hyp.REFERENCE_SOLUTION,
        hyp.ZERO_IN_VALUE,
        hyp.OUTER_PREDERIVATIVE,
        hyp.INNER_PREDERIVATIVE,
        hyp.METRIC_INCREASE,
    ):
        if not _holds(hypotheses, name):
            raise NotApplicable(f"{name} fails")
    interior = p.domain.is_interior(p.reference, tol)
    cone = upper_inverse(h, p.cone)
    if not interior:
        cone = cone.intersect(tangent_cone(p.domain, p.reference, tol))
    return ConeApproximation(
        cone=cone,
        kind="exact",
        hypotheses=hypotheses,
        verified=True,
        provenance=Provenance.EXACT,
        interior_reference=interior,
    )


@dataclass(frozen=True, eq=False)
class ProbeRow:
    direction: Vector
    margin: float
    member: bool = field(metadata=claim(Provenance.SAMPLED))
    # None for directions too close to the cone boundary to judge
    agrees: bool | None


def probe_directions(
    p: IGEProblem,
    cone: HCone,
    count: int = 64,
    seed: int | None = None,
    margin: float = 1e-3,
    tol: Tolerances = DEFAULT_TOLERANCES,
    distance: SolutionDistance | None = None,
) -> tuple[ProbeRow, ...]:
    """Cross-validate a cone against contingent membership on a direction grid."""
    distance = distance or SolutionDistance(p, tol, seed)
    rng = make_rng(seed)
    rows: list[ProbeRow] = []
    for v in unit_directions(p.mapping.n, count, rng)[:count]:
        value = float(cone.margins(v).min(initial=math.inf))
        value = 1.0 if math.isinf(value) else value
        member = contingent_membership(p, v, tol=tol, distance=distance).member
        agrees: bool | None = None
        if value >= margin:
            agrees = member
        elif value <= -margin:
            agrees = not member
        rows.append(ProbeRow(direction=v, margin=value, member=member, agrees=agrees))
    return tuple(rows)
