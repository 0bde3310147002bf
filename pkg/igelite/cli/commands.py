from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from igelite.cli.report import Claim, Outcome
from igelite.fans import increase_certificate
from igelite.hypotheses import Hypotheses, Provenance
from igelite.increase import check_increase_definitional, localized_certificate
from igelite.mappings import excess_function, membership_in_solutions
from igelite.numkit import EmptyIntersection
from igelite.optimality import (
    Infeasible,
    PreconditionFailed,
    QualificationFailed,
    check_general_noc,
    check_qualified_noc,
    multiplier_rule,
)
from igelite.tangency import (
    BoundaryEmpty,
    ConeApproximation,
    ErrorBoundReport,
    HypothesesNotCertified,
    NotApplicable,
    ProbeRow,
    ReferenceNotSolution,
    SolutionDistance,
    assess_hypotheses,
    exact_tangent_cone,
    inner_approximation,
    outer_approximation,
    probe_directions,
    strong_satisfaction_margin,
    verify_error_bound,
)

if TYPE_CHECKING:  # pragma: no cover
    from igelite.cli.context import CommandContext
    from igelite.fans import Fan

# errors meaning a result does not apply to the problem, reported with exit code 3
HYPOTHESIS_ERRORS: tuple[type[Exception], ...] = (
    ReferenceNotSolution,
    HypothesesNotCertified,
    NotApplicable,
    BoundaryEmpty,
    EmptyIntersection,
    PreconditionFailed,
    QualificationFailed,
)

TANGENT_MODES = ("inner", "outer", "exact")
# a cone margin this close to zero leaves a probe direction undecided
PROBE_MARGIN = 1e-3
ERRORBOUND_SCALES = (1.0, 0.1, 0.01)


@dataclass
class CommandResult:
    outcome: Outcome
    results: dict[str, Any]
    hypotheses: Hypotheses = field(default_factory=Hypotheses)
    csv_rows: tuple[ErrorBoundReport, ...] = ()


CommandFunc = Callable[["CommandContext"], CommandResult]


@dataclass
class Command:
    name: str
    help: str
    func: CommandFunc
    # flags beyond the common ones
    options: tuple[str, ...] = ()


_commands: list[Command] = []


def get_commands() -> list[Command]:
    return _commands


def get_command(name: str) -> Command:
    for item in _commands:
        if item.name == name:
            return item
    raise KeyError(name)


def command(name: str, help: str, options: tuple[str, ...] = ()) -> Callable[[CommandFunc], CommandFunc]:  # noqa: A002
    def func(command_func: CommandFunc) -> CommandFunc:
        _commands.append(Command(name, help, command_func, options))
        return command_func

    return func


def _require_fan(ctx: CommandContext) -> Fan:
    if ctx.fan is None:
        raise NotApplicable("no fan: the mapping is not affine and the file gives no generators")
    return ctx.fan


def _cone_summary(approx: ConeApproximation) -> dict[str, Any]:
    return {
        "kind": approx.kind,
        "rows": Claim(approx.cone.A, approx.provenance),
        "verified": approx.verified,
        "interior_reference": approx.interior_reference,
    }


def _error(e: Exception) -> dict[str, str]:
    return {"error": type(e).__name__, "message": str(e)}


def _note_failed(ctx: CommandContext, hypotheses: Hypotheses) -> None:
    if not hypotheses.all_hold:
        ctx.log("failed hypotheses: " + "; ".join(item.name for item in hypotheses.failed))


#### Increase


def _increase_section(ctx: CommandContext) -> tuple[dict[str, Any], bool]:
    p, tol, settings = ctx.problem, ctx.tol, ctx.settings
    results: dict[str, Any] = {}
    direction = None
    if ctx.fan is not None:
        with ctx.timed("certificate"):
            certificate = increase_certificate(ctx.fan, p.cone, tol)
            localized = localized_certificate(p, ctx.fan, settings.delta, settings.grid, tol, ctx.seed)
        if certificate is None:
            results["certificate"] = None
        else:
            direction = certificate.u
            results["certificate"] = {
                "u": certificate.u,
                "eta": Claim(certificate.eta, Provenance.CERTIFICATE),
            }
        if localized is None:
            results["localized_certificate"] = None
        else:
            direction = localized.samples[0].u
            results["localized_certificate"] = {
                "eta": Claim(localized.eta, Provenance.CERTIFICATE),
                "delta": localized.delta,
                "samples": len(localized.samples),
                "strict_prederivative": localized.strict_prederivative,
            }
    with ctx.timed("definitional"):
        report = check_increase_definitional(
            p, settings.alpha, settings.delta, settings.grid, tol, ctx.seed, direction
        )
    results["definitional"] = report
    ctx.log(f"definitional check at alpha={settings.alpha:g}: {'pass' if report.passed else 'fail'}")
    return results, report.passed


@command(
    "certify-increase",
    "certify metric C-increase by certificate and definitional check",
)
def certify_increase(ctx: CommandContext) -> CommandResult:
    results, passed = _increase_section(ctx)
    return CommandResult(Outcome.VERIFIED if passed else Outcome.FALSIFIED, results)


#### Error bound


def _error_bounds(ctx: CommandContext) -> tuple[ErrorBoundReport, ...]:
    p, tol, settings = ctx.problem, ctx.tol, ctx.settings
    distance = SolutionDistance(p, tol, ctx.seed)
    reports: list[ErrorBoundReport] = []
    for scale in ERRORBOUND_SCALES:
        delta = settings.delta * scale
        with ctx.timed(f"errorbound delta={delta:g}"):
            report = verify_error_bound(p, settings.alpha, delta, settings.samples, tol, ctx.seed, distance)
        ctx.log(f"delta={delta:g} max ratio {report.max_ratio:.6g} bound {report.bound:.6g}", logging.DEBUG)
        reports.append(report)
    return tuple(reports)


def _error_bound_rows(reports: tuple[ErrorBoundReport, ...]) -> list[dict[str, Any]]:
    return [{"report": report, "samples": report.sample_count} for report in reports]


@command(
    "check-errorbound",
    "compare dist(x, Solv) with exc(F(x), C)/(alpha - 1) near the reference point",
)
def check_errorbound(ctx: CommandContext) -> CommandResult:
    reports = _error_bounds(ctx)
    passed = all(report.passed for report in reports)
    return CommandResult(
        Outcome.VERIFIED if passed else Outcome.FALSIFIED,
        {"error_bound": _error_bound_rows(reports)},
        csv_rows=reports,
    )


#### Tangent cones


def _approximation(ctx: CommandContext, mode: str, h: Fan, hypotheses: Hypotheses) -> ConeApproximation:
    if mode == "inner":
        return inner_approximation(ctx.problem, h, hypotheses, ctx.tol)
    if mode == "outer":
        return outer_approximation(ctx.problem, h, hypotheses, ctx.tol)
    return exact_tangent_cone(ctx.problem, h, hypotheses, ctx.tol)


def _disagreements(mode: str, rows: tuple[ProbeRow, ...]) -> int:
    count = 0
    for row in rows:
        # an inner cone only claims its interior, an outer cone only its exterior
        if row.margin >= PROBE_MARGIN and mode != "outer" and not row.member:
            count += 1
        elif row.margin <= -PROBE_MARGIN and mode != "inner" and row.member:
            count += 1
    return count


@command(
    "tangent",
    "approximate the contingent cone of the solution set and cross-check it on probe directions",
    ("mode",),
)
def tangent(ctx: CommandContext) -> CommandResult:
    h = _require_fan(ctx)
    with ctx.timed("hypotheses"):
        hypotheses = assess_hypotheses(ctx.problem, h, ctx.tol, ctx.seed, ctx.settings.hypotheses)
    _note_failed(ctx, hypotheses)
    mode = ctx.settings.mode
    approx = _approximation(ctx, mode, h, hypotheses)
    with ctx.timed("probes"):
        rows = probe_directions(
            ctx.problem, approx.cone, ctx.settings.probe_dirs, ctx.seed, PROBE_MARGIN, ctx.tol
        )
    disagreements = _disagreements(mode, rows)
    outcome = Outcome.VERIFIED
    if disagreements:
        ctx.log(f"{disagreements} probe directions disagree with the {mode} cone", logging.WARNING)
        outcome = Outcome.FALSIFIED
    elif not approx.verified:
        outcome = Outcome.HYPOTHESES_NOT_MET
    return CommandResult(
        outcome,
        {
            "cone": _cone_summary(approx),
            "probes": list(rows),
            "disagreements": Claim(disagreements, Provenance.SAMPLED),
        },
        hypotheses,
    )


#### Optimality


@command("check-kkt", "run the chain of necessary optimality conditions at the reference point")
def check_kkt(ctx: CommandContext) -> CommandResult:
    h = _require_fan(ctx)
    phi = ctx.loaded.objective
    if phi is None:
        raise PreconditionFailed("the problem file has no objective")
    p, tol = ctx.problem, ctx.tol
    with ctx.timed("hypotheses"):
        hypotheses = assess_hypotheses(p, h, tol, ctx.seed, ctx.settings.hypotheses)
    _note_failed(ctx, hypotheses)

    outcome = Outcome.VERIFIED
    general = check_general_noc(p, h, phi, hypotheses, tol)
    if not general.holds:
        outcome = Outcome.FALSIFIED
    qualified = check_qualified_noc(p, h, phi, tol)
    if not qualified.holds:
        qualified.raise_if_unqualified()
        outcome = Outcome.FALSIFIED
    results: dict[str, Any] = {"general": general, "qualified": qualified}
    try:
        multipliers = multiplier_rule(p, h, phi, tol)
    except PreconditionFailed as e:
        ctx.log(f"multiplier rule skipped: {e}")
        results["multipliers"] = _error(e)
    else:
        if isinstance(multipliers, Infeasible):
            outcome = outcome.worst(Outcome.FALSIFIED)
            results["multipliers"] = {"infeasible": multipliers}
        else:
            results["multipliers"] = {"certificate": multipliers}
    if not general.verified:
        outcome = outcome.worst(Outcome.HYPOTHESES_NOT_MET)
    return CommandResult(outcome, results, hypotheses)


#### Analyze


@command(
    "analyze",
    "run every applicable analysis on the problem",
)
def analyze(ctx: CommandContext) -> CommandResult:
    p, tol = ctx.problem, ctx.tol
    outcome = Outcome.VERIFIED
    results: dict[str, Any] = {
        "reference_solves": Claim(membership_in_solutions(p, p.reference, tol), Provenance.EXACT),
        "excess": Claim(excess_function(p, p.reference, tol), Provenance.EXACT),
        "strong_satisfaction_margin": Claim(strong_satisfaction_margin(p, tol), Provenance.EXACT),
    }

    increase, passed = _increase_section(ctx)
    results["increase"] = increase
    if not passed:
        outcome = Outcome.FALSIFIED

    try:
        reports = _error_bounds(ctx)
    except HYPOTHESIS_ERRORS as e:
        results["error_bound"] = _error(e)
        outcome = outcome.worst(Outcome.HYPOTHESES_NOT_MET)
    else:
        results["error_bound"] = _error_bound_rows(reports)
        if not all(report.passed for report in reports):
            outcome = outcome.worst(Outcome.FALSIFIED)

    hypotheses = Hypotheses()
    if ctx.fan is None:
        results["tangent"] = _error(NotApplicable("no fan"))
        return CommandResult(outcome, results, hypotheses)
    with ctx.timed("hypotheses"):
        hypotheses = assess_hypotheses(p, ctx.fan, tol, ctx.seed, ctx.settings.hypotheses)
    _note_failed(ctx, hypotheses)
    cones: dict[str, Any] = {}
    for mode in TANGENT_MODES:
        try:
            cones[mode] = _cone_summary(_approximation(ctx, mode, ctx.fan, hypotheses))
        except HYPOTHESIS_ERRORS as e:
            cones[mode] = _error(e)
    results["tangent"] = cones
    return CommandResult(outcome, results, hypotheses)
