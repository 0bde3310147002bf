import math

import numpy as np
import pytest

from igelite.cli.problem import LoadedProblem, load_problem
from igelite.cones import HCone, Polyhedron
from igelite.increase import (
    IncreaseGrid,
    check_increase_definitional,
    exact_bound_estimate,
    localized_certificate,
)
from igelite.mappings import IGEProblem, PolytopicMapping
from igelite.utils import geometric_grid

from .conftest import random_affine_instance

SMALL_GRID = IncreaseGrid(x_samples=8, directions=32, radii=4)
IDENTITY_BOUND = 1.0 + 1.0 / math.sqrt(2.0)


@pytest.mark.parametrize(("alpha", "delta"), [(1.0, 0.1), (0.5, 0.1), (1.5, 0.0)])
def test_check_rejects_parameters(identity_orthant: LoadedProblem, alpha: float, delta: float) -> None:
    with pytest.raises(ValueError, match="must"):
        check_increase_definitional(identity_orthant.problem, alpha, delta)


@pytest.mark.slow
@pytest.mark.parametrize(("alpha", "passed"), [(1.9, True), (2.1, False)])
def test_lshape_brackets_the_exact_bound(lshape: LoadedProblem, alpha: float, passed: bool) -> None:
    grid = IncreaseGrid(x_samples=32, directions=64, radii=8)
    report = check_increase_definitional(lshape.problem, alpha, 0.1, grid, seed=42)
    assert report.passed == passed
    assert report.samples == 32
    if not passed:
        assert report.worst_point is not None
        assert report.worst_violation > 0.0


@pytest.mark.parametrize(("alpha", "passed"), [(1.9, True), (2.1, False)])
def test_lshape_small_grid(lshape: LoadedProblem, alpha: float, passed: bool) -> None:
    report = check_increase_definitional(lshape.problem, alpha, 0.1, SMALL_GRID, seed=1)
    assert report.passed == passed


@pytest.mark.parametrize("alpha", [1.1, 1.5, 2.0, 10.0])
def test_failure_example_never_increases(errorbound_failure: LoadedProblem, alpha: float) -> None:
    report = check_increase_definitional(errorbound_failure.problem, alpha, 0.1, SMALL_GRID, seed=1)
    assert not report.passed
    assert report.worst_radius is not None


@pytest.mark.parametrize(("alpha", "passed"), [(1.6, True), (1.8, False)])
def test_identity_definitional(identity_orthant: LoadedProblem, alpha: float, passed: bool) -> None:
    report = check_increase_definitional(identity_orthant.problem, alpha, 0.1, SMALL_GRID, seed=1)
    assert report.passed == passed


def test_global_check_spreads_samples(identity_orthant: LoadedProblem) -> None:
    report = check_increase_definitional(
        identity_orthant.problem, 1.5, 0.1, SMALL_GRID, seed=1, global_=True
    )
    assert report.global_
    assert report.passed


def test_check_is_deterministic(lshape: LoadedProblem) -> None:
    first = check_increase_definitional(lshape.problem, 2.1, 0.1, SMALL_GRID, seed=7)
    second = check_increase_definitional(lshape.problem, 2.1, 0.1, SMALL_GRID, seed=7)
    assert first.worst_violation == second.worst_violation
    assert first.worst_point is not None
    assert second.worst_point is not None
    assert np.array_equal(first.worst_point, second.worst_point)


def test_localized_certificate_identity(identity_orthant: LoadedProblem) -> None:
    assert identity_orthant.fan is not None
    certificate = localized_certificate(
        identity_orthant.problem, identity_orthant.fan, 0.1, SMALL_GRID, seed=1
    )
    assert certificate is not None
    assert certificate.eta == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-6)
    assert certificate.strict_prederivative
    assert len(certificate.samples) == SMALL_GRID.x_samples


def test_localized_certificate_failure(errorbound_failure: LoadedProblem) -> None:
    assert errorbound_failure.fan is not None
    assert (
        localized_certificate(errorbound_failure.problem, errorbound_failure.fan, 0.1, SMALL_GRID, seed=1)
        is None
    )


def test_exact_bound_identity(identity_orthant: LoadedProblem) -> None:
    estimate = exact_bound_estimate(identity_orthant.problem, 0.1, SMALL_GRID, seed=1)
    assert estimate.lower == pytest.approx(IDENTITY_BOUND, abs=1e-6)
    assert IDENTITY_BOUND - 0.05 <= estimate.upper <= IDENTITY_BOUND + 0.1


def test_exact_bound_lshape(lshape: LoadedProblem) -> None:
    estimate = exact_bound_estimate(lshape.problem, 0.1, SMALL_GRID, seed=1)
    assert 1.95 <= estimate.upper <= 2.1


def test_exact_bound_failure(errorbound_failure: LoadedProblem) -> None:
    estimate = exact_bound_estimate(
        errorbound_failure.problem, 0.1, SMALL_GRID, seed=1, h=errorbound_failure.fan
    )
    assert estimate.lower is None
    assert estimate.upper == 1.0


#### Invariants


def test_identity_certificate_bound_passes_the_definition(identity_orthant: LoadedProblem) -> None:
    assert identity_orthant.fan is not None
    problem = identity_orthant.problem
    certificate = localized_certificate(problem, identity_orthant.fan, 0.1, SMALL_GRID, seed=1)
    assert certificate is not None
    assert certificate.strict_prederivative
    alpha = 1.0 + 0.9 * certificate.eta
    report = check_increase_definitional(
        problem, alpha, 0.1, SMALL_GRID, seed=1, direction=certificate.samples[0].u
    )
    assert report.passed


@pytest.mark.parametrize("seed", range(8))
def test_certificate_bound_passes_the_definition(seed: int) -> None:
    instance = random_affine_instance(seed, min_eta=0.2)
    certificate = localized_certificate(instance.problem, instance.fan, 0.1, SMALL_GRID, seed=seed)
    assert certificate is not None
    assert certificate.strict_prederivative
    alpha = 1.0 + 0.9 * certificate.eta
    report = check_increase_definitional(
        instance.problem, alpha, 0.1, SMALL_GRID, seed=seed, direction=certificate.samples[0].u
    )
    assert report.passed, report.worst_violation


@pytest.mark.parametrize(
    ("name", "alphas", "passed"),
    [
        ("identity_orthant.json", [1.1, 1.3, 1.5, 1.6], True),
        ("identity_orthant.json", [1.8, 2.5, 4.0], False),
        ("lshape.json", [1.2, 1.5, 1.9], True),
        ("lshape.json", [2.1, 3.0, 6.0], False),
    ],
)
def test_check_is_monotone_in_alpha(name: str, alphas: list[float], passed: bool) -> None:
    problem = load_problem(name).problem
    reports = [check_increase_definitional(problem, alpha, 0.1, SMALL_GRID, seed=1) for alpha in alphas]
    assert [report.passed for report in reports] == [passed] * len(alphas)
    if not passed:
        violations = [report.worst_violation for report in reports]
        assert violations == sorted(violations)


@pytest.mark.parametrize("alpha", [1.01, 1.5])
@pytest.mark.parametrize("seed", range(5))
def test_single_valued_mapping_never_increases_into_zero(seed: int, alpha: float) -> None:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, 4))
    A = rng.normal(size=(m, n))
    reference = rng.normal(size=n)
    problem = IGEProblem(
        mapping=PolytopicMapping.affine([A], [-(A @ reference)]),
        cone=HCone.zero(m),
        domain=Polyhedron.whole(n),
        reference=reference,
    )
    report = check_increase_definitional(problem, alpha, 0.1, SMALL_GRID, seed=seed)
    assert not report.passed
    assert report.worst_radius in geometric_grid(0.05, SMALL_GRID.radii)
