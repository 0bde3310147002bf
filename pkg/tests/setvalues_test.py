import math

import numpy as np
import pytest

from igelite import setvalues
from igelite.cones import DimensionGuard, HCone
from igelite.numkit import NnlsResult, Tolerances
from igelite.setvalues import (
    ConvexPiece,
    SetExpr,
    ball_gap,
    ball_vertices,
    cone_generators,
    conic_extension_excess_check,
    dist_point_to,
    enlarge,
    excess_between,
    excess_over_cone,
)

from .conftest import random_cone

ORTHANT = ConvexPiece(np.zeros((1, 2)), np.eye(2))


def lshape_value(x: float) -> SetExpr:
    return SetExpr.of(
        ConvexPiece([[x, x]], [[0.0, 1.0]]),
        ConvexPiece([[x, x]], [[1.0, 0.0]]),
    )


def test_piece_needs_a_vertex() -> None:
    with pytest.raises(ValueError, match="at least one vertex"):
        ConvexPiece(np.zeros((0, 2)), np.zeros((0, 2)))


def test_set_expr_dimensions_must_agree() -> None:
    with pytest.raises(ValueError, match="share one dimension"):
        SetExpr.of(ConvexPiece.point([0.0]), ConvexPiece.point([0.0, 0.0]))


def test_minkowski_sum_of_pieces() -> None:
    segment = ConvexPiece.polytope([[0.0, 0.0], [1.0, 0.0]])
    total = segment.plus(ConvexPiece([[0.0, 1.0]], [[0.0, 1.0]]))
    assert total.vertices.shape == (2, 2)
    assert total.rays.shape == (1, 2)


@pytest.mark.parametrize(
    ("y", "s", "distance"),
    [
        ([-3.0, 4.0], SetExpr.of(ORTHANT), 3.0),
        ([0.0, 0.0], SetExpr.of(ConvexPiece.polytope([[1.0, 0.0], [0.0, 1.0]])), 1.0 / math.sqrt(2.0)),
        ([2.0, 2.0], lshape_value(1.0), 1.0),
        ([5.0, 1.0], lshape_value(1.0), 0.0),
    ],
)
def test_dist_point_to(y: list[float], s: SetExpr, distance: float) -> None:
    assert dist_point_to(y, s).distance == pytest.approx(distance, abs=1e-9)


def test_dist_point_to_is_verified() -> None:
    assert dist_point_to([-3.0, 4.0], SetExpr.of(ORTHANT)).verified
    assert dist_point_to([2.0, 2.0], lshape_value(1.0)).verified


def test_dist_point_to_flags_unconverged_projection(monkeypatch: pytest.MonkeyPatch) -> None:
    def stalled(G: np.ndarray, y: np.ndarray, convex: np.ndarray, tol: Tolerances) -> NnlsResult:
        weights = np.zeros(G.shape[1])
        weights[0] = 1.0
        return NnlsResult(weights, G @ weights, float(np.linalg.norm(G @ weights - y)), 1.0)

    monkeypatch.setattr(setvalues, "nnls_simplex", stalled)
    nearest = dist_point_to([-3.0, 4.0], lshape_value(0.0))
    assert not nearest.verified
    # single vertices are measured directly and stay verified
    assert dist_point_to([1.0, 1.0], SetExpr.of(ConvexPiece.point([0.0, 0.0]))).verified


def test_dist_point_to_dimension_check() -> None:
    with pytest.raises(ValueError, match="different dimensions"):
        dist_point_to([0.0], SetExpr.of(ORTHANT))


@pytest.mark.parametrize("seed", range(5))
def test_dist_zero_exactly_on_members(seed: int) -> None:
    rng = np.random.default_rng(seed)
    piece = ConvexPiece(rng.normal(size=(3, 2)), rng.normal(size=(1, 2)))
    s = SetExpr.of(piece)
    for _ in range(200):
        weights = rng.dirichlet(np.ones(3))
        member = weights @ piece.vertices + rng.random() * piece.rays[0]
        assert dist_point_to(member, s).distance <= 1e-9


@pytest.mark.parametrize(
    ("s", "excess"),
    [
        (SetExpr.of(ConvexPiece.polytope([[1.0, 1.0], [-2.0, 1.0]])), 2.0),
        (SetExpr.of(ORTHANT), 0.0),
        (SetExpr.of(ConvexPiece([[0.0, 0.0]], [[-1.0, 0.0]])), math.inf),
    ],
)
def test_excess_over_cone(s: SetExpr, excess: float) -> None:
    assert excess_over_cone(s, HCone.orthant(2)) == pytest.approx(excess)


@pytest.mark.parametrize("x", [0.5, 0.1, 0.01])
def test_excess_of_the_failure_value(x: float) -> None:
    value = SetExpr.of(ConvexPiece([[-(x**2)]], [[1.0]]))
    assert abs(excess_over_cone(value, HCone.orthant(1)) - x**2) <= 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_vertex_rule_matches_dense_boundary(seed: int) -> None:
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 2))
    s = SetExpr.of(ConvexPiece.polytope([a, b]))
    C = random_cone(rng, 2, 1)
    brute = max(C.distance(a + t * (b - a)) for t in np.arange(0.0, 1.0 + 1e-3, 1e-3))
    assert excess_over_cone(s, C) == pytest.approx(brute, abs=1e-3)


def test_ball_vertices_line() -> None:
    assert ball_vertices(1, 2.0, 16).tolist() == [[2.0], [-2.0]]


def test_ball_gap_plane() -> None:
    assert ball_gap(2, 16) == pytest.approx(1.0 - math.cos(math.pi / 16))
    assert ball_gap(1, 16) == 0.0


def test_enlarge_zero_radius() -> None:
    s = SetExpr.of(ORTHANT)
    result = enlarge(s, 0.0)
    assert result.inner is s
    assert result.gap == 0.0


def test_enlarge_sandwiches_the_disk() -> None:
    result = enlarge(SetExpr.of(ConvexPiece.point([0.0, 0.0])), 1.0, sides=16)
    inner = result.inner.vertices()
    outer = result.outer.vertices()
    assert np.linalg.norm(inner, axis=1).max() <= 1.0 + 1e-12
    # every unit vector lies inside the outer polygon
    for angle in np.linspace(0.0, 2.0 * math.pi, 97):
        point = np.array([math.cos(angle), math.sin(angle)])
        assert dist_point_to(point, result.outer).distance <= 1e-9
    assert np.linalg.norm(outer, axis=1).min() * math.cos(math.pi / 16) == pytest.approx(1.0)


@pytest.mark.parametrize(
    ("args", "error", "match"),
    [
        ((-1.0, 16), ValueError, "nonnegative"),
        ((1.0, 3), ValueError, "four sides"),
    ],
)
def test_enlarge_rejects(args: tuple[float, int], error: type[Exception], match: str) -> None:
    with pytest.raises(error, match=match):
        enlarge(SetExpr.of(ORTHANT), *args)


def test_enlarge_dimension_guard() -> None:
    with pytest.raises(DimensionGuard):
        enlarge(SetExpr.of(ConvexPiece.point(np.zeros(5))), 1.0)


@pytest.mark.parametrize("seed", range(50))
def test_enlarged_excess_identity(seed: int) -> None:
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 4))
    C = random_cone(rng, dim, 1)
    s = SetExpr.of(ConvexPiece.polytope(rng.normal(size=(3, dim)) - 2.0))
    base = excess_over_cone(s, C)
    assert base > 0.0
    r = float(rng.uniform(0.1, 1.0))
    result = enlarge(s, r)
    inner = excess_over_cone(result.inner, C)
    assert base + r * (1.0 - result.gap) - 1e-9 <= inner <= base + r + 1e-9


@pytest.mark.parametrize("seed", range(50))
def test_conic_extension_invariance(seed: int) -> None:
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 4))
    C = random_cone(rng, dim, int(rng.integers(0, 3)))
    s = SetExpr.of(ConvexPiece.polytope(rng.normal(size=(int(rng.integers(1, 4)), dim))))
    lhs, rhs = conic_extension_excess_check(s, C)
    assert abs(lhs - rhs) <= 1e-6


@pytest.mark.parametrize(
    ("s", "expected"),
    [
        (SetExpr.of(ConvexPiece.polytope([[1.0, 1.0], [-2.0, 1.0]])), 2.0),
        (SetExpr.of(ConvexPiece.point([1.0, 2.0])), 0.0),
        (SetExpr.of(ConvexPiece.point([-1.0, -1.0])), math.sqrt(2.0)),
    ],
)
def test_conic_extension_examples(s: SetExpr, expected: float) -> None:
    lhs, rhs = conic_extension_excess_check(s, HCone.orthant(2))
    assert lhs == pytest.approx(expected)
    assert rhs == pytest.approx(expected)


@pytest.mark.parametrize("dim", [2, 3])
def test_excess_of_the_ball_polytope(dim: int) -> None:
    r = 0.5
    ball = SetExpr.of(ConvexPiece.polytope(ball_vertices(dim, r, 64)))
    excess = excess_over_cone(ball, HCone.orthant(dim))
    assert excess <= r + 1e-12
    if dim == 2:
        assert excess >= r * (1.0 - ball_gap(dim, 64))


def test_cone_generators_of_orthant() -> None:
    assert cone_generators(HCone.orthant(2)).shape == (2, 2)


def test_excess_between_single_piece() -> None:
    a = SetExpr.of(ConvexPiece.polytope([[0.0, 0.0], [2.0, 0.0]]))
    b = SetExpr.of(ConvexPiece.point([0.0, 0.0]))
    assert excess_between(a, b) == pytest.approx(2.0)
    assert excess_between(b, a) == pytest.approx(0.0)


def test_excess_between_unbounded() -> None:
    a = SetExpr.of(ConvexPiece([[0.0, 0.0]], [[1.0, 0.0]]))
    b = SetExpr.of(ConvexPiece.point([0.0, 0.0]))
    assert excess_between(a, b) == math.inf


def test_excess_between_union_is_sampled() -> None:
    # both half-lines of the L-shape value at 1 lie in the union
    a = lshape_value(1.0)
    assert excess_between(a, lshape_value(1.0)) == pytest.approx(0.0, abs=1e-9)
    assert excess_between(a, lshape_value(0.0)) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_order_cancellation(seed: int) -> None:
    rng = np.random.default_rng(seed)
    C = random_cone(rng, 2, 1)
    B = ConvexPiece.polytope(rng.normal(size=(3, 2)))
    rays = cone_generators(C)
    # even seeds draw A inside C so the premise is exercised
    if seed % 2 == 0:
        vertices = rng.random((2, rays.shape[0])) @ rays
    else:
        vertices = rng.normal(size=(2, 2))
    A = SetExpr.of(ConvexPiece.polytope(vertices))
    premise = excess_between(A.plus(B), SetExpr.of(B.with_rays(rays))) <= 1e-9
    if premise:
        assert excess_over_cone(A, C) <= 1e-6
