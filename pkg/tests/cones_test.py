import math

import numpy as np
import pytest

from igelite.cones import (
    DimensionGuard,
    HCone,
    NotInSet,
    Polyhedron,
    VCone,
    dd_convert,
    dd_convert_back,
    dual_calculus_sum,
    dual_cone,
    interior_point,
    is_pointed,
    normal_cone,
    preimage_cone,
    tangent_cone,
)
from igelite.utils import sample_ball

from .conftest import random_cone


def test_hcone_drops_zero_rows() -> None:
    cone = HCone.from_rows([[1.0, 0.0], [0.0, 0.0]], 2)
    assert cone.num_rows == 1


def test_hcone_contains_and_distance() -> None:
    cone = HCone.orthant(2)
    assert cone.contains(np.array([1.0, 0.0]))
    assert not cone.contains(np.array([-1.0, 0.0]))
    assert cone.distance(np.array([-3.0, -4.0])) == pytest.approx(5.0)
    assert cone.distance(np.array([-3.0, 4.0])) == pytest.approx(3.0)


def test_vcone_normalizes_and_dedupes() -> None:
    cone = VCone.from_rays([[2.0, 0.0], [1.0, 0.0], [0.0, 0.0]], 2)
    assert cone.num_rays == 1
    assert cone.R[0] == pytest.approx([1.0, 0.0])


def test_vcone_without_rays_is_origin() -> None:
    cone = VCone(np.zeros((0, 2)), 2)
    assert cone.distance(np.array([3.0, 4.0])) == pytest.approx(5.0)
    assert cone.contains(np.zeros(2))


def test_dd_orthant() -> None:
    rays = dd_convert(HCone.orthant(3)).R
    assert rays.shape == (3, 3)
    assert sorted(map(tuple, np.round(rays, 12))) == sorted(map(tuple, np.eye(3)))


def test_dd_whole_space_is_lineality() -> None:
    generators = dd_convert(HCone.whole(2))
    assert generators.num_rays == 4
    for y in ([1.0, 2.0], [-3.0, 0.5]):
        assert generators.contains(np.array(y))


def test_dd_halfplane_has_lineality() -> None:
    generators = dd_convert(HCone.from_rows([[1.0, 0.0]], 2))
    assert generators.contains(np.array([0.0, 1.0]))
    assert generators.contains(np.array([0.0, -1.0]))
    assert generators.contains(np.array([1.0, 0.0]))
    assert not generators.contains(np.array([-1.0, 0.0]))


def test_dd_dimension_guard() -> None:
    with pytest.raises(DimensionGuard, match="dimension 10"):
        dd_convert(HCone.orthant(11))


def test_dd_ice_cream_facets() -> None:
    # square pyramid: |y1| <= y3, |y2| <= y3
    cone = HCone.from_rows([[1, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1]], 3)
    rays = dd_convert(cone).R
    assert rays.shape[0] == 4
    expected = np.array([[1, 1, 1], [1, -1, 1], [-1, 1, 1], [-1, -1, 1]]) / math.sqrt(3.0)
    for ray in expected:
        assert np.min(np.linalg.norm(rays - ray, axis=1)) < 1e-9


@pytest.mark.parametrize("seed", range(50))
def test_dd_round_trip(seed: int) -> None:
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 4))
    cone = random_cone(rng, dim, int(rng.integers(1, 4)))
    back = dd_convert_back(dd_convert(cone))
    for y in sample_ball(np.zeros(dim), 1.0, 1000, rng):
        margin = float(np.min(cone.margins(y)))
        if abs(margin) < 1e-6:
            continue
        assert back.contains(y) == (margin > 0.0)


@pytest.mark.parametrize("seed", range(50))
def test_double_dual(seed: int) -> None:
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 4))
    cone = random_cone(rng, dim, int(rng.integers(1, 4)))
    dual = dual_cone(cone)
    assert isinstance(dual, VCone)
    double = dual_cone(dd_convert_back(dual))
    assert isinstance(double, VCone)
    for y in sample_ball(np.zeros(dim), 1.0, 1000, rng):
        margin = float(np.min(cone.margins(y)))
        if abs(margin) < 1e-6:
            continue
        assert double.contains(y) == (margin > 0.0)


@pytest.mark.parametrize("seed", range(50))
def test_dual_calculus_sum_matches_direct_dual(seed: int) -> None:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    m = int(rng.integers(2, 4))
    Q = random_cone(rng, n, 1)
    C = random_cone(rng, m, 1)
    linear_map = rng.normal(size=(m, n))
    direct = dual_cone(Q.intersect(preimage_cone(linear_map, C)))
    assert isinstance(direct, VCone)
    summed = dual_calculus_sum(Q, linear_map, C)
    for w in sample_ball(np.zeros(n), 1.0, 1000, rng):
        assert summed.distance(w) == pytest.approx(direct.distance(w), abs=1e-7)


def test_tangent_and_normal_cone_at_corner() -> None:
    square = Polyhedron(np.vstack((np.eye(2), -np.eye(2))), np.array([0.0, 0.0, -1.0, -1.0]), 2)
    tangent = tangent_cone(square, np.zeros(2))
    assert tangent.num_rows == 2
    assert tangent.contains(np.array([1.0, 1.0]))
    assert not tangent.contains(np.array([-1.0, 0.0]))
    normal = normal_cone(square, np.zeros(2))
    assert normal.contains(np.array([-1.0, -1.0]))
    assert not normal.contains(np.array([1.0, 0.0]))


def test_tangent_cone_at_interior_point_is_whole_space() -> None:
    square = Polyhedron(np.vstack((np.eye(2), -np.eye(2))), np.array([0.0, 0.0, -1.0, -1.0]), 2)
    assert tangent_cone(square, np.array([0.5, 0.5])).num_rows == 0


def test_tangent_cone_outside() -> None:
    with pytest.raises(NotInSet):
        tangent_cone(Polyhedron.from_cone(HCone.orthant(2)), np.array([-1.0, 0.0]))


def test_polyhedron_is_empty() -> None:
    assert Polyhedron(np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]), 1).is_empty()
    assert not Polyhedron.whole(2).is_empty()


def test_polyhedron_dimension_checks() -> None:
    with pytest.raises(ValueError, match="different lengths"):
        Polyhedron(np.eye(2), np.zeros(3), 2)


def test_interior_point() -> None:
    found = interior_point(HCone.orthant(2))
    assert found is not None
    assert found.slack > 0.0
    assert np.all(found.point > 0.0)
    # a ray has empty interior
    assert interior_point(HCone.from_rows([[0, 1], [0, -1], [1, 0]], 2)) is None


@pytest.mark.parametrize(
    ("rows", "pointed"),
    [
        ([[1, 0], [0, 1]], True),
        ([[1, 0]], False),
        ([[0, 1], [0, -1], [1, 0]], True),
        ([[1, 1], [-1, -1]], False),
    ],
)
def test_is_pointed(rows: list[list[float]], pointed: bool) -> None:
    assert is_pointed(HCone.from_rows(rows, 2)) == pointed


def test_preimage_cone_dimension_check() -> None:
    with pytest.raises(ValueError, match="does not match"):
        preimage_cone(np.eye(3), HCone.orthant(2))
