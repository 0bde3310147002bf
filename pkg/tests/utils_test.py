import math

import numpy as np
import pytest

from igelite.utils import (
    DEFAULT_SEED,
    default_seed,
    digest,
    geometric_grid,
    make_rng,
    sample_ball,
    sample_sphere,
    unit_directions,
)


def test_digest() -> None:
    assert digest(b"") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


@pytest.mark.parametrize(("value", "seed"), [(None, DEFAULT_SEED), ("", DEFAULT_SEED), ("  ", DEFAULT_SEED), ("17", 17)])
def test_default_seed(monkeypatch: pytest.MonkeyPatch, value: str | None, seed: int) -> None:
    if value is None:
        monkeypatch.delenv("IGE_SEED", raising=False)
    else:
        monkeypatch.setenv("IGE_SEED", value)
    assert default_seed() == seed


def test_default_seed_rejects_garbage(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("IGE_SEED", "seven")
    with pytest.raises(ValueError, match="IGE_SEED must be an integer"):
        default_seed()


def test_make_rng_is_reproducible() -> None:
    assert make_rng(5).random() == make_rng(5).random()


def test_unit_directions_line() -> None:
    assert unit_directions(1, 10, make_rng(0)).tolist() == [[1.0], [-1.0]]


def test_unit_directions_plane() -> None:
    directions = unit_directions(2, 8, make_rng(0))
    assert directions.shape == (8, 2)
    assert directions[0].tolist() == [1.0, 0.0]
    assert directions[2] == pytest.approx([0.0, 1.0])


def test_unit_directions_space() -> None:
    directions = unit_directions(3, 40, make_rng(0))
    # axes, plane diagonals, then random fill
    assert directions.shape == (40, 3)
    assert directions[:6].tolist() == [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]
    assert np.linalg.norm(directions, axis=1) == pytest.approx(np.ones(40))


def test_unit_directions_rejects_dimension() -> None:
    with pytest.raises(ValueError, match="at least one"):
        unit_directions(0, 4, make_rng(0))


@pytest.mark.parametrize("dim", [1, 2, 5])
def test_sample_ball(dim: int) -> None:
    center = np.arange(dim, dtype=float)
    points = sample_ball(center, 0.5, 200, make_rng(1))
    assert points.shape == (200, dim)
    assert np.all(np.linalg.norm(points - center, axis=1) <= 0.5 + 1e-12)


def test_sample_sphere() -> None:
    points = sample_sphere(np.zeros(3), 2.0, 50, make_rng(1))
    assert np.linalg.norm(points, axis=1) == pytest.approx(np.full(50, 2.0))


def test_sampling_nothing() -> None:
    assert sample_ball(np.zeros(2), 1.0, 0, make_rng(0)).shape == (0, 2)
    assert sample_sphere(np.zeros(2), 1.0, 0, make_rng(0)).shape == (0, 2)


def test_geometric_grid() -> None:
    assert geometric_grid(1.0, 4) == [1.0, 0.5, 0.25, 0.125]
    assert geometric_grid(2.0, 2, 0.1) == pytest.approx([2.0, 0.2])


@pytest.mark.parametrize(("count", "ratio"), [(0, 0.5), (3, 1.0), (3, 0.0)])
def test_geometric_grid_rejects(count: int, ratio: float) -> None:
    with pytest.raises(ValueError, match="must"):
        geometric_grid(1.0, count, ratio)


def test_directions_cover_the_circle() -> None:
    directions = unit_directions(2, 64, make_rng(0))
    angles = np.sort(np.arctan2(directions[:, 1], directions[:, 0]))
    assert np.max(np.diff(angles)) == pytest.approx(2.0 * math.pi / 64)
