from __future__ import annotations

import hashlib
import math
import os

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

DEFAULT_SEED = 42
SEED_ENV_VAR = "IGE_SEED"


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def default_seed() -> int:
    value = os.environ.get(SEED_ENV_VAR)
    if value is None or value.strip() == "":
        return DEFAULT_SEED
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {value!r}") from None


def make_rng(seed: int | None = None) -> np.random.Generator:
    return np.random.default_rng(default_seed() if seed is None else seed)


def unit_directions(dim: int, count: int, rng: np.random.Generator) -> FloatArray:
    """Deterministic-first grid of unit vectors in R^dim.

    In one dimension this is {+1, -1}; in two dimensions `count` equally spaced
    angles starting at 0. In higher dimensions the coordinate axes and the
    diagonals of the coordinate planes come first, topped up with random
    directions until `count` vectors are produced.
    """
    if dim < 1:
        raise ValueError("dimension must be at least one")
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        angles = 2.0 * math.pi * np.arange(max(count, 4)) / max(count, 4)
        return np.column_stack((np.cos(angles), np.sin(angles)))

    directions: list[FloatArray] = []
    eye = np.eye(dim)
    for i in range(dim):
        directions.extend((eye[i], -eye[i]))
    for i in range(dim):
        for j in range(i + 1, dim):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    directions.append((si * eye[i] + sj * eye[j]) / math.sqrt(2.0))
    extra = max(count - len(directions), 0)
    if extra > 0:
        directions.extend(_normalize_rows(rng.standard_normal((extra, dim))))
    return np.array(directions)


def sample_ball(
    center: FloatArray, radius: float, count: int, rng: np.random.Generator
) -> FloatArray:
    """Uniform samples from the closed Euclidean ball B(center, radius)."""
    dim = center.shape[0]
    if count <= 0:
        return np.zeros((0, dim))
    directions = _normalize_rows(rng.standard_normal((count, dim)))
    scales = radius * rng.random(count) ** (1.0 / dim)
    return center + directions * scales[:, None]


def sample_sphere(
    center: FloatArray, radius: float, count: int, rng: np.random.Generator
) -> FloatArray:
    dim = center.shape[0]
    if count <= 0:
        return np.zeros((0, dim))
    return center + radius * _normalize_rows(rng.standard_normal((count, dim)))


def geometric_grid(start: float, count: int, ratio: float = 0.5) -> list[float]:
    if count < 1:
        raise ValueError("count must be at least one")
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    return [start * ratio**k for k in range(count)]


def _normalize_rows(values: FloatArray) -> FloatArray:
    norms = np.linalg.norm(values, axis=1)
    norms[norms == 0.0] = 1.0
    return values / norms[:, None]
