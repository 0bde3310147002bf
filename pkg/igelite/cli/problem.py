from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from igelite.cones import HCone, Polyhedron, VCone, dd_convert_back
from igelite.fans import Fan
from igelite.mappings import (
    Exponent,
    InvalidProblem,
    IGEProblem,
    MappingPiece,
    PolynomialMap,
    PolytopicMapping,
    induced_fan,
)
from igelite.numkit import NonFiniteError, Tolerances
from igelite.optimality import Objective
from igelite.utils import digest

logger = logging.getLogger("igelite.cli.problem")

Matrix = list[list[float]]

BUNDLED_DIR = Path(__file__).resolve().parent.parent / "problems"


class ProblemError(Exception):
    pass


class ProblemParseError(ProblemError):
    def __init__(self, path: str, line: int, column: int, msg: str) -> None:
        super().__init__(f"{path}:{line}:{column}: {msg}")
        self.path = path
        self.line = line
        self.column = column


class ProblemValidationError(ProblemError):
    def __init__(self, path: str, location: str, msg: str) -> None:
        super().__init__(f"{path}: {location}: {msg}")
        self.path = path
        self.location = location


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConeModel(_Model):
    """Either inward normals (`rows`) or generators (`rays`)."""

    dim: int = Field(ge=1)
    rows: Matrix | None = None
    rays: Matrix | None = None


class DomainModel(_Model):
    """{x : rows @ x >= rhs}; omitted rows mean the whole space."""

    rows: Matrix = Field(default_factory=list)
    rhs: list[float] = Field(default_factory=list)


class PieceModel(_Model):
    # each vertex path maps "e1,...,en" exponent strings to coefficient vectors
    vertices: list[dict[str, list[float]]] = Field(min_length=1)
    rays: Matrix = Field(default_factory=list)

    @field_validator("vertices")
    @classmethod
    def _check_exponents(cls, value: list[dict[str, list[float]]]) -> list[dict[str, list[float]]]:
        for path in value:
            for key in path:
                _parse_exponent(key)
        return value


class MappingModel(_Model):
    dim_in: int = Field(ge=1)
    dim_out: int = Field(ge=1)
    pieces: list[PieceModel] = Field(min_length=1)


class FanModel(_Model):
    generators: list[Matrix] = Field(min_length=1)


class QuadraticModel(_Model):
    kind: Literal["quadratic"]
    Q: Matrix | None = None
    c: list[float]
    d: float = 0.0


class ConcaveMinModel(_Model):
    kind: Literal["concave_min"]
    slopes: Matrix = Field(min_length=1)
    offsets: list[float]


class TolerancesModel(_Model):
    feas_tol: float | None = Field(default=None, gt=0)
    kkt_tol: float | None = Field(default=None, gt=0)
    sample_tol: float | None = Field(default=None, gt=0)
    residual_tol: float | None = Field(default=None, gt=0)
    max_iter: int | None = Field(default=None, gt=0)


class SettingsModel(_Model):
    alpha: float | None = Field(default=None, gt=1)
    delta: float | None = Field(default=None, gt=0)
    samples: int | None = Field(default=None, gt=0)
    probe_dirs: int | None = Field(default=None, gt=0)
    seed: int | None = None


class ProblemFile(_Model):
    name: str = ""
    description: str = ""
    cone: ConeModel
    domain: DomainModel = Field(default_factory=DomainModel)
    mapping: MappingModel
    fan: FanModel | None = None
    objective: Annotated[QuadraticModel | ConcaveMinModel, Field(discriminator="kind")] | None = None
    reference: list[float]
    tolerances: TolerancesModel = Field(default_factory=TolerancesModel)
    settings: SettingsModel = Field(default_factory=SettingsModel)


def _parse_exponent(key: str) -> Exponent:
    try:
        exponent = tuple(int(part) for part in key.split(","))
    except ValueError:
        raise ValueError(f"exponent key {key!r} must be comma separated integers") from None
    if any(e < 0 for e in exponent):
        raise ValueError(f"exponent key {key!r} has negative entries")
    return exponent


@dataclass(frozen=True, eq=False)
class LoadedProblem:
    path: str
    digest: str
    source: ProblemFile
    problem: IGEProblem
    fan: Fan | None
    objective: Objective | None
    tolerances: Tolerances


def bundled_problems() -> list[str]:
    return sorted(item.name for item in BUNDLED_DIR.glob("*.json"))


def resolve_path(path: str | Path) -> Path:
    """Paths that do not exist fall back to the bundled problem of that name."""
    path = Path(path)
    if not path.exists() and path.name == str(path) and (BUNDLED_DIR / path.name).exists():
        return BUNDLED_DIR / path.name
    return path


def load_problem(path: str | Path, base: Tolerances | None = None) -> LoadedProblem:
    path = resolve_path(path)
    data = path.read_bytes()
    try:
        document = json.loads(data)
    except json.JSONDecodeError as e:
        raise ProblemParseError(str(path), e.lineno, e.colno, e.msg) from None
    except UnicodeDecodeError as e:
        raise ProblemParseError(str(path), 1, 1, str(e)) from None
    try:
        source = ProblemFile.model_validate(document)
    except ValidationError as e:
        error = e.errors()[0]
        raise ProblemValidationError(str(path), _location(error["loc"]), error["msg"]) from None
    return build(source, str(path), digest(data), base or Tolerances())


def _location(loc: tuple[int | str, ...]) -> str:
    text = ""
    for part in loc:
        if isinstance(part, int):
            text += f"[{part}]"
        else:
            text += f".{part}" if text else part
    return text or "<root>"


def build(source: ProblemFile, path: str, file_digest: str, base: Tolerances) -> LoadedProblem:
    """Turn a validated document into domain objects, reporting dimension errors by location."""
    overrides = {key: value for key, value in source.tolerances.model_dump().items() if value is not None}
    try:
        tolerances = Tolerances(**{**base.__dict__, **overrides})
    except ValueError as e:
        raise ProblemValidationError(path, "tolerances", str(e)) from None

    location = "cone"
    try:
        cone = _build_cone(source.cone)
        location = "domain"
        domain = Polyhedron(
            np.array(source.domain.rows, dtype=float).reshape(len(source.domain.rows), source.mapping.dim_in),
            np.array(source.domain.rhs, dtype=float),
            source.mapping.dim_in,
        )
        location = "mapping"
        mapping = _build_mapping(source.mapping)
        location = "fan"
        fan = _build_fan(source, mapping)
        location = "objective"
        objective = _build_objective(source)
        location = "problem"
        problem = IGEProblem(mapping=mapping, cone=cone, domain=domain, reference=np.array(source.reference))
    except (ValueError, NonFiniteError, InvalidProblem) as e:
        raise ProblemValidationError(path, location, str(e)) from None
    logger.debug("loaded %s (%s)", path, file_digest[:12])
    return LoadedProblem(
        path=path,
        digest=file_digest,
        source=source,
        problem=problem,
        fan=fan,
        objective=objective,
        tolerances=tolerances,
    )


def _build_cone(model: ConeModel) -> HCone:
    if (model.rows is None) == (model.rays is None):
        raise ValueError("give exactly one of rows or rays")
    if model.rows is not None:
        return HCone.from_rows(np.array(model.rows, dtype=float).reshape(len(model.rows), model.dim), model.dim)
    assert model.rays is not None
    rays = VCone.from_rays(np.array(model.rays, dtype=float).reshape(len(model.rays), model.dim), model.dim)
    return dd_convert_back(rays)


def _build_mapping(model: MappingModel) -> PolytopicMapping:
    pieces: list[MappingPiece] = []
    for piece in model.pieces:
        paths: list[PolynomialMap] = []
        for path in piece.vertices:
            terms: dict[Exponent, Any] = {_parse_exponent(key): coeffs for key, coeffs in path.items()}
            paths.append(PolynomialMap(model.dim_in, model.dim_out, terms))
        rays = np.array(piece.rays, dtype=float).reshape(len(piece.rays), model.dim_out)
        pieces.append(MappingPiece(tuple(paths), rays))
    return PolytopicMapping(model.dim_in, model.dim_out, tuple(pieces))


def _build_fan(source: ProblemFile, mapping: PolytopicMapping) -> Fan | None:
    if source.fan is not None:
        fan = Fan(tuple(np.array(g, dtype=float) for g in source.fan.generators))
        if (fan.n, fan.m) != (mapping.n, mapping.m):
            raise ValueError("fan generators must be dim_out x dim_in")
        return fan
    if mapping.is_affine:
        return induced_fan(mapping)
    return None


def _build_objective(source: ProblemFile) -> Objective | None:
    model = source.objective
    if model is None:
        return None
    n = source.mapping.dim_in
    if isinstance(model, QuadraticModel):
        Q = np.zeros((n, n)) if model.Q is None else np.array(model.Q, dtype=float)
        return Objective.quadratic(Q, model.c, model.d)
    return Objective.concave_min(model.slopes, model.offsets)


def schema() -> dict[str, Any]:
    return ProblemFile.model_json_schema()
