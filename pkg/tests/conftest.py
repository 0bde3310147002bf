from dataclasses import dataclass

import numpy as np
import pytest

from igelite.cli.problem import LoadedProblem, load_problem
from igelite.cones import HCone, Polyhedron
from igelite.fans import Fan, increase_certificate
from igelite.mappings import IGEProblem, PolytopicMapping, induced_fan


@pytest.fixture
def identity_orthant() -> LoadedProblem:
    return load_problem("identity_orthant.json")


@pytest.fixture
def errorbound_failure() -> LoadedProblem:
    return load_problem("errorbound_failure.json")


@pytest.fixture
def lshape() -> LoadedProblem:
    return load_problem("lshape.json")


def random_cone(rng: np.random.Generator, dim: int, rows: int) -> HCone:
    """A pointed cone: random normals plus the orthant, so it contains no line."""
    A = np.vstack((rng.normal(size=(rows, dim)), np.eye(dim)))
    return HCone(A, dim)


@dataclass
class AffineInstance:
    problem: IGEProblem
    fan: Fan
    eta: float


def random_affine_instance(seed: int, min_eta: float = 0.02) -> AffineInstance:
    """An affine problem over the orthant with F(x̄) = {0} and a global increase certificate.

    Draws are repeated from the seed until the certificate exists with a usable margin.
    """
    rng = np.random.default_rng(seed)
    while True:
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 5))
        p = int(rng.integers(1, 4))
        reference = rng.normal(size=n)
        matrices = [rng.normal(size=(m, n)) for _ in range(p)]
        offsets = [-(A @ reference) for A in matrices]
        mapping = PolytopicMapping.affine(matrices, offsets)
        cone = HCone.orthant(m)
        fan = induced_fan(mapping)
        certificate = increase_certificate(fan, cone)
        if certificate is None or certificate.eta < min_eta:
            continue
        problem = IGEProblem(
            mapping=mapping,
            cone=cone,
            domain=Polyhedron.whole(n),
            reference=reference,
        )
        return AffineInstance(problem=problem, fan=fan, eta=certificate.eta)
