from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from igelite.utils import FloatArray

logger = logging.getLogger("igelite.numkit")

Vector = FloatArray
Matrix = FloatArray


class NonFiniteError(ValueError):
    pass


class IterationLimit(Exception):
    pass


class EmptyIntersection(Exception):
    pass


@dataclass(frozen=True)
class Tolerances:
    feas_tol: float = 1e-9
    kkt_tol: float = 1e-10
    sample_tol: float = 1e-6
    # level below which prederivative residual ratios count as vanishing
    residual_tol: float = 1e-3
    max_iter: int = 10_000

    def __post_init__(self) -> None:
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if not value > 0:
                raise ValueError(f"{field.name} must be strictly positive, got {value}")


DEFAULT_TOLERANCES = Tolerances()


def as_vector(values: Any, name: str = "vector") -> Vector:
    array = np.array(values, dtype=float)
    if array.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"{name} has non-finite entries")
    array.setflags(write=False)
    return array


def as_matrix(values: Any, columns: int | None = None, name: str = "matrix") -> Matrix:
    array = np.array(values, dtype=float)
    if array.size == 0:
        width = columns if columns is not None else (array.shape[-1] if array.ndim == 2 else 0)
        array = array.reshape(0, width)
    if array.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {array.shape}")
    if columns is not None and array.shape[1] != columns:
        raise ValueError(f"{name} must have {columns} columns, got {array.shape[1]}")
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"{name} has non-finite entries")
    array.setflags(write=False)
    return array


class Sense(Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


Bound = tuple[float | None, float | None]


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Linear program over x in R^n.

    Rows read `matrix[i] @ x <senses[i]> rhs[i]`. Without explicit bounds every
    variable is nonnegative; a bound of None on either side leaves it open.
    """

    objective: Vector
    matrix: Matrix
    senses: tuple[Sense, ...]
    rhs: Vector
    bounds: tuple[Bound, ...] | None = None
    maximize: bool = False

    def __post_init__(self) -> None:
        objective = as_vector(self.objective, "objective")
        matrix = as_matrix(self.matrix, objective.shape[0], "constraint matrix")
        rhs = as_vector(self.rhs, "rhs")
        object.__setattr__(self, "objective", objective)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "senses", tuple(self.senses))
        if len(self.senses) != matrix.shape[0] or rhs.shape[0] != matrix.shape[0]:
            raise ValueError("senses and rhs must match the number of constraint rows")
        if self.bounds is not None:
            if len(self.bounds) != objective.shape[0]:
                raise ValueError("bounds must match the number of variables")
            for lower, upper in self.bounds:
                for value in (lower, upper):
                    if value is not None and not math.isfinite(value):
                        raise NonFiniteError("bounds must be finite or None")
                if lower is not None and upper is not None and lower > upper:
                    raise ValueError("lower bound exceeds upper bound")

    @property
    def num_vars(self) -> int:
        return int(self.objective.shape[0])


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    x: Vector | None = None
    objective: float | None = None
    # one multiplier per constraint row, sign convention of the stated problem
    duals: Vector | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass
class _StandardForm:
    a: Matrix
    b: Vector
    c: Vector
    offset: Vector
    transform: Matrix
    num_struct: int
    num_constraints: int
    row_sign: Vector


def _standard_form(problem: LpProblem) -> _StandardForm:
    n = problem.num_vars
    bounds = problem.bounds if problem.bounds is not None else ((0.0, None),) * n
    offset = np.zeros(n)
    columns: list[Vector] = []
    upper_rows: list[tuple[int, float]] = []
    eye = np.eye(n)
    for j, (lower, upper) in enumerate(bounds):
        if lower is not None:
            offset[j] = lower
            columns.append(eye[j])
            if upper is not None:
                upper_rows.append((len(columns) - 1, upper - lower))
        elif upper is not None:
            offset[j] = upper
            columns.append(-eye[j])
        else:
            columns.extend((eye[j], -eye[j]))
    transform = np.column_stack(columns) if columns else np.zeros((n, 0))
    num_struct = transform.shape[1]

    sign = -1.0 if problem.maximize else 1.0
    cost = sign * (transform.T @ problem.objective)
    rows = problem.matrix @ transform
    rhs = problem.rhs - problem.matrix @ offset
    senses = list(problem.senses)
    if upper_rows:
        extra = np.zeros((len(upper_rows), num_struct))
        for k, (col, _) in enumerate(upper_rows):
            extra[k, col] = 1.0
        rows = np.vstack((rows, extra))
        rhs = np.concatenate((rhs, [width for _, width in upper_rows]))
        senses.extend([Sense.LE] * len(upper_rows))

    slack_rows = [i for i, sense in enumerate(senses) if sense is not Sense.EQ]
    slack = np.zeros((len(senses), len(slack_rows)))
    for k, i in enumerate(slack_rows):
        slack[i, k] = 1.0 if senses[i] is Sense.LE else -1.0
    a = np.hstack((rows, slack))
    c = np.concatenate((cost, np.zeros(len(slack_rows))))
    row_sign = np.where(rhs < 0.0, -1.0, 1.0)
    return _StandardForm(
        a=a * row_sign[:, None],
        b=rhs * row_sign,
        c=c,
        offset=offset,
        transform=transform,
        num_struct=num_struct,
        num_constraints=problem.matrix.shape[0],
        row_sign=row_sign,
    )


def _pivot(tableau: Matrix, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factor = tableau[:, col].copy()
    factor[row] = 0.0
    tableau -= np.outer(factor, tableau[row])


class _Simplex:
    """Dense tableau iterations with Dantzig pricing, switching to Bland's rule."""

    def __init__(self, tol: Tolerances, bland_after: int) -> None:
        self.tol = tol
        self.bland_after = bland_after
        self.iterations = 0

    def run(self, tableau: Matrix, basis: FloatArray, num_candidates: int) -> bool:
        """Iterate to optimality; returns False when the objective is unbounded."""
        m = tableau.shape[0] - 1
        eps = self.tol.feas_tol
        while True:
            if num_candidates == 0:
                return True
            costs = tableau[m, :num_candidates]
            if self.iterations >= self.bland_after:
                negative = np.flatnonzero(costs < -eps)
                if negative.size == 0:
                    return True
                col = int(negative[0])
            else:
                col = int(np.argmin(costs))
                if costs[col] >= -eps:
                    return True
            column = tableau[:m, col]
            positive = column > eps
            if not positive.any():
                return False
            ratios = np.full(m, np.inf)
            ratios[positive] = tableau[:m, -1][positive] / column[positive]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + eps)
            row = int(ties[np.argmin(basis[ties])])
            _pivot(tableau, row, col)
            basis[row] = col
            self.iterations += 1
            if self.iterations > self.tol.max_iter:
                raise IterationLimit(
                    f"simplex exceeded {self.tol.max_iter} iterations (degenerate cycling?)"
                )


def solve_lp(problem: LpProblem, tol: Tolerances = DEFAULT_TOLERANCES) -> LpSolution:
    form = _standard_form(problem)
    m, n = form.a.shape
    simplex = _Simplex(tol, bland_after=3 * (m + n))
    scale = max(1.0, float(np.abs(form.b).max(initial=0.0)))

    # phase one: artificial basis, minimize the sum of artificials
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = form.a
    tableau[:m, n : n + m] = np.eye(m)
    tableau[:m, -1] = form.b
    tableau[m, :n] = -form.a.sum(axis=0)
    tableau[m, -1] = -form.b.sum()
    basis = np.arange(n, n + m)
    simplex.run(tableau, basis, n)
    if -tableau[m, -1] > tol.feas_tol * scale:
        logger.debug("phase one ended with infeasibility %g", -tableau[m, -1])
        return LpSolution(LpStatus.INFEASIBLE, iterations=simplex.iterations)

    keep: list[int] = []
    for i in range(m):
        if basis[i] >= n:
            candidates = np.flatnonzero(np.abs(tableau[i, :n]) > tol.feas_tol)
            if candidates.size == 0:
                logger.debug("dropping redundant row %d", i)
                continue
            _pivot(tableau, i, int(candidates[0]))
            basis[i] = candidates[0]
        keep.append(i)

    rows = np.array(keep, dtype=int)
    second = np.zeros((rows.shape[0] + 1, n + 1))
    second[:-1, :n] = tableau[rows, :n]
    second[:-1, -1] = tableau[rows, -1]
    basis = basis[rows]
    second[-1, :n] = form.c - form.c[basis] @ second[:-1, :n]
    second[-1, -1] = -(form.c[basis] @ second[:-1, -1])
    if not simplex.run(second, basis, n):
        return LpSolution(LpStatus.UNBOUNDED, iterations=simplex.iterations)

    z = np.zeros(n)
    z[basis] = np.maximum(second[:-1, -1], 0.0)
    x = form.offset + form.transform @ z[: form.num_struct]

    duals = np.zeros(m)
    if rows.shape[0] > 0:
        basic = form.a[rows][:, basis]
        duals[rows] = np.linalg.lstsq(basic.T, form.c[basis], rcond=None)[0]
    duals = (duals * form.row_sign)[: form.num_constraints]
    if problem.maximize:
        duals = -duals

    _check_primal(problem, x, tol)
    return LpSolution(
        LpStatus.OPTIMAL,
        x=x,
        objective=float(problem.objective @ x),
        duals=duals,
        iterations=simplex.iterations,
    )


def _check_primal(problem: LpProblem, x: Vector, tol: Tolerances) -> None:
    lhs = problem.matrix @ x
    violation = 0.0
    for value, sense, rhs in zip(lhs, problem.senses, problem.rhs, strict=True):
        if sense is Sense.LE:
            violation = max(violation, value - rhs)
        elif sense is Sense.GE:
            violation = max(violation, rhs - value)
        else:
            violation = max(violation, abs(value - rhs))
    scale = max(1.0, float(np.abs(problem.rhs).max(initial=0.0)))
    if violation > tol.feas_tol * scale * 10:
        logger.warning("LP solution violates constraints by %g", violation)


def feasible_point(G: Matrix, h: Vector, tol: Tolerances = DEFAULT_TOLERANCES) -> Vector | None:
    """Some x with G x >= h, or None when the system is inconsistent."""
    n = G.shape[1]
    problem = LpProblem(
        objective=np.zeros(n),
        matrix=G,
        senses=(Sense.GE,) * G.shape[0],
        rhs=h,
        bounds=((None, None),) * n,
    )
    solution = solve_lp(problem, tol)
    return solution.x if solution.optimal else None


@dataclass(frozen=True, eq=False)
class NnlsResult:
    coeffs: Vector
    fitted: Vector
    residual_norm: float
    kkt_residual: float


def nnls(G: Matrix, y: Vector, tol: Tolerances = DEFAULT_TOLERANCES) -> NnlsResult:
    """Lawson-Hanson active set for min |G beta - y| subject to beta >= 0."""
    G = as_matrix(G, name="G")
    y = as_vector(y, "y")
    if G.shape[1] < 1:
        raise ValueError("G must have at least one column")
    if G.shape[0] != y.shape[0]:
        raise ValueError("G and y have inconsistent dimensions")
    return _active_set_lsq(G, y, np.zeros(G.shape[1], dtype=bool), tol)


def nnls_simplex(
    G: Matrix, y: Vector, convex: FloatArray, tol: Tolerances = DEFAULT_TOLERANCES
) -> NnlsResult:
    """Nonnegative least squares where the weights flagged in `convex` also sum to one.

    This is the distance problem for conv(vertices) + cone(rays) when the
    columns of G are the vertices followed by the rays.
    """
    G = as_matrix(G, name="G")
    y = as_vector(y, "y")
    mask = np.asarray(convex, dtype=bool)
    if mask.shape != (G.shape[1],) or not mask.any():
        raise ValueError("convex mask must flag at least one column of G")
    if G.shape[0] != y.shape[0]:
        raise ValueError("G and y have inconsistent dimensions")
    return _active_set_lsq(G, y, mask, tol)


def _active_set_lsq(G: Matrix, y: Vector, convex: FloatArray, tol: Tolerances) -> NnlsResult:
    n = G.shape[1]
    has_simplex = bool(convex.any())
    beta = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    if has_simplex:
        candidates = np.flatnonzero(convex)
        start = candidates[np.argmin(np.linalg.norm(G[:, candidates] - y[:, None], axis=0))]
        beta[start] = 1.0
        passive[start] = True
    scale = max(1.0, float(np.abs(G).max(initial=0.0)) * float(np.abs(y).max(initial=0.0)))
    threshold = tol.kkt_tol * scale
    tiny = np.finfo(float).eps * max(1, n)

    iterations = 0
    stalled = False
    while not stalled:
        w = _dual_gradient(G, y, beta, passive, convex)
        w[passive] = -np.inf
        entering = int(np.argmax(w))
        if passive.all() or w[entering] <= threshold:
            break
        passive[entering] = True
        first = True
        while True:
            iterations += 1
            if iterations > tol.max_iter:
                raise IterationLimit(f"nnls exceeded {tol.max_iter} iterations")
            z = _passive_solution(G, y, passive, convex)
            if first and z[entering] <= tiny:
                # no descent along the entering column: numerically converged
                passive[entering] = False
                stalled = True
                break
            first = False
            if np.all(z[passive] > tiny):
                beta = z
                break
            blocking = passive & (z <= tiny)
            alpha = float(np.min(beta[blocking] / (beta[blocking] - z[blocking])))
            beta = beta + alpha * (z - beta)
            passive &= beta > tiny
            beta[~passive] = 0.0

    fitted = G @ beta
    w = _dual_gradient(G, y, beta, passive, convex)
    kkt = max(0.0, float(w.max(initial=0.0)), float(np.abs(beta * w).max(initial=0.0)))
    return NnlsResult(
        coeffs=beta,
        fitted=fitted,
        residual_norm=float(np.linalg.norm(fitted - y)),
        kkt_residual=kkt,
    )


def _dual_gradient(
    G: Matrix, y: Vector, beta: Vector, passive: FloatArray, convex: FloatArray
) -> Vector:
    gradient = G.T @ (y - G @ beta)
    anchored = passive & convex
    if anchored.any():
        # multiplier of the sum-to-one constraint, read off the passive vertex columns
        gradient = gradient - float(gradient[anchored].mean()) * convex
    return gradient


def _passive_solution(G: Matrix, y: Vector, passive: FloatArray, convex: FloatArray) -> Vector:
    z = np.zeros(G.shape[1])
    idx = np.flatnonzero(passive)
    Gp = G[:, idx]
    weights = convex[idx].astype(float)
    if weights.any():
        k = idx.shape[0]
        system = np.zeros((k + 1, k + 1))
        system[:k, :k] = Gp.T @ Gp
        system[:k, k] = weights
        system[k, :k] = weights
        rhs = np.concatenate((Gp.T @ y, [1.0]))
        z[idx] = np.linalg.lstsq(system, rhs, rcond=None)[0][:k]
    else:
        z[idx] = np.linalg.lstsq(Gp, y, rcond=None)[0]
    return z


@dataclass(frozen=True, eq=False)
class Projection:
    point: Vector
    distance: float
    sweeps: int


def dykstra_project(
    G: Matrix, h: Vector, y: Vector, tol: Tolerances = DEFAULT_TOLERANCES
) -> Projection:
    """Euclidean projection of y onto {x : G x >= h} by Dykstra's cyclic projections.

    After every sweep the halfspaces that carry a nonzero Dykstra increment are
    tried as the active set of the projection; when the KKT conditions hold
    for that set the exact projection is returned.
    """
    G = as_matrix(G, name="G")
    h = as_vector(h, "h")
    y = as_vector(y, "y")
    if G.shape[0] != h.shape[0] or G.shape[1] != y.shape[0]:
        raise ValueError("halfspace data and point have inconsistent dimensions")
    if feasible_point(G, h, tol) is None:
        raise EmptyIntersection("halfspace system is infeasible")

    norms = np.linalg.norm(G, axis=1)
    if _is_feasible(G, h, y, norms, tol):
        return Projection(point=y.copy(), distance=0.0, sweeps=0)

    x = y.copy()
    increments = np.zeros_like(G)
    for sweep in range(1, tol.max_iter + 1):
        previous = x.copy()
        for j in range(G.shape[0]):
            if norms[j] == 0.0:
                continue
            z = x + increments[j]
            gap = h[j] - G[j] @ z
            x = z + (max(gap, 0.0) / norms[j] ** 2) * G[j] if gap > 0.0 else z
            increments[j] = z - x
        polished = _polish(G, h, y, increments, norms, tol)
        if polished is not None:
            return Projection(point=polished, distance=float(np.linalg.norm(polished - y)), sweeps=sweep)
        if np.linalg.norm(x - previous) < tol.kkt_tol:
            logger.debug("dykstra converged after %d sweeps without an exact active set", sweep)
            return Projection(point=x, distance=float(np.linalg.norm(x - y)), sweeps=sweep)
    raise IterationLimit(f"dykstra exceeded {tol.max_iter} sweeps")


def _is_feasible(G: Matrix, h: Vector, x: Vector, norms: Vector, tol: Tolerances) -> bool:
    slack = G @ x - h
    scale = np.maximum(1.0, norms * float(np.linalg.norm(x)))
    return bool(np.all(slack >= -tol.feas_tol * scale))


def _polish(
    G: Matrix, h: Vector, y: Vector, increments: Matrix, norms: Vector, tol: Tolerances
) -> Vector | None:
    active = np.flatnonzero(np.linalg.norm(increments, axis=1) > 0.0)
    if active.size == 0:
        return None
    Ga = G[active]
    mu = np.linalg.lstsq(Ga @ Ga.T, h[active] - Ga @ y, rcond=None)[0]
    if mu.min() < -tol.kkt_tol * max(1.0, float(np.abs(mu).max())):
        return None
    candidate = y + Ga.T @ mu
    if np.abs(Ga @ candidate - h[active]).max() > tol.feas_tol * max(1.0, float(np.abs(h).max())):
        return None
    if not _is_feasible(G, h, candidate, norms, tol):
        return None
    return candidate


def _jacobi_eigenvalues(matrix: Matrix, tol: Tolerances = DEFAULT_TOLERANCES) -> Vector:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0)
    scale = max(float(np.abs(a).max()), np.finfo(float).tiny)
    for _ in range(min(tol.max_iter, 100)):
        off = math.sqrt(max(float(np.sum(a * a) - np.sum(np.diag(a) ** 2)), 0.0))
        if off <= 1e-15 * scale * n:
            return np.diag(a).copy()
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0.0 else -1.0) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                rotation = np.eye(n)
                rotation[p, p] = c
                rotation[q, q] = c
                rotation[p, q] = s
                rotation[q, p] = -s
                a = rotation.T @ a @ rotation
    raise IterationLimit("jacobi eigenvalue iteration did not converge")


def smallest_singular_value(matrix: Matrix, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """sigma_min of the transpose, i.e. the openness bound of a linear map R^n -> R^m."""
    matrix = as_matrix(matrix, name="linear map")
    if matrix.shape[0] == 0:
        raise ValueError("linear map must have at least one row")
    eigenvalues = _jacobi_eigenvalues(matrix @ matrix.T, tol)
    return math.sqrt(max(float(eigenvalues.min()), 0.0))


def largest_singular_value(matrix: Matrix, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    matrix = as_matrix(matrix, name="linear map")
    if matrix.size == 0:
        return 0.0
    gram = matrix.T @ matrix if matrix.shape[1] <= matrix.shape[0] else matrix @ matrix.T
    return math.sqrt(max(float(_jacobi_eigenvalues(gram, tol).max()), 0.0))
