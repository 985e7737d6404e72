"""
Global sparse systems: assembly from stencils and boundary conditions, BiCGSTAB.
"""
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from scipy import sparse
from scipy.io import mmwrite

from errors import (
    Breakdown,
    DuplicateBoundaryCondition,
    InvalidParameter,
    MaxIterExceeded,
    UncoveredBoundaryPoint,
)
from stencils import StencilSet, directional_stencil
from utils import with_restart

logger = structlog.get_logger()

BREAKDOWN_TOL = 1e-300
# smallest tolerance handed to the scaled iteration
SCALED_TOL_FLOOR = 1e-15

Operator = Union[StencilSet, sparse.spmatrix, Sequence[Tuple[float, StencilSet]]]


class BoundaryKind(Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass
class BoundaryCondition:
    """
    Condition on a set of points.

    Dirichlet rows are identity rows with value g_i; Neumann rows are the
    directional stencil rows (ν at each point) with value l_i.
    """
    kind: BoundaryKind
    points: np.ndarray
    values: np.ndarray
    stencil: Optional[StencilSet] = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.intp).ravel()
        self.values = np.broadcast_to(np.asarray(self.values, dtype=float), self.points.shape).copy()
        if self.kind is BoundaryKind.NEUMANN and self.stencil is None:
            raise InvalidParameter("Neumann condition needs a directional stencil")

    @classmethod
    def dirichlet(cls, points, values) -> "BoundaryCondition":
        return cls(kind=BoundaryKind.DIRICHLET, points=points, values=values)

    @classmethod
    def neumann(cls, points, values, grad_stencils: Sequence[StencilSet], directions: np.ndarray) -> "BoundaryCondition":
        """Build ν·∇_M rows; `directions` holds one unit vector per selected point."""
        points = np.asarray(points, dtype=np.intp).ravel()
        per_point = np.zeros((grad_stencils[0].size, len(grad_stencils)))
        per_point[points] = directions
        return cls(kind=BoundaryKind.NEUMANN, points=points, values=values,
                   stencil=directional_stencil(grad_stencils, per_point))


@dataclass
class SparseSystem:
    matrix: sparse.csr_matrix
    rhs: np.ndarray

    def dump(self, path: Union[str, Path]) -> Path:
        """Matrix Market coordinate dump; the rhs goes next to it as <name>_rhs.mtx."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        mmwrite(str(path), self.matrix, comment="surface GFDM system")
        mmwrite(str(path.with_name(path.stem + "_rhs.mtx")), self.rhs.reshape(-1, 1))
        return path


@dataclass
class SolveStats:
    iterations: int
    residual: float
    converged: bool
    restarts: int = 0


def operator_matrix(operator: Operator) -> sparse.csr_matrix:
    """CSR matrix of a stencil set, a sparse matrix, or a weighted sum of stencil sets."""
    if isinstance(operator, StencilSet):
        return operator.matrix
    if sparse.issparse(operator):
        return sparse.csr_matrix(operator)
    total = None
    for weight, stencils in operator:
        term = weight * stencils.matrix
        total = term if total is None else total + term
    if total is None:
        raise InvalidParameter("empty operator combination")
    return sparse.csr_matrix(total)


def assemble(operator: Operator, bcs: Sequence[BoundaryCondition], rhs_interior: np.ndarray,
             is_boundary: Optional[np.ndarray] = None) -> SparseSystem:
    """
    Interior rows from the operator, boundary rows from the conditions.

    Raises:
        UncoveredBoundaryPoint: a boundary point without a condition
        InvalidParameter: non-finite stencil coefficients
        DuplicateBoundaryCondition: a point with more than one condition
    """
    base = operator_matrix(operator)
    n_points = base.shape[0]
    rhs = np.array(rhs_interior, dtype=float, copy=True)
    if rhs.shape != (n_points,):
        raise InvalidParameter("rhs must have one value per point", shape=rhs.shape)

    covered = np.zeros(n_points, dtype=int)
    for bc in bcs:
        np.add.at(covered, bc.points, 1)
    if np.any(covered > 1):
        raise DuplicateBoundaryCondition("point covered by more than one condition",
                                         point=int(np.flatnonzero(covered > 1)[0]))
    if is_boundary is not None:
        missing = np.flatnonzero(np.asarray(is_boundary, dtype=bool) & (covered == 0))
        if len(missing):
            raise UncoveredBoundaryPoint("boundary point without a condition",
                                         point=int(missing[0]), count=len(missing))

    keep = sparse.diags((covered == 0).astype(float))
    blocks = [keep @ base]
    for bc in bcs:
        selector = np.zeros(n_points)
        selector[bc.points] = 1.0
        if bc.kind is BoundaryKind.DIRICHLET:
            blocks.append(sparse.diags(selector))
        else:
            blocks.append(sparse.diags(selector) @ bc.stencil.matrix)
        rhs[bc.points] = bc.values

    matrix = sparse.csr_matrix(sum(blocks[1:], blocks[0]))
    matrix.sum_duplicates()
    matrix.sort_indices()
    check_csr(matrix)
    logger.debug("system_assembled", n_rows=n_points, nnz=matrix.nnz,
                 boundary_rows=int(covered.sum()))
    return SparseSystem(matrix=matrix, rhs=rhs)


def check_csr(matrix: sparse.csr_matrix) -> None:
    """Raise InvalidParameter unless offsets are monotone, columns sorted and in range, values finite."""
    n_rows, n_cols = matrix.shape
    indptr, indices = matrix.indptr, matrix.indices
    if len(indptr) != n_rows + 1 or indptr[0] != 0 or np.any(np.diff(indptr) < 0):
        raise InvalidParameter("row offsets are not monotone")
    if len(indices) and (indices.min() < 0 or indices.max() >= n_cols):
        raise InvalidParameter("column index out of range")
    steps = np.diff(indices)
    within = np.ones(len(steps), dtype=bool)
    row_ends = indptr[1:-1] - 1
    within[row_ends[(row_ends >= 0) & (row_ends < len(steps))]] = False
    unsorted = np.flatnonzero(within & (steps <= 0))
    if len(unsorted):
        row = int(np.searchsorted(indptr, unsorted[0], side="right") - 1)
        raise InvalidParameter("column indices not strictly sorted", row=row)
    if not np.all(np.isfinite(matrix.data)):
        raise InvalidParameter("non-finite matrix entry")


def _bicgstab_once(matrix, b, x, tol: float, max_iter: int) -> Tuple[np.ndarray, SolveStats]:
    norm_b = np.linalg.norm(b)
    threshold = tol * norm_b if norm_b > 0 else tol
    scale = norm_b if norm_b > 0 else 1.0

    r = b - matrix @ x
    norm_r = np.linalg.norm(r)
    if norm_r <= threshold:
        return x, SolveStats(iterations=0, residual=norm_r / scale, converged=True)

    r_star = r.copy()
    p = r.copy()
    rho = r_star @ r

    for iteration in range(1, max_iter + 1):
        if abs(rho) <= BREAKDOWN_TOL:
            raise Breakdown("rho vanished", iteration=iteration, residual=norm_r / scale)
        ap = matrix @ p
        denominator = r_star @ ap
        if abs(denominator) <= BREAKDOWN_TOL:
            raise Breakdown("r*·Ap vanished", iteration=iteration, residual=norm_r / scale)
        alpha = rho / denominator
        s = r - alpha * ap
        norm_s = np.linalg.norm(s)
        if norm_s <= threshold:
            x = x + alpha * p
            return x, SolveStats(iterations=iteration, residual=norm_s / scale, converged=True)

        as_ = matrix @ s
        omega = (as_ @ s) / (as_ @ as_)
        if abs(omega) <= BREAKDOWN_TOL or not np.isfinite(omega):
            raise Breakdown("omega vanished", iteration=iteration, residual=norm_s / scale)
        x = x + alpha * p + omega * s
        r = s - omega * as_
        norm_r = np.linalg.norm(r)
        if norm_r <= threshold:
            return x, SolveStats(iterations=iteration, residual=norm_r / scale, converged=True)

        rho_next = r_star @ r
        beta = (rho_next / rho) * (alpha / omega)
        rho = rho_next
        p = r + beta * (p - omega * ap)

    raise MaxIterExceeded("BiCGSTAB did not converge", iterations=max_iter, residual=norm_r / scale)


def _relative_residual(matrix, b: np.ndarray, x: np.ndarray) -> float:
    norm_b = np.linalg.norm(b)
    norm_r = np.linalg.norm(b - matrix @ x)
    return norm_r / norm_b if norm_b > 0 else norm_r


def bicgstab(matrix, b: np.ndarray, x0: Optional[np.ndarray] = None, tol: float = 1e-10,
             max_iter: int = 1000, diagonal_scaling: bool = False) -> Tuple[np.ndarray, SolveStats]:
    """
    Unpreconditioned BiCGSTAB.

    Converged when ‖b − A x‖₂ ≤ tol·‖b‖₂ (absolute tol when b = 0). A
    breakdown restarts once from a perturbed initial guess.

    With `diagonal_scaling` the iteration runs on D⁻¹A x = D⁻¹b, but the
    stopping test above is still applied to the original system: when the
    scaled residual meets tol and the original one does not, the scaled
    tolerance is tightened and the iteration resumes from the current x
    within the remaining budget. The reported residual is always the
    original one.

    Raises:
        Breakdown: rho, r*·Ap or omega vanished twice
        MaxIterExceeded: iteration budget exhausted
    """
    if matrix.shape[0] != matrix.shape[1]:
        raise InvalidParameter("matrix must be square", shape=matrix.shape)
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise InvalidParameter("right-hand side must be finite")
    if not tol > 0 or max_iter < 1:
        raise InvalidParameter("tol must be positive and max_iter at least 1", tol=tol, max_iter=max_iter)

    x_start = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float, copy=True)
    system, system_b = matrix, b
    if diagonal_scaling:
        diagonal = matrix.diagonal()
        if np.any(diagonal == 0):
            raise InvalidParameter("diagonal scaling needs a nonzero diagonal")
        inverse = sparse.diags(1.0 / diagonal)
        system, system_b = sparse.csr_matrix(inverse @ matrix), b / diagonal

    def solve_from(x_initial: np.ndarray, inner_tol: float, budget: int):
        def attempt(number: int):
            x = x_initial
            if number > 1:
                rng = np.random.default_rng(number)
                size = max(np.linalg.norm(system_b), np.linalg.norm(x_initial), 1e-12) / np.sqrt(len(b))
                x = x_initial + 1e-6 * size * rng.standard_normal(len(b))
            x, stats = _bicgstab_once(system, system_b, x, inner_tol, budget)
            stats.restarts = number - 1
            return x, stats

        return with_restart(attempt, "bicgstab", max_attempts=2, exceptions=(Breakdown,))

    x, stats = solve_from(x_start, tol, max_iter)
    if diagonal_scaling:
        used, inner_tol, restarts = stats.iterations, tol, stats.restarts
        residual = _relative_residual(matrix, b, x)
        while residual > tol and used < max_iter and inner_tol > SCALED_TOL_FLOOR:
            inner_tol = max(inner_tol * max(tol / residual, 1e-3), SCALED_TOL_FLOOR)
            logger.debug("scaled_tolerance_tightened", inner_tol=inner_tol, residual=residual)
            x, more = solve_from(x, inner_tol, max_iter - used)
            used += more.iterations
            restarts += more.restarts
            residual = _relative_residual(matrix, b, x)
        if residual > tol:
            raise MaxIterExceeded("scaled iteration converged but the original residual did not",
                                  iterations=used, residual=residual)
        stats = SolveStats(iterations=used, residual=residual, converged=True, restarts=restarts)
    logger.debug("solve_converged", iterations=stats.iterations, residual=stats.residual,
                 restarts=stats.restarts)
    return x, stats
