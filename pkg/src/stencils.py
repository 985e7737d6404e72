"""
GFDM stencils by weighted least squares on tangent-plane offsets.

Every row c_i minimizes sum_j (c_ij / W_ij)^2 subject to exactly
differentiating all monomials of the basis. Systems are solved in offsets
scaled by the support radius h_i; the right-hand side for a monomial of
degree |a| is scaled by h_i^-|a|, so the solved coefficients are physical.
"""
import time
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations_with_replacement
from math import comb, factorial
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import structlog
from scipy import linalg, sparse

from errors import (
    InsufficientNeighbors,
    InvalidParameter,
    NonSPDKappa,
    OptimizerDegenerate,
    SingularSystem,
)
from frames import Frame
from highdim import orthonormal_completion, rotate_to_embedding
from projection import ProjectedNeighborhood

logger = structlog.get_logger()

# condition limit of the weighted normal matrix before switching to pivoted QR
CONDITION_LIMIT = 1e12
# relative size of the smallest pivot of R below which the system is singular
RANK_TOL = 1e-12
# relative weighted residual below which a jump-mode constraint column counts as
# dependent on the columns accepted before it
JUMP_DEPENDENCE_TOL = 1e-6
# dimensionless h‖∇ log κ‖ below which the δs jump condition degenerates
JUMP_GRADIENT_TOL = 1e-8
# relative spread of κ over a support below which jump rows reduce to plain rows
JUMP_UNIFORM_TOL = 1e-12


class OperatorKind(Enum):
    GRAD_T1 = "grad_t1"
    GRAD_T2 = "grad_t2"
    SURFACE_GRAD_X = "surface_grad_x"
    SURFACE_GRAD_Y = "surface_grad_y"
    SURFACE_GRAD_Z = "surface_grad_z"
    LAPLACIAN = "laplacian"
    LAPLACIAN_OPTIMIZED = "laplacian_optimized"
    DIFFUSION = "diffusion"
    DIFFUSION_JUMP = "diffusion_jump"
    DIRECTIONAL = "directional"
    ADVECTION = "advection"


TANGENT_KINDS = (OperatorKind.GRAD_T1, OperatorKind.GRAD_T2)
EMBEDDING_KINDS = (OperatorKind.SURFACE_GRAD_X, OperatorKind.SURFACE_GRAD_Y, OperatorKind.SURFACE_GRAD_Z)


@dataclass(frozen=True)
class MonomialBasis:
    """Monomials in k tangent coordinates up to total degree `order`, graded, constant first."""
    dim: int
    order: int = 2
    exponents: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidParameter("monomial dimension must be at least 1", dim=self.dim)
        if not 1 <= self.order <= 3:
            raise InvalidParameter("monomial order must lie in 1..3", order=self.order)
        rows = []
        for degree in range(self.order + 1):
            for combo in combinations_with_replacement(range(self.dim), degree):
                rows.append(np.bincount(np.array(combo, dtype=int), minlength=self.dim))
        exponents = np.array(rows, dtype=int).reshape(-1, self.dim)
        exponents.setflags(write=False)
        object.__setattr__(self, "exponents", exponents)

    @property
    def count(self) -> int:
        return comb(self.order + self.dim, self.dim)

    @property
    def degrees(self) -> np.ndarray:
        return self.exponents.sum(axis=1)

    def evaluate(self, offsets: np.ndarray) -> np.ndarray:
        """(m, k) offsets -> (m, count) monomial values."""
        offsets = np.atleast_2d(offsets)
        return np.prod(offsets[:, None, :] ** self.exponents[None, :, :], axis=2)

    def derivative_target(self, multi_index: Sequence[int]) -> np.ndarray:
        """∂^β m(0) for every monomial m; nonzero only for m = x^β, where it is β!."""
        beta = np.asarray(multi_index, dtype=int)
        hit = np.all(self.exponents == beta, axis=1)
        value = float(np.prod([factorial(int(b)) for b in beta]))
        return hit * value

    def gradient_target(self, axis: int) -> np.ndarray:
        beta = np.zeros(self.dim, dtype=int)
        beta[axis] = 1
        return self.derivative_target(beta)

    def second_target(self, a: int, b: int) -> np.ndarray:
        beta = np.zeros(self.dim, dtype=int)
        beta[a] += 1
        beta[b] += 1
        return self.derivative_target(beta)

    def laplacian_target(self) -> np.ndarray:
        return sum(self.second_target(a, a) for a in range(self.dim))


@dataclass(frozen=True)
class WeightSpec:
    """Gaussian weights W_ij = exp(-W_F ‖x_j - x_i‖² / (h_i² + h_j²))."""
    wf: float = 2.0

    def __post_init__(self):
        if not self.wf > 0:
            raise InvalidParameter("W_F must be positive", wf=self.wf)

    def compute(self, squared_distances: np.ndarray, h_center: float,
                h_members: Union[float, np.ndarray, None] = None) -> np.ndarray:
        h_members = h_center if h_members is None else h_members
        return np.exp(-self.wf * squared_distances / (h_center ** 2 + np.asarray(h_members) ** 2))


class LocalSystem:
    """
    Factorized weighted least-squares system of one support.

    Solves min ‖c / W‖ subject to Aᵀc = b for any number of right-hand sides.
    The normal matrix (WA)ᵀ(WA) is Cholesky-factorized; when its condition
    exceeds CONDITION_LIMIT, or with `prefer_qr`, a pivoted QR of WA is used
    instead.
    """

    def __init__(self, columns: np.ndarray, weights: np.ndarray, point: Optional[int] = None,
                 prefer_qr: bool = False):
        self.columns = columns
        self.weights = weights
        self.point = point
        weighted = columns * weights[:, None]
        m, q = weighted.shape
        if m < q:
            raise InsufficientNeighbors("support smaller than the number of conditions",
                                        point=point, size=m, required=q)
        self._weighted = weighted
        self._cholesky = None
        self._qr = None

        gram = weighted.T @ weighted
        self.condition = float(np.linalg.cond(gram))
        if not prefer_qr and np.isfinite(self.condition) and self.condition <= CONDITION_LIMIT:
            try:
                self._cholesky = linalg.cho_factor(gram)
            except linalg.LinAlgError:
                self._cholesky = None
        if self._cholesky is None:
            q_factor, r_factor, pivots = linalg.qr(weighted, mode="economic", pivoting=True)
            diagonal = np.abs(np.diag(r_factor))
            if diagonal[0] == 0 or diagonal[-1] < RANK_TOL * diagonal[0]:
                raise SingularSystem("rank-deficient neighborhood; enlarge the support or lower the order",
                                     point=point, condition=self.condition)
            self._qr = (q_factor, r_factor, pivots)

    @property
    def uses_qr(self) -> bool:
        return self._qr is not None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """rhs (q,) or (q, r) -> coefficients (m,) or (m, r)."""
        rhs = np.asarray(rhs, dtype=float)
        vector = rhs.ndim == 1
        rhs = rhs.reshape(len(rhs), -1)
        if self._cholesky is not None:
            reduced = self._weighted @ linalg.cho_solve(self._cholesky, rhs)
        else:
            q_factor, r_factor, pivots = self._qr
            reduced = q_factor @ linalg.solve_triangular(r_factor, rhs[pivots], trans="T")
        coefficients = reduced * self.weights[:, None]
        return coefficients[:, 0] if vector else coefficients


def scaled_columns(projected: ProjectedNeighborhood, basis: MonomialBasis, weights: WeightSpec,
                   member_h: Optional[np.ndarray] = None):
    """Monomial columns in h-scaled offsets, plus the weights of the support."""
    h = projected.h
    squared = (np.einsum("ij,ij->i", projected.tangential_offsets, projected.tangential_offsets)
               + np.einsum("ij,ij->i", projected.normal_offsets, projected.normal_offsets))
    w = weights.compute(squared, h, member_h)
    return basis.evaluate(projected.tangential_offsets / h), w


def scale_rhs(basis: MonomialBasis, h: float, rhs: np.ndarray) -> np.ndarray:
    """Physical targets (q,) or (q, r) -> targets of the h-scaled system."""
    factors = float(h) ** (-basis.degrees.astype(float))
    rhs = np.asarray(rhs, dtype=float)
    return rhs * (factors if rhs.ndim == 1 else factors[:, None])


def local_system(projected: ProjectedNeighborhood, basis: MonomialBasis, weights: WeightSpec,
                 member_h: Optional[np.ndarray] = None) -> LocalSystem:
    columns, w = scaled_columns(projected, basis, weights, member_h)
    return LocalSystem(columns, w, point=projected.center)


def build_wls(projected: ProjectedNeighborhood, basis: MonomialBasis, weights: WeightSpec,
              rhs_list: Sequence[np.ndarray], member_h: Optional[np.ndarray] = None) -> List[np.ndarray]:
    """
    Coefficient rows over S_i for each physical target-derivative vector b.

    Raises:
        InsufficientNeighbors: |S_i| below the monomial count
        SingularSystem: rank-deficient neighborhood
    """
    system = local_system(projected, basis, weights, member_h)
    rhs = scale_rhs(basis, projected.h, np.column_stack(rhs_list))
    coefficients = system.solve(rhs)
    return [coefficients[:, r].copy() for r in range(coefficients.shape[1])]


def support_radii(projections: Sequence[ProjectedNeighborhood]) -> np.ndarray:
    return np.array([p.h for p in projections])


def factorize(projections: Sequence[ProjectedNeighborhood], basis: MonomialBasis,
              weights: WeightSpec) -> List[LocalSystem]:
    """One factorization per point, reusable across operators."""
    start = time.time()
    radii = support_radii(projections)
    systems = [local_system(p, basis, weights, radii[p.members]) for p in projections]
    n_qr = sum(system.uses_qr for system in systems)
    logger.debug("local_systems_factorized", n_points=len(systems), qr_fallbacks=n_qr,
                 seconds=time.time() - start)
    return systems


@dataclass
class StencilSet:
    """Per-point coefficient rows of one operator; row i lives on S_i."""
    kind: OperatorKind
    members: List[np.ndarray]
    coefficients: List[np.ndarray]
    targets: Optional[np.ndarray] = None
    projections: Optional[Sequence[ProjectedNeighborhood]] = field(default=None, repr=False)
    basis: Optional[MonomialBasis] = None
    extra_columns: Optional[List[np.ndarray]] = field(default=None, repr=False)
    extra_targets: Optional[np.ndarray] = None
    _matrix: Optional[sparse.csr_matrix] = field(default=None, init=False, repr=False)

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def matrix(self) -> sparse.csr_matrix:
        if self._matrix is None:
            n_points = self.size
            indptr = np.concatenate([[0], np.cumsum([len(m) for m in self.members])])
            matrix = sparse.csr_matrix(
                (np.concatenate(self.coefficients), np.concatenate(self.members), indptr),
                shape=(n_points, n_points),
            )
            matrix.sort_indices()
            self._matrix = matrix
        return self._matrix

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(values, dtype=float)

    def row(self, i: int) -> Dict[int, float]:
        return dict(zip(self.members[i].tolist(), self.coefficients[i].tolist()))

    def scaled(self, factor: float, kind: Optional[OperatorKind] = None) -> "StencilSet":
        return StencilSet(kind=kind or self.kind, members=self.members,
                          coefficients=[factor * c for c in self.coefficients],
                          targets=None if self.targets is None else factor * self.targets,
                          projections=self.projections, basis=self.basis)

    def consistency_residuals(self) -> np.ndarray:
        """
        Per-point max |Σ_j c_ij m(δ_j) - L m(0)| over the basis, relative to
        the largest target (1 when all targets vanish).
        """
        if self.targets is None or self.projections is None or self.basis is None:
            raise InvalidParameter("stencil set carries no consistency data", kind=self.kind.value)
        residuals = np.empty(self.size)
        for i, (projected, coeffs) in enumerate(zip(self.projections, self.coefficients)):
            action = coeffs @ self.basis.evaluate(projected.tangential_offsets)
            scale = np.abs(self.targets[i]).max()
            residuals[i] = np.abs(action - self.targets[i]).max() / (scale if scale > 0 else 1.0)
        return residuals

    def extra_residuals(self) -> np.ndarray:
        """Per-point residuals of the jump conditions, relative to max(|target|, 1)."""
        if self.extra_columns is None:
            raise InvalidParameter("stencil set has no jump conditions", kind=self.kind.value)
        residuals = np.empty(self.size)
        for i, (columns, coeffs) in enumerate(zip(self.extra_columns, self.coefficients)):
            targets = self.extra_targets[i]
            scale = max(np.abs(targets).max(), 1.0)
            residuals[i] = np.abs(coeffs @ columns - targets).max() / scale
        return residuals


@dataclass
class DiffusionField:
    """
    Scalar κ (N,) or tensor κ (N, n, n) in embedding coordinates.

    `log_gradient` (N, n) and `log_laplacian` (N,) optionally supply analytic
    ∇_M log κ and Δ_M log κ for the jump conditions and the advective term.
    """
    kappa: np.ndarray
    log_gradient: Optional[np.ndarray] = None
    log_laplacian: Optional[np.ndarray] = None

    def __post_init__(self):
        self.kappa = np.asarray(self.kappa, dtype=float)
        if not np.all(np.isfinite(self.kappa)):
            raise NonSPDKappa("κ must be finite")
        if self.is_tensor:
            if not np.allclose(self.kappa, np.swapaxes(self.kappa, 1, 2), rtol=1e-12, atol=1e-14):
                raise NonSPDKappa("tensor κ must be symmetric")
        elif np.any(self.kappa <= 0):
            raise NonSPDKappa("scalar κ must be positive", min_kappa=float(self.kappa.min()))

    @property
    def is_tensor(self) -> bool:
        return self.kappa.ndim == 3

    @classmethod
    def constant(cls, value: float, n_points: int) -> "DiffusionField":
        return cls(kappa=np.full(n_points, float(value)), log_gradient=None, log_laplacian=None)


def _check_sizes(projections, frames) -> None:
    if frames is not None and len(frames) != len(projections):
        raise InvalidParameter("one frame per projected neighborhood is required",
                               frames=len(frames), projections=len(projections))


def _tangent_gradient_rows(projections, basis, systems) -> List[np.ndarray]:
    """Per point an (m, k) array whose column a is the t_a derivative row."""
    rhs = np.column_stack([basis.gradient_target(a) for a in range(basis.dim)])
    return [system.solve(scale_rhs(basis, p.h, rhs)) for p, system in zip(projections, systems)]


def tangent_gradient(projections: Sequence[ProjectedNeighborhood], basis: MonomialBasis, weights: WeightSpec,
                     systems: Optional[List[LocalSystem]] = None) -> List[StencilSet]:
    """Raw tangent-plane derivative rows along t_1..t_k."""
    systems = systems or factorize(projections, basis, weights)
    rows = _tangent_gradient_rows(projections, basis, systems)
    members = [p.members for p in projections]
    stencils = []
    for a in range(basis.dim):
        targets = np.tile(basis.gradient_target(a), (len(projections), 1))
        stencils.append(StencilSet(kind=TANGENT_KINDS[a], members=members,
                                   coefficients=[r[:, a].copy() for r in rows], targets=targets,
                                   projections=projections, basis=basis))
    return stencils


def surface_gradient(cloud, frames: Sequence[Frame], projections: Sequence[ProjectedNeighborhood],
                     basis: MonomialBasis, weights: WeightSpec,
                     systems: Optional[List[LocalSystem]] = None) -> List[StencilSet]:
    """
    Embedding-space surface-gradient rows, one StencilSet per ambient axis.

    Per neighbor (c^{M,x}, c^{M,y}, ...)ᵀ = Rᵀ (c^{t1}, ..., 0)ᵀ, so the normal
    component of every row vanishes.
    """
    _check_sizes(projections, frames)
    if cloud is not None and cloud.size != len(projections):
        raise InvalidParameter("projections do not cover the cloud", n_points=cloud.size)
    start = time.time()
    systems = systems or factorize(projections, basis, weights)
    tangent_rows = _tangent_gradient_rows(projections, basis, systems)
    n = frames[0].embedding_dim
    tangent_targets = np.column_stack([basis.gradient_target(a) for a in range(basis.dim)])

    coefficients: List[List[np.ndarray]] = [[] for _ in range(n)]
    targets = np.empty((n, len(projections), basis.count))
    for i, (frame, rows) in enumerate(zip(frames, tangent_rows)):
        ambient = rotate_to_embedding(frame, rows.T)
        for axis in range(n):
            coefficients[axis].append(ambient[axis])
        targets[:, i, :] = (tangent_targets @ frame.tangents).T

    members = [p.members for p in projections]
    stencils = [StencilSet(kind=EMBEDDING_KINDS[axis], members=members, coefficients=coefficients[axis],
                           targets=targets[axis], projections=projections, basis=basis)
                for axis in range(n)]
    logger.debug("stencils_built", kind="surface_gradient", n_points=len(projections),
                 seconds=time.time() - start)
    return stencils


def surface_divergence_apply(grad_stencils: Sequence[StencilSet], field_values: np.ndarray) -> np.ndarray:
    """Σ_a G_a v^a for a per-point ambient vector field v of shape (N, n)."""
    field_values = np.asarray(field_values, dtype=float)
    if field_values.ndim != 2 or field_values.shape != (grad_stencils[0].size, len(grad_stencils)):
        raise InvalidParameter("vector field must have shape (N, n)", shape=field_values.shape)
    return sum(g.apply(field_values[:, a]) for a, g in enumerate(grad_stencils))


def default_center_value(projected: ProjectedNeighborhood, basis: MonomialBasis, weights: np.ndarray) -> float:
    """Ã_c = -2·count / Σ_j W_ij ‖δ_j‖², negative and h⁻²-scaled."""
    squared = np.einsum("ij,ij->i", projected.tangential_offsets, projected.tangential_offsets)
    return -2.0 * basis.count / float(weights @ squared)


def optimize_laplacian_row(columns: np.ndarray, weights: np.ndarray, scaled_target: np.ndarray,
                           center_value: float, point: Optional[int] = None):
    """
    Split c = σ + α d and pick α to minimize g = Σ_j c_j² / c_ii².

    σ is consistent with σ_ii = Ã_c; d annihilates every monomial with
    d_ii = 1. Returns (row, α).

    Raises:
        OptimizerDegenerate: when the denominator of α vanishes
    """
    center = np.zeros(len(columns))
    center[0] = 1.0
    system = LocalSystem(np.column_stack([columns, center]), weights, point=point)
    rhs = np.zeros((columns.shape[1] + 1, 2))
    rhs[:-1, 0] = scaled_target
    rhs[-1, 0] = center_value
    rhs[-1, 1] = 1.0
    split = system.solve(rhs)
    sigma, d = split[:, 0], split[:, 1]

    sd, dd, ss = sigma @ d, d @ d, sigma @ sigma
    denominator = sd - dd * center_value
    if abs(denominator) <= 1e-13 * (abs(sd) + abs(dd * center_value)):
        raise OptimizerDegenerate("vanishing denominator in the optimized split", point=point)
    alpha = (sd * center_value - ss) / denominator
    return sigma + alpha * d, alpha


def surface_laplacian(projections: Sequence[ProjectedNeighborhood], basis: MonomialBasis, weights: WeightSpec,
                      optimize: bool = False, ac: Optional[float] = None,
                      systems: Optional[List[LocalSystem]] = None) -> StencilSet:
    """
    Laplace-Beltrami rows c^{Δ_M} = c^{Δ_T}.

    With `optimize`, the central weight is enlarged by the σ + α d split.
    `ac` is the dimensionless center value Ã_c (the physical value is
    ac / h_i²); by default the weighted second-moment value is used.
    """
    if ac is not None and ac in (0.0, 1.0):
        raise InvalidParameter("Ã_c must not be 0 or 1", ac=ac)
    start = time.time()
    systems = systems or factorize(projections, basis, weights)
    target = basis.laplacian_target()
    coefficients = []
    degenerate = 0
    for p, system in zip(projections, systems):
        scaled_target = scale_rhs(basis, p.h, target)
        plain = system.solve(scaled_target)
        if not optimize:
            coefficients.append(plain)
            continue
        center_value = ac / p.h ** 2 if ac is not None else default_center_value(p, basis, system.weights)
        try:
            row, _ = optimize_laplacian_row(system.columns, system.weights, scaled_target, center_value,
                                            point=p.center)
        except OptimizerDegenerate as exc:
            logger.warning("optimizer_degenerate", point=exc.context.get("point"), fallback="plain")
            degenerate += 1
            row = plain
        coefficients.append(row)

    kind = OperatorKind.LAPLACIAN_OPTIMIZED if optimize else OperatorKind.LAPLACIAN
    logger.debug("stencils_built", kind=kind.value, n_points=len(projections), degenerate=degenerate,
                 seconds=time.time() - start)
    return StencilSet(kind=kind, members=[p.members for p in projections], coefficients=coefficients,
                      targets=np.tile(target, (len(projections), 1)), projections=projections, basis=basis)


def stencil_quality(stencils: StencilSet) -> np.ndarray:
    """g_i = Σ_j c_ij² / c_ii² per point (smaller means a dominant center)."""
    return np.array([(c @ c) / c[0] ** 2 for c in stencils.coefficients])


def _log_kappa_derivatives(field_values: DiffusionField, frames, projections, basis, weights, systems,
                           source: str):
    """Nodal ∇_M log κ (N, n) and Δ_M log κ (N,)."""
    if source == "analytic":
        if field_values.log_gradient is None or field_values.log_laplacian is None:
            raise InvalidParameter("analytic κ derivatives requested but not supplied")
        return np.asarray(field_values.log_gradient, float), np.asarray(field_values.log_laplacian, float)
    if source != "numerical":
        raise InvalidParameter(f"unknown κ-gradient source '{source}'")
    log_kappa = np.log(field_values.kappa)
    grads = surface_gradient(None, frames, projections, basis, weights, systems)
    gradient = np.column_stack([g.apply(log_kappa) for g in grads])
    laplacian = surface_laplacian(projections, basis, weights, systems=systems).apply(log_kappa)
    return gradient, laplacian


def _diffusion_target(basis: MonomialBasis, second: np.ndarray, first: np.ndarray) -> np.ndarray:
    """Σ_ab K_ab ∂_a∂_b m(0) + Σ_b f_b ∂_b m(0) for every monomial."""
    target = np.zeros(basis.count)
    for a in range(basis.dim):
        target += first[a] * basis.gradient_target(a)
        for b in range(basis.dim):
            target += second[a, b] * basis.second_target(a, b)
    return target


def _independent_columns(weighted: np.ndarray, tol: float = JUMP_DEPENDENCE_TOL) -> List[int]:
    """
    Greedy column selection in the given order.

    A column is accepted when its residual against the span of the columns
    accepted before it is at least `tol` times its norm.
    """
    basis: List[np.ndarray] = []
    keep = []
    for idx in range(weighted.shape[1]):
        column = weighted[:, idx]
        norm = np.linalg.norm(column)
        if norm == 0:
            continue
        residual = column.copy()
        for _ in range(2):
            for q in basis:
                residual -= (q @ residual) * q
        length = np.linalg.norm(residual)
        if length >= tol * norm:
            keep.append(idx)
            basis.append(residual / length)
    return keep


def _aligned_rotation(direction: np.ndarray) -> np.ndarray:
    """k×k orthogonal matrix whose first row is `direction`."""
    if len(direction) == 1:
        return direction.reshape(1, 1)
    return np.vstack([direction, orthonormal_completion(direction[None, :])])


def _jump_row(p: ProjectedNeighborhood, system: LocalSystem, basis: MonomialBasis, kappa_i: float,
              kappa_j: np.ndarray, direction: np.ndarray, log_grad_t: np.ndarray,
              conditions: np.ndarray, active: List[int]):
    """
    One jump-mode row; returns (coefficients, dropped extras, replaced monomials).

    The jump conditions come first. Monomial conditions follow in a frame
    whose first axis is s, those without an s factor first, and any monomial
    already fixed by the accepted conditions is left to them.
    """
    rotation = _aligned_rotation(direction)
    offsets = p.tangential_offsets @ rotation.T
    ds = offsets[:, 0]
    factors = kappa_i / p.h ** np.arange(3)
    extras = np.column_stack([1.0 / kappa_j, ds / kappa_j, ds ** 2 / kappa_j])[:, active] * factors[active]
    extra_rhs = conditions[active] * factors[active]

    order = np.argsort(basis.exponents[:, 0] > 0, kind="stable")
    monomials = basis.evaluate(offsets / p.h)[:, order]
    k = basis.dim
    target = _diffusion_target(basis, kappa_i * np.eye(k), kappa_i * (rotation @ log_grad_t))
    monomial_rhs = scale_rhs(basis, p.h, target)[order]

    columns = np.column_stack([extras, monomials])
    rhs = np.concatenate([extra_rhs, monomial_rhs])
    keep = _independent_columns(columns * system.weights[:, None])
    augmented = LocalSystem(columns[:, keep], system.weights, point=p.center, prefer_qr=True)
    n_extra = len(active)
    dropped = n_extra - sum(idx < n_extra for idx in keep)
    replaced = basis.count - sum(idx >= n_extra for idx in keep)
    return augmented.solve(rhs[keep]), dropped, replaced


def surface_diffusion(projections: Sequence[ProjectedNeighborhood], frames: Sequence[Frame],
                      basis: MonomialBasis, weights: WeightSpec, kappa: DiffusionField,
                      jump_mode: bool = False, kappa_gradient_source: str = "numerical",
                      systems: Optional[List[LocalSystem]] = None) -> StencilSet:
    """
    Rows of ∇_T·(κ̂_RT ∇_T u).

    Scalar κ: targets κ_i Δm + ∇κ_i·∇m with ∇κ_i = κ_i ∇ log κ_i. Tensor κ:
    κ̂_RT is the tangent block of R κ Rᵀ and its divergence is taken
    numerically. In jump mode the rows also satisfy
        Σ c/κ_j = -Δ_M log κ,  Σ c δs/κ_j = -∂_s log κ,  Σ c δs²/κ_j = 2
    as hard constraints, with s along ∇_M log κ. The jump conditions take
    precedence: monomial conditions they already fix are dropped, and on
    supports with uniform κ the rows are the plain diffusion rows.

    Raises:
        NonSPDKappa: κ not positive (definite)
        InvalidParameter: jump mode with tensor κ
        SingularSystem: rank-deficient neighborhood
    """
    _check_sizes(projections, frames)
    if jump_mode and kappa.is_tensor:
        raise InvalidParameter("jump mode requires scalar κ")
    if len(kappa.kappa) != len(projections):
        raise InvalidParameter("κ must be given at every point", n_kappa=len(kappa.kappa))

    start = time.time()
    systems = systems or factorize(projections, basis, weights)
    k = basis.dim

    if kappa.is_tensor:
        grads = surface_gradient(None, frames, projections, basis, weights, systems)
        n = len(grads)
        # ambient surface divergence of κ, row by row
        divergence = np.zeros((len(projections), n))
        for e in range(n):
            divergence[:, e] = sum(grads[c].apply(kappa.kappa[:, c, e]) for c in range(n))
    else:
        log_gradient, log_laplacian = _log_kappa_derivatives(kappa, frames, projections, basis, weights,
                                                             systems, kappa_gradient_source)

    coefficients, targets = [], np.empty((len(projections), basis.count))
    extra_columns, extra_targets = ([], np.empty((len(projections), 3))) if jump_mode else (None, None)
    degenerate = dropped = replaced = mixed = 0
    for i, (p, frame, system) in enumerate(zip(projections, frames, systems)):
        tangents = frame.tangents
        if kappa.is_tensor:
            block = tangents @ kappa.kappa[i] @ tangents.T
            if np.any(np.linalg.eigvalsh(block) <= 0):
                raise NonSPDKappa("tangential κ block is not positive definite", point=i)
            target = _diffusion_target(basis, block, tangents @ divergence[i])
        else:
            kappa_i = kappa.kappa[i]
            log_grad_t = tangents @ log_gradient[i]
            target = _diffusion_target(basis, kappa_i * np.eye(k), kappa_i * log_grad_t)
        targets[i] = target
        scaled_target = scale_rhs(basis, p.h, target)

        if not jump_mode:
            coefficients.append(system.solve(scaled_target))
            continue

        kappa_j = kappa.kappa[p.members]
        grad_norm = float(np.linalg.norm(log_grad_t))
        if grad_norm * p.h < JUMP_GRADIENT_TOL:
            degenerate += 1
            direction = np.eye(k)[0]
            conditions = np.array([0.0, 0.0, 2.0])
            active = [0, 2]
        else:
            direction = log_grad_t / grad_norm
            conditions = np.array([-log_laplacian[i], -grad_norm, 2.0])
            active = [0, 1, 2]
        ds = p.tangential_offsets @ direction
        extra_columns.append(np.column_stack([1.0 / kappa_j, ds / kappa_j, ds ** 2 / kappa_j]))
        extra_targets[i] = conditions

        if np.ptp(kappa_j) <= JUMP_UNIFORM_TOL * kappa_i:
            coefficients.append(system.solve(scaled_target))
            continue
        row, n_dropped, n_replaced = _jump_row(p, system, basis, kappa_i, kappa_j, direction, log_grad_t,
                                               conditions, active)
        dropped += n_dropped
        replaced += n_replaced
        mixed += 1
        coefficients.append(row)

    if degenerate:
        logger.info("jump_conditions_degenerate", points=degenerate,
                    note="vanishing ∇ log κ, δs condition skipped")
    if jump_mode:
        logger.info("jump_conditions_dropped", count=dropped, monomials_replaced=replaced, jump_rows=mixed)
    kind = OperatorKind.DIFFUSION_JUMP if jump_mode else OperatorKind.DIFFUSION
    logger.debug("stencils_built", kind=kind.value, n_points=len(projections), seconds=time.time() - start)
    return StencilSet(kind=kind, members=[p.members for p in projections], coefficients=coefficients,
                      targets=targets, projections=projections, basis=basis,
                      extra_columns=extra_columns, extra_targets=extra_targets)


def _combine(grad_stencils: Sequence[StencilSet], factors: np.ndarray, kind: OperatorKind) -> StencilSet:
    """Row i = Σ_a factors[i, a] · G_a row i."""
    first = grad_stencils[0]
    coefficients = [sum(factors[i, a] * g.coefficients[i] for a, g in enumerate(grad_stencils))
                    for i in range(first.size)]
    targets = None
    if all(g.targets is not None for g in grad_stencils):
        targets = np.einsum("ia,aiq->iq", factors, np.stack([g.targets for g in grad_stencils]))
    return StencilSet(kind=kind, members=first.members, coefficients=coefficients, targets=targets,
                      projections=first.projections, basis=first.basis)


def _per_point(values: np.ndarray, grad_stencils: Sequence[StencilSet], name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    n_points, n = grad_stencils[0].size, len(grad_stencils)
    if values.shape == (n,):
        values = np.tile(values, (n_points, 1))
    if values.shape != (n_points, n):
        raise InvalidParameter(f"{name} must have shape (n,) or (N, n)", shape=values.shape)
    return values


def directional_stencil(grad_stencils: Sequence[StencilSet], direction: np.ndarray) -> StencilSet:
    """
    Rows ν·(c^{M,x}, c^{M,y}, c^{M,z}).

    `direction` is one unit vector or one per point; all-zero rows are
    allowed and give zero stencil rows.
    """
    direction = _per_point(direction, grad_stencils, "direction")
    lengths = np.linalg.norm(direction, axis=1)
    if np.any((lengths > 0) & (np.abs(lengths - 1.0) > 1e-8)):
        raise InvalidParameter("direction must have unit length")
    return _combine(grad_stencils, direction, OperatorKind.DIRECTIONAL)


def advection_stencil(grad_stencils: Sequence[StencilSet], velocity: np.ndarray) -> StencilSet:
    """Rows c^{v·∇_M} = Σ_a v_i^a c^{M,a}."""
    velocity = _per_point(velocity, grad_stencils, "velocity")
    return _combine(grad_stencils, velocity, OperatorKind.ADVECTION)
