"""
Upwind discretization of v·∇_M with optional MUSCL reconstruction.

Semi-discrete form:  dφ_i/dt = -2 Σ_{j≠i} c_ij (φ_ij - φ_i), where
φ_ij = ½[(1 + s_ij) φ⁺_ij + (1 - s_ij) φ⁻_ij] and s_ij = sign(δx_ij·v_i),
with sign(0) = +1.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import sparse

from errors import InvalidParameter
from stencils import StencilSet, advection_stencil
from timeint import LinearRhs

# |φ_j - φ_i| below this (relative) gives no MUSCL correction
FLAT_TOL = 1e-14


class AdvectionMode(Enum):
    PURE_UPWIND = "upwind"
    MUSCL_SUPERBEE = "muscl"
    CENTRAL = "central"

    @classmethod
    def parse(cls, value: Union[str, "AdvectionMode"]) -> "AdvectionMode":
        if isinstance(value, cls):
            return value
        aliases = {"upwind": cls.PURE_UPWIND, "pure_upwind": cls.PURE_UPWIND,
                   "muscl": cls.MUSCL_SUPERBEE, "muscl_superbee": cls.MUSCL_SUPERBEE,
                   "central": cls.CENTRAL}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise InvalidParameter(f"unknown advection mode '{value}'") from None


def superbee(r: np.ndarray) -> np.ndarray:
    """Ψ(r) = max(0, min(2r, 1), min(r, 2))."""
    r = np.asarray(r, dtype=float)
    return np.maximum(0.0, np.maximum(np.minimum(2.0 * r, 1.0), np.minimum(r, 2.0)))


@dataclass
class UpwindScheme:
    """Off-center pairs (i, j) of the advection stencil with their upwind signs."""
    mode: AdvectionMode
    stencil: StencilSet
    grad_stencils: Sequence[StencilSet]
    rows: np.ndarray
    cols: np.ndarray
    coefficients: np.ndarray
    signs: np.ndarray
    pair_offsets: np.ndarray
    limiter: Callable[[np.ndarray], np.ndarray] = superbee

    @property
    def size(self) -> int:
        return self.stencil.size

    def linear_operator(self) -> sparse.csr_matrix:
        """
        Matrix of the pure-upwind (or central) part of the right-hand side.

        Pure upwind only uses φ_j on pairs with s_ij = -1; MUSCL shares the
        same linear part, the remainder being `correction`.
        """
        n_points = self.size
        if self.mode is AdvectionMode.CENTRAL:
            weights = self.coefficients
        else:
            weights = self.coefficients * (1.0 - self.signs)
        off = sparse.csr_matrix((-weights, (self.rows, self.cols)), shape=(n_points, n_points))
        diagonal = np.bincount(self.rows, weights=weights, minlength=n_points)
        matrix = sparse.csr_matrix(off + sparse.diags(diagonal))
        matrix.sort_indices()
        return matrix

    def pair_values(self, phi: np.ndarray) -> np.ndarray:
        """φ_ij on every stored pair."""
        phi_i, phi_j = phi[self.rows], phi[self.cols]
        if self.mode is AdvectionMode.CENTRAL:
            return 0.5 * (phi_i + phi_j)
        plus, minus = phi_i.copy(), phi_j.copy()
        if self.mode is AdvectionMode.MUSCL_SUPERBEE:
            jump = phi_j - phi_i
            gradient = np.column_stack([g.apply(phi) for g in self.grad_stencils])
            flat = np.abs(jump) <= FLAT_TOL * (np.abs(phi_i) + np.abs(phi_j) + 1e-300)
            safe = np.where(flat, 1.0, jump)
            projected_i = np.einsum("pa,pa->p", gradient[self.rows], self.pair_offsets)
            projected_j = np.einsum("pa,pa->p", gradient[self.cols], self.pair_offsets)
            r_plus = (2.0 * projected_i - jump) / safe
            r_minus = (2.0 * projected_j - jump) / safe
            plus += np.where(flat, 0.0, 0.5 * self.limiter(r_plus) * jump)
            minus -= np.where(flat, 0.0, 0.5 * self.limiter(r_minus) * jump)
        return 0.5 * ((1.0 + self.signs) * plus + (1.0 - self.signs) * minus)

    def correction(self, phi: np.ndarray) -> np.ndarray:
        """rhs(φ) minus its linear part."""
        return rhs(self, phi) - self.linear_operator() @ phi

    def as_rhs(self) -> LinearRhs:
        """Linear part plus lagged reconstruction correction, for implicit integrators."""
        matrix = self.linear_operator()
        if self.mode is AdvectionMode.MUSCL_SUPERBEE:
            return LinearRhs(matrix=matrix, correction=lambda phi: rhs(self, phi) - matrix @ phi)
        return LinearRhs(matrix=matrix)


def build_scheme(positions: np.ndarray, grad_stencils: Sequence[StencilSet], velocity: np.ndarray,
                 mode: Union[str, AdvectionMode] = AdvectionMode.PURE_UPWIND,
                 limiter: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> UpwindScheme:
    """Advection rows c^{v·∇_M} and per-pair upwind data for velocity v (N, n)."""
    mode = AdvectionMode.parse(mode)
    velocity = np.asarray(velocity, dtype=float)
    stencil = advection_stencil(grad_stencils, velocity)

    rows, cols, coeffs = [], [], []
    for i, (members, c) in enumerate(zip(stencil.members, stencil.coefficients)):
        off = members != i
        rows.append(np.full(off.sum(), i, dtype=np.intp))
        cols.append(members[off])
        coeffs.append(c[off])
    rows, cols, coeffs = np.concatenate(rows), np.concatenate(cols), np.concatenate(coeffs)
    pair_offsets = positions[cols] - positions[rows]
    signs = np.where(np.einsum("pa,pa->p", pair_offsets, velocity[rows]) >= 0.0, 1.0, -1.0)

    return UpwindScheme(mode=mode, stencil=stencil, grad_stencils=grad_stencils, rows=rows, cols=cols,
                        coefficients=coeffs, signs=signs, pair_offsets=pair_offsets,
                        limiter=limiter or superbee)


def rhs(scheme: UpwindScheme, phi: np.ndarray) -> np.ndarray:
    """dφ/dt = -2 Σ_{j≠i} c_ij (φ_ij - φ_i)."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (scheme.size,):
        raise InvalidParameter("φ must have one value per point", shape=phi.shape)
    contributions = scheme.coefficients * (scheme.pair_values(phi) - phi[scheme.rows])
    return -2.0 * np.bincount(scheme.rows, weights=contributions, minlength=scheme.size)
