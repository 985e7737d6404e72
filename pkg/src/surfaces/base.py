"""
Base classes and helpers for analytic sampling surfaces.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from errors import InvalidParameter

# Point-cloud spacing conventions, in units of the smoothing length
R_MIN = 0.2
R_MAX = 0.45


class SurfaceKind(Enum):
    """Supported analytic geometries."""
    SPHERE = "sphere"
    TORUS = "torus"
    CONE = "cone"
    WAVE_PATCH = "wave"
    PLANE = "plane"
    CIRCLE = "circle"


@dataclass
class SurfaceSample:
    """Raw sampler output before it is wrapped into a PointCloud."""
    positions: np.ndarray
    is_boundary: np.ndarray


class Surface(ABC):
    """Abstract base class for an analytic k-manifold embedded in R^n."""

    kind: SurfaceKind
    manifold_dim: int = 2
    embedding_dim: int = 3
    closed: bool = True
    # sampler spacing = spacing_factor * target_h
    spacing_factor: float = 0.3

    def sample(self, target_h: float, jitter: float, rng: np.random.Generator) -> SurfaceSample:
        """
        Sample the surface with spacing tied to the smoothing length.

        Candidates closer than R_MIN * target_h are thinned greedily, earlier
        candidates (boundary points first) winning.
        """
        if not target_h > 0:
            raise InvalidParameter("target_h must be positive", target_h=target_h)
        if not 0 <= jitter < 1:
            raise InvalidParameter("jitter must lie in [0, 1)", jitter=jitter)

        spacing = self.spacing_factor * target_h
        positions, is_boundary = self._candidates(spacing, jitter, rng)
        keep = poisson_disk_thin(positions, self._thinning_radius(spacing, target_h))
        return SurfaceSample(positions=positions[keep], is_boundary=is_boundary[keep])

    def _thinning_radius(self, spacing: float, target_h: float) -> float:
        return R_MIN * target_h

    @abstractmethod
    def _candidates(self, spacing: float, jitter: float, rng: np.random.Generator):
        """Return (positions, is_boundary) candidates, boundary candidates first."""
        pass

    @abstractmethod
    def residual(self, x: np.ndarray) -> np.ndarray:
        """Implicit-equation residual, zero on the surface."""
        pass

    @abstractmethod
    def normal(self, x: np.ndarray) -> np.ndarray:
        """Analytic unit normal (outward for closed surfaces)."""
        pass

    @abstractmethod
    def mean_curvature(self, x: np.ndarray) -> np.ndarray:
        """Divergence of the unit normal field, i.e. the sum of principal curvatures."""
        pass

    def describe(self) -> str:
        return self.kind.value


def poisson_disk_thin(points: np.ndarray, radius: float) -> np.ndarray:
    """
    Greedy Poisson-disk selection in candidate order.

    Returns the sorted indices of accepted points; no two accepted points are
    closer than `radius`.
    """
    n_points = len(points)
    if n_points == 0 or radius <= 0:
        return np.arange(n_points)

    pairs = cKDTree(points).query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        return np.arange(n_points)

    first = pairs.min(axis=1)
    later = pairs.max(axis=1)
    order = np.argsort(first, kind="stable")
    first, later = first[order], later[order]
    indptr = np.searchsorted(first, np.arange(n_points + 1))

    alive = np.ones(n_points, dtype=bool)
    for i in range(n_points):
        if alive[i] and indptr[i] != indptr[i + 1]:
            alive[later[indptr[i]:indptr[i + 1]]] = False
    return np.flatnonzero(alive)


def ambient_surface_laplacian(gradient: np.ndarray, hessian: np.ndarray,
                              normal: np.ndarray, mean_curvature: np.ndarray) -> np.ndarray:
    """
    Exact Laplace-Beltrami of the restriction of an ambient function U.

    Uses  Δ_M U = ΔU − nᵀ(∇²U)n − H (n·∇U)  with H = div n.

    Args:
        gradient: (N, n) ambient gradient of U at the points
        hessian: (N, n, n) ambient Hessian of U
        normal: (N, n) unit normals
        mean_curvature: (N,) divergence of the normal field
    """
    trace = np.trace(hessian, axis1=1, axis2=2)
    normal_second = np.einsum("pi,pij,pj->p", normal, hessian, normal)
    normal_first = np.einsum("pi,pi->p", normal, gradient)
    return trace - normal_second - mean_curvature * normal_first


def ambient_surface_gradient(gradient: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Tangential projection P·∇U of an ambient gradient, for codimension one."""
    return gradient - np.einsum("pi,pi->p", normal, gradient)[:, None] * normal


def check_range(name: str, bounds, strict: bool = True) -> tuple:
    """Validate a (low, high) pair."""
    low, high = float(bounds[0]), float(bounds[1])
    if not (np.isfinite(low) and np.isfinite(high)) or (high <= low if strict else high < low):
        raise InvalidParameter(f"{name} must be a nonempty range", low=low, high=high)
    return low, high


def check_positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0 or not np.isfinite(value):
        raise InvalidParameter(f"{name} must be positive", value=value)
    return value


def jittered(values: np.ndarray, amplitude: float, rng: Optional[np.random.Generator]) -> np.ndarray:
    """Add uniform noise in [-amplitude, amplitude]."""
    if rng is None or amplitude == 0:
        return values
    return values + rng.uniform(-amplitude, amplitude, size=np.shape(values))
