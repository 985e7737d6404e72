"""
Elliptic problem ∇_M·(η ∇_M φ) = 0 on the wave patch with four strips of
piecewise constant η along x.

φ = 0 at x = 0, φ = 1 at x = 4π, ŷ·∇_M φ = 0 on the y-edges. The result is
compared with the 1D flux-continuity profile, whose slopes are C/η_s with
C = 1 / (w Σ 1/η_s) for strips of width w.
"""
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import structlog

from pointcloud import sample_surface
from sparse import BoundaryCondition, SparseSystem, assemble, bicgstab
from stencils import DiffusionField, surface_diffusion
from surfaces import WavePatch
from .base import BenchmarkKind, Discretization, FieldBenchmark, FieldReport, Settings, discretize, relative_l2_error

logger = structlog.get_logger()

STRIP_ETA = (1e4, 1.0, 1e2, 1.0)
# the strong contrast needs far more iterations than the diffusion benchmarks
MAX_ITER_FLOOR = 20000
Y_DIRECTION = np.array([0.0, 1.0, 0.0])


def strip_edges(x_range: Tuple[float, float], n_strips: int) -> np.ndarray:
    return np.linspace(x_range[0], x_range[1], n_strips + 1)


def strip_index(x: np.ndarray, x_range: Tuple[float, float], n_strips: int) -> np.ndarray:
    """Strip of every x coordinate; interface points belong to the strip on their right."""
    edges = strip_edges(x_range, n_strips)
    return np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_strips - 1)


def oracle_slopes(eta: Sequence[float], x_range: Tuple[float, float]) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    width = (x_range[1] - x_range[0]) / len(eta)
    flux = 1.0 / (width * np.sum(1.0 / eta))
    return flux / eta


def oracle_profile(x: np.ndarray, eta: Sequence[float], x_range: Tuple[float, float]) -> np.ndarray:
    """Piecewise linear φ(x) from 0 at the left end to 1 at the right end."""
    slopes = oracle_slopes(eta, x_range)
    edges = strip_edges(x_range, len(slopes))
    # φ at the left edge of every strip
    offsets = np.concatenate([[0.0], np.cumsum(slopes * np.diff(edges))])[:-1]
    idx = strip_index(x, x_range, len(slopes))
    return offsets[idx] + slopes[idx] * (x - edges[idx])


def _bins(x: np.ndarray, x_range: Tuple[float, float], n_bins: int) -> np.ndarray:
    edges = np.linspace(x_range[0], x_range[1], n_bins + 1)
    return np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_bins - 1)


def oscillation_indicator(x: np.ndarray, residual: np.ndarray, x_range: Tuple[float, float],
                          n_bins: int) -> float:
    """Total variation along x of the bin-averaged residual."""
    bins = _bins(x, x_range, n_bins)
    counts = np.bincount(bins, minlength=n_bins)
    sums = np.bincount(bins, weights=residual, minlength=n_bins)
    means = sums[counts > 0] / counts[counts > 0]
    return float(np.abs(np.diff(means)).sum())


def y_spread(x: np.ndarray, phi: np.ndarray, x_range: Tuple[float, float], n_bins: int) -> float:
    """Largest (max - min) of φ over the points of one x-bin."""
    bins = _bins(x, x_range, n_bins)
    spread = 0.0
    for b in np.unique(bins):
        values = phi[bins == b]
        spread = max(spread, float(values.max() - values.min()))
    return spread


def fit_strip_slopes(x: np.ndarray, phi: np.ndarray, x_range: Tuple[float, float], n_strips: int,
                     margin: float) -> np.ndarray:
    """Least-squares slope of φ against x in every strip, ignoring points within `margin` of an interface."""
    edges = strip_edges(x_range, n_strips)
    slopes = np.full(n_strips, np.nan)
    for s in range(n_strips):
        inside = (x > edges[s] + margin) & (x < edges[s + 1] - margin)
        if np.count_nonzero(inside) >= 2 and np.ptp(x[inside]) > 0:
            slopes[s] = np.polyfit(x[inside], phi[inside], 1)[0]
    return slopes


class FourStrip(FieldBenchmark):
    """Four-strip contrast problem solved with jump-aware diffusion stencils."""

    kind = BenchmarkKind.FOUR_STRIP
    default_h = 0.42

    def __init__(self, eta: Sequence[float] = STRIP_ETA, jump: bool = True, compare: bool = True):
        self.eta = np.asarray(eta, dtype=float)
        self.jump = jump
        self.compare = compare
        self.surface = WavePatch()

    @property
    def label(self) -> str:
        return self.kind.value if self.jump else f"{self.kind.value}-nojump"

    def boundary_conditions(self, disc: Discretization) -> Tuple[BoundaryCondition, ...]:
        """Dirichlet on both x-ends (corners included), Neumann along ŷ on the y-edges."""
        cloud = disc.cloud
        x = cloud.positions[:, 0]
        x0, x1 = self.surface.x_range
        atol = 1e-9 * (x1 - x0)
        left = np.flatnonzero(cloud.is_boundary & np.isclose(x, x0, atol=atol))
        right = np.flatnonzero(cloud.is_boundary & np.isclose(x, x1, atol=atol))
        ends = np.zeros(cloud.size, dtype=bool)
        ends[left] = ends[right] = True
        sides = np.flatnonzero(cloud.is_boundary & ~ends)
        return (
            BoundaryCondition.dirichlet(left, 0.0),
            BoundaryCondition.dirichlet(right, 1.0),
            BoundaryCondition.neumann(sides, 0.0, disc.gradient, np.tile(Y_DIRECTION, (len(sides), 1))),
        )

    def solve_field(self, disc: Discretization, eta: np.ndarray, jump: bool,
                    settings: Settings) -> Tuple[np.ndarray, int, SparseSystem]:
        """Solve for one η distribution on an existing discretization."""
        x = disc.cloud.positions[:, 0]
        kappa = DiffusionField(kappa=eta[strip_index(x, self.surface.x_range, len(eta))])
        operator = surface_diffusion(disc.projections, disc.frames, disc.basis, disc.weights, kappa,
                                     jump_mode=jump, systems=disc.systems)
        system = assemble(operator, self.boundary_conditions(disc), np.zeros(disc.n_points),
                          is_boundary=disc.cloud.is_boundary)
        phi, stats = bicgstab(system.matrix, system.rhs, tol=settings.tol,
                              max_iter=max(settings.max_iter, MAX_ITER_FLOOR), diagonal_scaling=True)
        return phi, stats.iterations, system

    def solve(self, h: float, settings: Settings) -> FieldReport:
        cloud = sample_surface(self.surface, h, self.jitter(settings), settings.seed)
        disc = discretize(cloud, settings)
        x = disc.cloud.positions[:, 0]
        x_range = self.surface.x_range
        n_strips = len(self.eta)
        n_bins = max(4 * n_strips, int(round((x_range[1] - x_range[0]) / h)))

        phi, iterations, system = self.solve_field(disc, self.eta, self.jump, settings)
        oracle = oracle_profile(x, self.eta, x_range)
        residual = phi - oracle
        fitted = fit_strip_slopes(x, phi, x_range, n_strips, margin=h)
        expected = oracle_slopes(self.eta, x_range)
        slope_errors = np.abs(fitted - expected) / expected

        metrics: Dict[str, float] = {
            "eps2_oracle": relative_l2_error(phi, oracle),
            "oscillation": oscillation_indicator(x, residual, x_range, n_bins),
            "y_spread": y_spread(x, phi, x_range, n_bins),
            "max_slope_error": float(np.nanmax(slope_errors)),
            "monotone": float(_is_monotone(x, phi, x_range, n_bins)),
        }
        for s in range(n_strips):
            metrics[f"slope_{s + 1}"] = float(fitted[s])
            metrics[f"slope_{s + 1}_oracle"] = float(expected[s])

        fields = {"phi": phi, "phi_oracle": oracle, "residual": residual,
                  "eta": self.eta[strip_index(x, x_range, n_strips)]}
        if self.compare:
            iterations = max(iterations, self._compare(disc, settings, x, n_bins, metrics, fields))

        logger.info("four_strip_solved", n_points=disc.n_points, jump=self.jump, **{
            key: metrics[key] for key in ("oscillation", "y_spread", "max_slope_error")})
        return FieldReport(name=self.kind.value, label=self.label, h=h, n_points=disc.n_points,
                           iterations=iterations, metrics=metrics, positions=disc.cloud.positions,
                           fields=fields, systems={"four-strip": system})

    def _compare(self, disc: Discretization, settings: Settings, x: np.ndarray, n_bins: int,
                 metrics: Dict[str, float], fields: Dict[str, np.ndarray]) -> int:
        """Rerun with the jump conditions toggled and with homogeneous η on the same cloud."""
        x_range = self.surface.x_range
        other, other_iterations, _ = self.solve_field(disc, self.eta, not self.jump, settings)
        other_residual = other - oracle_profile(x, self.eta, x_range)
        key = "oscillation_nojump" if self.jump else "oscillation_jump"
        metrics[key] = oscillation_indicator(x, other_residual, x_range, n_bins)
        fields["phi_nojump" if self.jump else "phi_jump"] = other

        homogeneous, homogeneous_iterations, _ = self.solve_field(disc, np.ones_like(self.eta), self.jump,
                                                                  settings)
        metrics["y_spread_homogeneous"] = y_spread(x, homogeneous, x_range, n_bins)
        metrics["spread_ratio"] = metrics["y_spread"] / max(metrics["y_spread_homogeneous"], 1e-300)
        return max(other_iterations, homogeneous_iterations)


def _is_monotone(x: np.ndarray, phi: np.ndarray, x_range: Tuple[float, float], n_bins: int,
                 tol: Optional[float] = None) -> bool:
    """Bin-averaged φ is nondecreasing in x, up to `tol`."""
    bins = _bins(x, x_range, n_bins)
    counts = np.bincount(bins, minlength=n_bins)
    sums = np.bincount(bins, weights=phi, minlength=n_bins)
    means = sums[counts > 0] / counts[counts > 0]
    tol = 1e-6 if tol is None else tol
    return bool(np.all(np.diff(means) >= -tol))
