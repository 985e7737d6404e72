"""
Calibration case on the flat patch [0, 1]²: Δu = 0 with exact u = eˣ sin y.
"""
import numpy as np

from pointcloud import sample_surface
from sparse import BoundaryCondition, assemble, bicgstab
from surfaces import PlanePatch
from .base import Benchmark, BenchmarkKind, Discretization, LevelResult, Settings, discretize, relative_l2_error


def exact_solution(x: np.ndarray) -> np.ndarray:
    return np.exp(x[:, 0]) * np.sin(x[:, 1])


def exact_gradient(x: np.ndarray) -> np.ndarray:
    return np.column_stack([np.exp(x[:, 0]) * np.sin(x[:, 1]), np.exp(x[:, 0]) * np.cos(x[:, 1]),
                            np.zeros(len(x))])


class FlatPoisson(Benchmark):
    """Dirichlet data on the whole rim, or Neumann on the y-edges when `neumann` is set."""

    kind = BenchmarkKind.FLAT_POISSON
    default_h = 0.12

    def __init__(self, neumann: bool = False):
        self.neumann = neumann
        self.surface = PlanePatch()

    @property
    def label(self) -> str:
        return f"{self.kind.value}-neumann" if self.neumann else self.kind.value

    def boundary_conditions(self, disc: Discretization):
        cloud = disc.cloud
        x = cloud.positions
        boundary = np.flatnonzero(cloud.is_boundary)
        if not self.neumann:
            return [BoundaryCondition.dirichlet(boundary, exact_solution(x[boundary]))]

        (x0, x1), (y0, y1) = self.surface.x_range, self.surface.y_range
        on_x_end = np.isclose(x[boundary, 0], x0) | np.isclose(x[boundary, 0], x1)
        dirichlet, sides = boundary[on_x_end], boundary[~on_x_end]
        # outward ν = ∓ŷ on y = y0 and y = y1
        outward = np.where(np.isclose(x[sides, 1], y0), -1.0, 1.0)
        directions = np.zeros((len(sides), 3))
        directions[:, 1] = outward
        values = np.einsum("pa,pa->p", exact_gradient(x[sides]), directions)
        return [BoundaryCondition.dirichlet(dirichlet, exact_solution(x[dirichlet])),
                BoundaryCondition.neumann(sides, values, disc.gradient, directions)]

    def run_level(self, h: float, settings: Settings, resolution: int = 0) -> LevelResult:
        cloud = sample_surface(self.surface, h, self.jitter(settings), settings.seed + resolution)
        disc = discretize(cloud, settings)
        system = assemble(disc.laplacian, self.boundary_conditions(disc), np.zeros(disc.n_points),
                          is_boundary=disc.cloud.is_boundary)
        u, stats = bicgstab(system.matrix, system.rhs, tol=settings.tol, max_iter=settings.max_iter)
        exact = exact_solution(disc.cloud.positions)
        return LevelResult(
            resolution=resolution, h=h, n_points=disc.n_points,
            eps2=relative_l2_error(u, exact), iterations=stats.iterations,
            metrics={"restarts": stats.restarts},
            positions=disc.cloud.positions,
            fields={"u": u, "u_exact": exact, "error": u - exact},
            systems={self.label: system},
        )
