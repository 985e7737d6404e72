"""
Heat equation on the unit sphere, u0 = xy.
"""
from dataclasses import replace

import numpy as np

from pointcloud import sample_surface
from surfaces import Sphere
from timeint import TimeGrid, crank_nicolson
from .base import Benchmark, BenchmarkKind, LevelResult, Settings, discretize, relative_l2_error


class HeatSphere(Benchmark):
    """
    u_t = Δ_M u with exact solution exp(-6t)·xy, errors at t = 0.3.

    Δt = 0.1h² with h the mean support radius of the cloud, which is the
    largest neighbor distance rather than the sampler spacing.
    """

    kind = BenchmarkKind.HEAT_SPHERE
    default_h = 0.37
    default_jitter = 0.3
    t_end = 0.3

    def __init__(self, order: int = 2):
        self.order = order

    @property
    def label(self) -> str:
        return f"{self.kind.value}-p{self.order}"

    @staticmethod
    def exact(x: np.ndarray, t: float) -> np.ndarray:
        return np.exp(-6.0 * t) * x[:, 0] * x[:, 1]

    def run_level(self, h: float, settings: Settings, resolution: int = 0) -> LevelResult:
        settings = replace(settings, order=self.order)
        cloud = sample_surface(Sphere(1.0), h, self.jitter(settings), settings.seed + resolution)
        disc = discretize(cloud, settings)
        grid = (TimeGrid.fixed(self.t_end, settings.dt) if settings.dt
                else TimeGrid.h_scaled(self.t_end, disc.support_radius, factor=0.1, power=2.0))

        x = disc.cloud.positions
        trajectory = crank_nicolson(disc.laplacian, self.exact(x, 0.0), grid, options=settings.solver_options())
        exact = self.exact(x, grid.t_end)
        return LevelResult(
            resolution=resolution, h=h, n_points=disc.n_points,
            eps2=relative_l2_error(trajectory.final, exact),
            iterations=trajectory.max_iterations,
            metrics={"dt": grid.dt, "steps": grid.n_steps, "support_radius": disc.support_radius},
            positions=x,
            fields={"u": trajectory.final, "u_exact": exact, "error": trajectory.final - exact},
        )
