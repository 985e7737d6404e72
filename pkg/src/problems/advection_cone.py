"""
Advection of a bell around the cone x² + y² = 4z²/9, -6 ≤ z ≤ 0, by one full
rotation of v = (-y, x, 0). After t = 2π the exact solution equals the
initial condition.
"""
import numpy as np

from advection import AdvectionMode, build_scheme
from pointcloud import sample_surface
from surfaces import Cone
from timeint import TimeGrid, sdirk2
from .base import Benchmark, BenchmarkKind, LevelResult, Settings, discretize, relative_l2_error

BELL_CENTER = np.array([2.0, 0.0, -3.0])
BELL_RADIUS = 5.0
DEFAULT_DT = 0.02


def initial_condition(x: np.ndarray) -> np.ndarray:
    """(exp(-|x - x0|²) - e^{-25}) / (1 - e^{-25}) inside the cutoff radius, zero elsewhere."""
    squared = np.sum((x - BELL_CENTER) ** 2, axis=1)
    floor = np.exp(-BELL_RADIUS ** 2)
    bell = (np.exp(-squared) - floor) / (1.0 - floor)
    return np.where(squared < BELL_RADIUS ** 2, bell, 0.0)


def rotation_velocity(x: np.ndarray) -> np.ndarray:
    return np.column_stack([-x[:, 1], x[:, 0], np.zeros(len(x))])


class AdvectionCone(Benchmark):
    """
    One rotation with SDIRK2 in time; errors and peak decay against the initial bell.

    `dt_policy` is "fixed" (Δt = 0.02 unless --dt is given) or "h" (Δt = 0.1h).
    """

    kind = BenchmarkKind.ADVECTION_CONE
    default_h = 0.6
    refinement = 2.0
    t_end = 2.0 * np.pi

    def __init__(self, mode: str = "upwind", dt_policy: str = "fixed"):
        self.mode = AdvectionMode.parse(mode)
        self.dt_policy = dt_policy
        self.surface = Cone()

    @property
    def label(self) -> str:
        return f"{self.kind.value}-{self.mode.value}"

    def time_grid(self, h: float, settings: Settings) -> TimeGrid:
        if settings.dt:
            return TimeGrid.fixed(self.t_end, settings.dt)
        if self.dt_policy == "h":
            return TimeGrid.h_scaled(self.t_end, h, factor=0.1, power=1.0)
        return TimeGrid.fixed(self.t_end, DEFAULT_DT)

    def run_level(self, h: float, settings: Settings, resolution: int = 0) -> LevelResult:
        cloud = sample_surface(self.surface, h, self.jitter(settings), settings.seed + resolution)
        disc = discretize(cloud, settings)
        x = disc.cloud.positions
        scheme = build_scheme(x, disc.gradient, rotation_velocity(x), self.mode)
        grid = self.time_grid(h, settings)

        phi0 = initial_condition(x)
        trajectory = sdirk2(scheme.as_rhs(), phi0, grid, options=settings.solver_options(),
                            monitors={"peak": np.max, "minimum": np.min})
        final = trajectory.final
        peak_initial, peak_final = float(phi0.max()), float(final.max())
        return LevelResult(
            resolution=resolution, h=h, n_points=disc.n_points,
            eps2=relative_l2_error(final, phi0),
            iterations=trajectory.max_iterations,
            metrics={"dt": grid.dt, "steps": grid.n_steps, "peak_initial": peak_initial,
                     "peak_final": peak_final, "peak_error": abs(peak_initial - peak_final),
                     "undershoot": float(min(final.min(), 0.0))},
            monitors=trajectory.monitors,
            positions=x,
            fields={"phi": final, "phi_initial": phi0, "error": final - phi0},
        )
