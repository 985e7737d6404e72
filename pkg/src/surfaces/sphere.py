"""
Sphere sampler: Fibonacci lattice with optional tangential jitter.
"""
import numpy as np

from .base import Surface, SurfaceKind, check_positive

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


class Sphere(Surface):
    """Sphere of given radius centred at the origin."""

    kind = SurfaceKind.SPHERE

    def __init__(self, radius: float = 1.0):
        self.radius = check_positive("radius", radius)

    def _candidates(self, spacing, jitter, rng):
        n_points = max(4, int(round(4.0 * np.pi * self.radius ** 2 / spacing ** 2)))
        index = np.arange(n_points) + 0.5
        z = 1.0 - 2.0 * index / n_points
        rho = np.sqrt(1.0 - z ** 2)
        phi = GOLDEN_ANGLE * np.arange(n_points)
        unit = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])

        if jitter > 0:
            # tangential displacement, then back onto the sphere
            step = rng.uniform(-1.0, 1.0, size=unit.shape) * (0.5 * jitter * spacing / self.radius)
            step -= np.einsum("pi,pi->p", step, unit)[:, None] * unit
            unit = unit + step
            unit /= np.linalg.norm(unit, axis=1)[:, None]

        return self.radius * unit, np.zeros(n_points, dtype=bool)

    def residual(self, x):
        return np.linalg.norm(x, axis=1) - self.radius

    def normal(self, x):
        return x / np.linalg.norm(x, axis=1)[:, None]

    def mean_curvature(self, x):
        return np.full(len(x), 2.0 / self.radius)

    def describe(self):
        return f"sphere(r={self.radius:g})"
