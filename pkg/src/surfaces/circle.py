"""
Circle sampler: a closed curve in the plane.
"""
import numpy as np

from .base import Surface, SurfaceKind, check_positive


class Circle(Surface):
    """Circle of given radius centred at the origin of R^2."""

    kind = SurfaceKind.CIRCLE
    manifold_dim = 1
    embedding_dim = 2
    # 1D supports are small, so the arc spacing equals the smoothing length
    spacing_factor = 1.0

    def __init__(self, radius: float = 1.0):
        self.radius = check_positive("radius", radius)

    def _candidates(self, spacing, jitter, rng):
        n_points = max(3, int(round(2.0 * np.pi * self.radius / spacing)))
        step = 2.0 * np.pi / n_points
        theta = step * np.arange(n_points)
        if jitter > 0:
            theta = theta + rng.uniform(-0.5, 0.5, size=n_points) * jitter * step
        positions = self.radius * np.column_stack([np.cos(theta), np.sin(theta)])
        return positions, np.zeros(n_points, dtype=bool)

    def residual(self, x):
        return np.linalg.norm(x, axis=1) - self.radius

    def normal(self, x):
        return x / np.linalg.norm(x, axis=1)[:, None]

    def mean_curvature(self, x):
        return np.full(len(x), 1.0 / self.radius)

    def describe(self):
        return f"circle(r={self.radius:g})"
