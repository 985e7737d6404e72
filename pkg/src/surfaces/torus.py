"""
Torus sampler: rows of constant poloidal angle with arc-length spacing.
"""
import numpy as np

from .base import Surface, SurfaceKind, check_positive
from errors import InvalidParameter


class Torus(Surface):
    """Torus (R - sqrt(x²+y²))² + z² = r² about the z axis."""

    kind = SurfaceKind.TORUS

    def __init__(self, major_radius: float = 1.0, minor_radius: float = 1.0 / 3.0):
        self.major_radius = check_positive("major_radius", major_radius)
        self.minor_radius = check_positive("minor_radius", minor_radius)
        if self.minor_radius >= self.major_radius:
            raise InvalidParameter("minor radius must be smaller than major radius",
                                   major_radius=major_radius, minor_radius=minor_radius)

    def _candidates(self, spacing, jitter, rng):
        big, small = self.major_radius, self.minor_radius
        n_rows = max(3, int(round(2.0 * np.pi * small / spacing)))
        row_step = 2.0 * np.pi / n_rows

        blocks = []
        for row in range(n_rows):
            v0 = row * row_step
            n_cols = max(3, int(round(2.0 * np.pi * (big + small * np.cos(v0)) / spacing)))
            col_step = 2.0 * np.pi / n_cols
            u = col_step * (np.arange(n_cols) + rng.uniform())
            v = np.full(n_cols, v0)
            if jitter > 0:
                u = u + rng.uniform(-0.5, 0.5, size=n_cols) * jitter * col_step
                v = v + rng.uniform(-0.5, 0.5, size=n_cols) * jitter * row_step
            ring = big + small * np.cos(v)
            blocks.append(np.column_stack([ring * np.cos(u), ring * np.sin(u), small * np.sin(v)]))

        positions = np.vstack(blocks)
        return positions, np.zeros(len(positions), dtype=bool)

    def _tube(self, x):
        rho = np.hypot(x[:, 0], x[:, 1])
        return rho, rho - self.major_radius

    def residual(self, x):
        rho, offset = self._tube(x)
        return np.sqrt(offset ** 2 + x[:, 2] ** 2) - self.minor_radius

    def normal(self, x):
        rho, offset = self._tube(x)
        radial = x[:, :2] / rho[:, None]
        vec = np.column_stack([offset[:, None] * radial, x[:, 2]])
        return vec / np.linalg.norm(vec, axis=1)[:, None]

    def mean_curvature(self, x):
        rho, offset = self._tube(x)
        cos_v = offset / np.sqrt(offset ** 2 + x[:, 2] ** 2)
        return 1.0 / self.minor_radius + cos_v / rho

    def describe(self):
        return f"torus(R={self.major_radius:g}, r={self.minor_radius:g})"
