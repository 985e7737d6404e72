"""
Flat rectangular patch z = 0, used for calibration runs.
"""
import numpy as np

from .base import Surface, SurfaceKind, check_range


class PlanePatch(Surface):
    """Rectangle [x0, x1] × [y0, y1] in the plane z = 0."""

    kind = SurfaceKind.PLANE
    closed = False

    def __init__(self, x_range=(0.0, 1.0), y_range=(0.0, 1.0)):
        self.x_range = check_range("x_range", x_range)
        self.y_range = check_range("y_range", y_range)

    def _candidates(self, spacing, jitter, rng):
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        nx = max(2, int(round((x1 - x0) / spacing)) + 1)
        ny = max(2, int(round((y1 - y0) / spacing)) + 1)
        xs, ys = np.linspace(x0, x1, nx), np.linspace(y0, y1, ny)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        gx, gy = gx.ravel(), gy.ravel()

        edge = (gx == x0) | (gx == x1) | (gy == y0) | (gy == y1)
        if jitter > 0:
            dx, dy = (x1 - x0) / (nx - 1), (y1 - y0) / (ny - 1)
            inner = ~edge
            gx[inner] += rng.uniform(-0.5, 0.5, size=inner.sum()) * jitter * dx
            gy[inner] += rng.uniform(-0.5, 0.5, size=inner.sum()) * jitter * dy

        positions = np.column_stack([gx, gy, np.zeros_like(gx)])
        order = np.concatenate([np.flatnonzero(edge), np.flatnonzero(~edge)])
        return positions[order], edge[order]

    def residual(self, x):
        return x[:, 2].copy()

    def normal(self, x):
        return np.tile([0.0, 0.0, 1.0], (len(x), 1))

    def mean_curvature(self, x):
        return np.zeros(len(x))

    def describe(self):
        return f"plane(x={self.x_range}, y={self.y_range})"
