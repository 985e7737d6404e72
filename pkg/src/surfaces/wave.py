"""
Wave patch z = sin(2x) sin(y), sampled by Poisson-disk thinning.
"""
import numpy as np
import structlog

from .base import Surface, SurfaceKind, check_range, jittered

logger = structlog.get_logger()

# jitter floor of the interior candidate grid
MIN_CANDIDATE_JITTER = 0.5


class WavePatch(Surface):
    """
    Graph of sin(2x) sin(y) over a rectangle; boundary on all four edges.

    Interior candidates are jittered by at least MIN_CANDIDATE_JITTER whatever
    jitter the caller asks for; the rim stays on the edges.
    """

    kind = SurfaceKind.WAVE_PATCH
    closed = False
    # candidates per accepted point along one parameter direction
    oversampling = 3
    disk_fraction = 0.85

    def __init__(self, x_range=(0.0, 4.0 * np.pi), y_range=(0.0, 4.0 * np.pi)):
        self.x_range = check_range("x_range", x_range)
        self.y_range = check_range("y_range", y_range)

    @staticmethod
    def height(x, y):
        return np.sin(2.0 * x) * np.sin(y)

    def _lift(self, x, y):
        return np.column_stack([x, y, self.height(x, y)])

    def _thinning_radius(self, spacing, target_h):
        return self.disk_fraction * spacing

    def _candidates(self, spacing, jitter, rng):
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        step = spacing / self.oversampling
        nx = max(2, int(np.ceil((x1 - x0) / step)) + 1)
        ny = max(2, int(np.ceil((y1 - y0) / step)) + 1)
        xs, ys = np.linspace(x0, x1, nx), np.linspace(y0, y1, ny)

        # corners, then edges in order, so the greedy pass keeps the rim
        corners = self._lift(np.array([x0, x1, x0, x1]), np.array([y0, y0, y1, y1]))
        edges = np.vstack([
            self._lift(xs[1:-1], np.full(nx - 2, y0)),
            self._lift(xs[1:-1], np.full(nx - 2, y1)),
            self._lift(np.full(ny - 2, x0), ys[1:-1]),
            self._lift(np.full(ny - 2, x1), ys[1:-1]),
        ])

        used = max(jitter, MIN_CANDIDATE_JITTER)
        if used > jitter:
            logger.info("jitter_raised", surface=self.kind.value, requested=jitter, used=used)
        gx, gy = np.meshgrid(xs[1:-1], ys[1:-1], indexing="ij")
        gx = jittered(gx.ravel(), 0.5 * used * step, rng)
        gy = jittered(gy.ravel(), 0.5 * used * step, rng)
        gx = np.clip(gx, x0 + 0.5 * step, x1 - 0.5 * step)
        gy = np.clip(gy, y0 + 0.5 * step, y1 - 0.5 * step)
        interior = self._lift(gx, gy)[rng.permutation(len(gx))]

        positions = np.vstack([corners, edges, interior])
        is_boundary = np.zeros(len(positions), dtype=bool)
        is_boundary[:len(corners) + len(edges)] = True
        return positions, is_boundary

    def _slopes(self, x):
        px, py = x[:, 0], x[:, 1]
        fx = 2.0 * np.cos(2.0 * px) * np.sin(py)
        fy = np.sin(2.0 * px) * np.cos(py)
        fxx = -4.0 * np.sin(2.0 * px) * np.sin(py)
        fyy = -np.sin(2.0 * px) * np.sin(py)
        fxy = 2.0 * np.cos(2.0 * px) * np.cos(py)
        return fx, fy, fxx, fyy, fxy

    def residual(self, x):
        return x[:, 2] - self.height(x[:, 0], x[:, 1])

    def normal(self, x):
        fx, fy, *_ = self._slopes(x)
        vec = np.column_stack([-fx, -fy, np.ones(len(x))])
        return vec / np.linalg.norm(vec, axis=1)[:, None]

    def mean_curvature(self, x):
        fx, fy, fxx, fyy, fxy = self._slopes(x)
        w = np.sqrt(1.0 + fx ** 2 + fy ** 2)
        return -((1.0 + fy ** 2) * fxx - 2.0 * fx * fy * fxy + (1.0 + fx ** 2) * fyy) / w ** 3

    def describe(self):
        return f"wave(x={self.x_range}, y={self.y_range})"
