"""
Cone sampler: rings of constant slant distance below the apex.
"""
import numpy as np

from .base import Surface, SurfaceKind, check_positive, check_range
from errors import InvalidParameter


class Cone(Surface):
    """Cone x² + y² = slope² z² for z in z_range (z ≤ 0, apex at the origin)."""

    kind = SurfaceKind.CONE
    closed = False

    def __init__(self, slope: float = 2.0 / 3.0, z_range=(-6.0, 0.0)):
        self.slope = check_positive("slope", slope)
        self.z_low, self.z_high = check_range("z_range", z_range)
        if self.z_high > 0:
            raise InvalidParameter("cone z_range must lie in z <= 0", z_high=self.z_high)
        # half-angle between axis and generator
        self.cos_alpha = 1.0 / np.sqrt(1.0 + self.slope ** 2)
        self.sin_alpha = self.slope * self.cos_alpha

    def _candidates(self, spacing, jitter, rng):
        s_min = -self.z_high / self.cos_alpha
        s_max = -self.z_low / self.cos_alpha
        n_rings = max(1, int(round((s_max - s_min) / spacing)))
        ring_step = (s_max - s_min) / n_rings
        apex_included = s_min == 0.0

        # rim (and truncation) rings first so thinning keeps them
        order = [n_rings] + ([] if apex_included else [0]) + [k for k in range(n_rings) if k > 0 or apex_included]
        blocks, flags = [], []
        for k in order:
            s = s_min + k * ring_step
            rho = s * self.sin_alpha
            boundary = k == n_rings or (k == 0 and not apex_included)
            if rho == 0.0:
                blocks.append(np.zeros((1, 3)))
                flags.append(np.zeros(1, dtype=bool))
                continue
            n_ring = max(3, int(round(2.0 * np.pi * rho / spacing)))
            angle_step = 2.0 * np.pi / n_ring
            theta = angle_step * (np.arange(n_ring) + rng.uniform())
            s_ring = np.full(n_ring, s)
            if jitter > 0:
                theta = theta + rng.uniform(-0.5, 0.5, size=n_ring) * jitter * angle_step
                if not boundary:
                    s_ring = s_ring + rng.uniform(-0.5, 0.5, size=n_ring) * jitter * ring_step
            rho_ring = s_ring * self.sin_alpha
            blocks.append(np.column_stack([rho_ring * np.cos(theta), rho_ring * np.sin(theta),
                                           -s_ring * self.cos_alpha]))
            flags.append(np.full(n_ring, boundary))

        return np.vstack(blocks), np.concatenate(flags)

    def residual(self, x):
        return np.hypot(x[:, 0], x[:, 1]) - self.slope * np.abs(x[:, 2])

    def normal(self, x):
        rho = np.hypot(x[:, 0], x[:, 1])
        safe = np.where(rho > 0, rho, 1.0)
        radial = np.where(rho[:, None] > 0, x[:, :2] / safe[:, None], 0.0)
        vec = np.column_stack([self.cos_alpha * radial, np.full(len(x), self.sin_alpha)])
        # the apex has no tangent plane; the axis direction is used there
        vec[rho == 0] = (0.0, 0.0, 1.0)
        return vec / np.linalg.norm(vec, axis=1)[:, None]

    def mean_curvature(self, x):
        rho = np.hypot(x[:, 0], x[:, 1])
        with np.errstate(divide="ignore"):
            return np.where(rho > 0, self.cos_alpha / np.where(rho > 0, rho, 1.0), np.inf)

    def describe(self):
        return f"cone(slope={self.slope:g}, z=[{self.z_low:g}, {self.z_high:g}])"
