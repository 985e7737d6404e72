"""
Unit tests for the analytic sampling surfaces.
"""
import unittest
from pathlib import Path
import sys

from unittest.mock import patch

import numpy as np
from hypothesis import given, settings, strategies as st
from scipy.spatial import cKDTree

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from errors import InvalidParameter
from surfaces import (
    Circle,
    Cone,
    PlanePatch,
    Sphere,
    SurfaceKind,
    Torus,
    WavePatch,
    ambient_surface_gradient,
    ambient_surface_laplacian,
    poisson_disk_thin,
)
from surfaces import get_surface, get_surface_by_name, list_supported_surfaces
from surfaces.wave import MIN_CANDIDATE_JITTER

SAMPLES = {
    "sphere": (Sphere(), 0.4),
    "torus": (Torus(), 0.3),
    "cone": (Cone(), 1.5),
    "wave": (WavePatch(x_range=(0.0, 3.0), y_range=(0.0, 3.0)), 0.6),
    "plane": (PlanePatch(), 0.3),
    "circle": (Circle(), 0.1),
}


def numerical_divergence(surface, x, step=1e-6):
    total = np.zeros(len(x))
    for axis in range(x.shape[1]):
        shift = np.zeros(x.shape[1])
        shift[axis] = step
        total += (surface.normal(x + shift)[:, axis] - surface.normal(x - shift)[:, axis]) / (2 * step)
    return total


class TestSampling(unittest.TestCase):
    """Sampled points lie on the surface with consistent normals and flags."""

    def test_points_on_surface(self):
        rng = np.random.default_rng(0)
        for name, (surface, h) in SAMPLES.items():
            with self.subTest(surface=name):
                sample = surface.sample(h, 0.3, rng)
                self.assertGreater(len(sample.positions), 10)
                self.assertEqual(sample.positions.shape[1], surface.embedding_dim)
                self.assertLess(np.abs(surface.residual(sample.positions)).max(), 1e-10)
                normals = surface.normal(sample.positions)
                np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0)

    def test_boundary_flags(self):
        rng = np.random.default_rng(1)
        for name, (surface, h) in SAMPLES.items():
            with self.subTest(surface=name):
                sample = surface.sample(h, 0.0, rng)
                self.assertEqual(bool(sample.is_boundary.any()), not surface.closed)

    def test_plane_rim(self):
        sample = PlanePatch().sample(0.3, 0.0, np.random.default_rng(2))
        x = sample.positions
        on_rim = np.isclose(x[:, 0], 0) | np.isclose(x[:, 0], 1) | np.isclose(x[:, 1], 0) | np.isclose(x[:, 1], 1)
        np.testing.assert_array_equal(on_rim, sample.is_boundary)

    def test_cone_rim_is_boundary(self):
        cone = Cone()
        sample = cone.sample(1.5, 0.0, np.random.default_rng(3))
        rim = np.isclose(sample.positions[:, 2], cone.z_low)
        self.assertTrue(rim.any())
        np.testing.assert_array_equal(sample.is_boundary, rim)

    def test_thinning_radius(self):
        for name, (surface, h) in SAMPLES.items():
            with self.subTest(surface=name):
                positions = surface.sample(h, 0.5, np.random.default_rng(4)).positions
                gaps, _ = cKDTree(positions).query(positions, k=2)
                self.assertGreaterEqual(gaps[:, 1].min(), surface._thinning_radius(surface.spacing_factor * h, h)
                                        * (1 - 1e-12))

    def test_invalid_arguments(self):
        with self.assertRaises(InvalidParameter):
            Sphere().sample(0.0, 0.0, np.random.default_rng(0))
        with self.assertRaises(InvalidParameter):
            Sphere().sample(0.3, 1.0, np.random.default_rng(0))
        with self.assertRaises(InvalidParameter):
            Torus(major_radius=1.0, minor_radius=2.0)
        with self.assertRaises(InvalidParameter):
            Cone(z_range=(-1.0, 1.0))
        with self.assertRaises(InvalidParameter):
            PlanePatch(x_range=(1.0, 0.0))

    def test_wave_jitter_floor_is_logged(self):
        surface = WavePatch(x_range=(0.0, 3.0), y_range=(0.0, 3.0))
        with patch("surfaces.wave.logger") as log:
            surface.sample(0.6, 0.1, np.random.default_rng(5))
        log.info.assert_called_once_with("jitter_raised", surface="wave", requested=0.1,
                                         used=MIN_CANDIDATE_JITTER)
        with patch("surfaces.wave.logger") as log:
            surface.sample(0.6, 0.7, np.random.default_rng(5))
        log.info.assert_not_called()


class TestPoissonDisk(unittest.TestCase):

    @given(st.integers(min_value=0, max_value=2**16), st.floats(min_value=0.05, max_value=0.5))
    @settings(max_examples=20, deadline=None)
    def test_minimum_separation(self, seed, radius):
        points = np.random.default_rng(seed).uniform(size=(200, 2))
        keep = poisson_disk_thin(points, radius)
        kept = points[keep]
        gaps = np.linalg.norm(kept[:, None, :] - kept[None, :, :], axis=2)
        np.fill_diagonal(gaps, np.inf)
        if len(kept) > 1:
            self.assertGreater(gaps.min(), radius)
        self.assertEqual(keep[0], 0)


class TestCurvature(unittest.TestCase):
    """mean_curvature equals the divergence of the normal field."""

    def test_matches_numerical_divergence(self):
        rng = np.random.default_rng(5)
        for name, (surface, h) in SAMPLES.items():
            with self.subTest(surface=name):
                x = surface.sample(h, 0.0, rng).positions
                if isinstance(surface, Cone):
                    x = x[np.hypot(x[:, 0], x[:, 1]) > 0.5]
                np.testing.assert_allclose(surface.mean_curvature(x), numerical_divergence(surface, x),
                                           rtol=1e-5, atol=1e-5)


class TestAmbientOperators(unittest.TestCase):

    def test_sphere_xy(self):
        x = Sphere().sample(0.5, 0.0, np.random.default_rng(6)).positions
        n_points = len(x)
        gradient = np.column_stack([x[:, 1], x[:, 0], np.zeros(n_points)])
        hessian = np.zeros((n_points, 3, 3))
        hessian[:, 0, 1] = hessian[:, 1, 0] = 1.0
        sphere = Sphere()
        laplacian = ambient_surface_laplacian(gradient, hessian, sphere.normal(x), sphere.mean_curvature(x))
        np.testing.assert_allclose(laplacian, -6.0 * x[:, 0] * x[:, 1], atol=1e-12)

    def test_tangential_gradient(self):
        x = Sphere().sample(0.5, 0.0, np.random.default_rng(7)).positions
        normal = Sphere().normal(x)
        tangential = ambient_surface_gradient(np.tile([0.0, 0.0, 1.0], (len(x), 1)), normal)
        np.testing.assert_allclose(np.einsum("pi,pi->p", tangential, normal), 0.0, atol=1e-12)


class TestSurfaceFactory(unittest.TestCase):

    def test_get_surface_by_name(self):
        self.assertIsInstance(get_surface_by_name("sphere"), Sphere)
        self.assertIsInstance(get_surface_by_name("flat"), PlanePatch)
        self.assertIsInstance(get_surface_by_name("wave"), WavePatch)
        self.assertIsInstance(get_surface(SurfaceKind.TORUS), Torus)
        self.assertEqual(get_surface_by_name("circle", radius=2.0).radius, 2.0)

    def test_unknown_surface(self):
        with self.assertRaises(InvalidParameter):
            get_surface_by_name("klein-bottle")

    def test_listing(self):
        kinds = {entry[0] for entry in list_supported_surfaces()}
        self.assertEqual(kinds, set(SurfaceKind))


if __name__ == '__main__':
    unittest.main()
