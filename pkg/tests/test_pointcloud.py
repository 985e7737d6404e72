"""
Unit tests for point clouds, neighborhoods, spacing checks and the cloud file format.
"""
import unittest
import tempfile
from pathlib import Path
import sys

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from errors import CloudFormatError, EmptyCloud, InsufficientNeighbors, InvalidParameter
from pointcloud import (
    NeighborStrategy,
    PointCloud,
    build_neighborhoods,
    read_cloud,
    sample_surface,
    validate_spacing,
    with_support_radii,
    write_cloud,
)


def grid_cloud(n: int = 11, spacing: float = 0.1, hole: bool = False) -> PointCloud:
    ticks = np.arange(n) * spacing
    gx, gy = np.meshgrid(ticks, ticks, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    if hole:
        center = ticks[n // 2]
        keep = np.max(np.abs(points[:, :2] - center), axis=1) > 1.5 * spacing
        points = points[keep]
    edge = np.isclose(points[:, 0], 0) | np.isclose(points[:, 1], 0) \
        | np.isclose(points[:, 0], ticks[-1]) | np.isclose(points[:, 1], ticks[-1])
    return PointCloud(positions=points, smoothing_length=spacing / 0.3, is_boundary=edge, manifold_dim=2)


class TestPointCloud(unittest.TestCase):
    """Construction and validation of PointCloud."""

    def test_broadcast_and_read_only(self):
        cloud = PointCloud(positions=np.eye(3), smoothing_length=0.5, is_boundary=False, manifold_dim=2)
        self.assertEqual(cloud.size, 3)
        self.assertEqual(len(cloud), 3)
        self.assertEqual(cloud.embedding_dim, 3)
        np.testing.assert_array_equal(cloud.smoothing_length, 0.5)
        self.assertFalse(cloud.positions.flags.writeable)
        with self.assertRaises(ValueError):
            cloud.positions[0, 0] = 1.0

    def test_empty(self):
        with self.assertRaises(EmptyCloud):
            PointCloud(positions=np.zeros((0, 3)), smoothing_length=1.0, is_boundary=False, manifold_dim=2)

    def test_invalid(self):
        with self.assertRaises(InvalidParameter):
            PointCloud(positions=np.eye(3), smoothing_length=1.0, is_boundary=False, manifold_dim=3)
        with self.assertRaises(InvalidParameter):
            PointCloud(positions=np.eye(3), smoothing_length=-1.0, is_boundary=False, manifold_dim=2)
        with self.assertRaises(InvalidParameter):
            PointCloud(positions=np.array([[np.nan, 0.0, 0.0]]), smoothing_length=1.0, is_boundary=False,
                       manifold_dim=2)


class TestSampling(unittest.TestCase):

    def test_deterministic_per_seed(self):
        first = sample_surface("torus", 0.4, jitter=0.5, seed=11)
        second = sample_surface("torus", 0.4, jitter=0.5, seed=11)
        other = sample_surface("torus", 0.4, jitter=0.5, seed=12)
        np.testing.assert_array_equal(first.positions, second.positions)
        self.assertFalse(np.array_equal(first.positions, other.positions))

    def test_cloud_metadata(self):
        cloud = sample_surface("circle", 0.05)
        self.assertEqual(cloud.manifold_dim, 1)
        self.assertEqual(cloud.embedding_dim, 2)
        self.assertIsNotNone(cloud.surface)
        np.testing.assert_array_equal(cloud.smoothing_length, 0.05)


class TestNeighborhoods(unittest.TestCase):
    """kNN and radius supports."""

    def setUp(self):
        self.cloud = grid_cloud()

    def test_knn(self):
        hoods = build_neighborhoods(self.cloud, "knn:9")
        for hood in hoods:
            self.assertEqual(len(hood), 9)
            self.assertEqual(hood.members[0], hood.center)
            distances = np.linalg.norm(self.cloud.positions[hood.members] - self.cloud.positions[hood.center],
                                       axis=1)
            self.assertAlmostEqual(hood.h, distances.max())

    def test_radius(self):
        hoods = build_neighborhoods(self.cloud, NeighborStrategy(kind="radius"))
        center = 5 * 11 + 5
        hood = hoods[center]
        self.assertEqual(hood.members[0], center)
        distances = np.linalg.norm(self.cloud.positions[hood.members] - self.cloud.positions[center], axis=1)
        self.assertTrue(np.all(distances <= self.cloud.smoothing_length[center] + 1e-12))
        self.assertEqual(len(hood), len(set(hood.members.tolist())))

    def test_support_radii(self):
        hoods = build_neighborhoods(self.cloud, "knn:12")
        updated = with_support_radii(self.cloud, hoods)
        np.testing.assert_allclose(updated.smoothing_length, [hood.h for hood in hoods])
        np.testing.assert_array_equal(updated.is_boundary, self.cloud.is_boundary)

    def test_errors(self):
        with self.assertRaises(InvalidParameter):
            build_neighborhoods(self.cloud, "knn:1000")
        with self.assertRaises(InvalidParameter):
            NeighborStrategy.parse("delaunay")
        with self.assertRaises(InsufficientNeighbors):
            build_neighborhoods(self.cloud, "knn:4", required=6)

    def test_parse(self):
        self.assertEqual(NeighborStrategy.parse("KNN:20"), NeighborStrategy(kind="knn", k_nn=20))
        self.assertEqual(NeighborStrategy.parse("radius").kind, "radius")


class TestSpacing(unittest.TestCase):
    """r_min separation and r_max hole detection."""

    def test_regular_grid_passes(self):
        report = validate_spacing(grid_cloud())
        self.assertTrue(report.ok)

    def test_hole_reported(self):
        report = validate_spacing(grid_cloud(hole=True))
        self.assertFalse(report.ok)
        self.assertGreater(len(report.hole_points), 0)
        self.assertEqual(report.close_pairs, [])

    def test_close_pair_reported(self):
        cloud = grid_cloud()
        positions = np.vstack([cloud.positions, cloud.positions[60] + [1e-3, 0.0, 0.0]])
        crowded = PointCloud(positions=positions, smoothing_length=cloud.smoothing_length[0],
                             is_boundary=np.append(cloud.is_boundary, False), manifold_dim=2)
        report = validate_spacing(crowded)
        self.assertIn((60, len(positions) - 1), report.close_pairs)

    def test_sampled_clouds_respect_r_min(self):
        for name in ("sphere", "wave", "cone"):
            with self.subTest(surface=name):
                h = {"sphere": 0.4, "wave": 0.8, "cone": 1.5}[name]
                report = validate_spacing(sample_surface(name, h, jitter=0.5, seed=2))
                self.assertEqual(report.close_pairs, [])


class TestCloudFile(unittest.TestCase):
    """The plain-text cloud format."""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.path = Path(self.temp_dir.name) / "cloud.txt"

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_write_then_read(self):
        cloud = sample_surface("plane", 0.4, jitter=0.3, seed=5)
        write_cloud(cloud, self.path)
        header = self.path.read_text(encoding="ascii").splitlines()[0]
        self.assertEqual(header, f"gfdm-cloud v1 n=3 k=2 N={cloud.size}")
        loaded = read_cloud(self.path)
        np.testing.assert_array_equal(loaded.positions, cloud.positions)
        np.testing.assert_array_equal(loaded.is_boundary, cloud.is_boundary)
        self.assertEqual(loaded.manifold_dim, 2)
        self.assertIsNone(loaded.surface)

    def test_bad_header(self):
        self.path.write_text("points\n0 0 0 1 0\n", encoding="ascii")
        with self.assertRaises(CloudFormatError):
            read_cloud(self.path)

    def test_count_mismatch(self):
        self.path.write_text("gfdm-cloud v1 n=3 k=2 N=2\n0 0 0 1 0\n", encoding="ascii")
        with self.assertRaises(CloudFormatError):
            read_cloud(self.path)

    def test_missing_boundary_flag(self):
        self.path.write_text("gfdm-cloud v1 n=3 k=2 N=1\n0 0 0 1\n", encoding="ascii")
        with self.assertRaises(CloudFormatError):
            read_cloud(self.path)

    def test_bad_boundary_flag(self):
        self.path.write_text("gfdm-cloud v1 n=3 k=2 N=1\n0 0 0 1 2\n", encoding="ascii")
        with self.assertRaises(CloudFormatError):
            read_cloud(self.path)


if __name__ == '__main__':
    unittest.main()
