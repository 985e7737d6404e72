"""
Unit tests for the benchmark problems and the convergence harness.
"""
import unittest
from pathlib import Path
import sys

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from errors import InvalidParameter, SingularSystem
from problems import (
    AdvectionCone,
    Benchmark,
    BenchmarkKind,
    BenchmarkReport,
    CahnHilliard,
    FlatPoisson,
    FourStrip,
    HeatSphere,
    LevelResult,
    Settings,
    TorusForced,
    relative_l2_error,
)
from problems import get_benchmark, get_benchmark_by_name, list_supported_benchmarks
from problems.advection_cone import BELL_CENTER, initial_condition, rotation_velocity
from problems.cahn_hilliard import double_well, double_well_derivative
from problems.four_strip import (
    STRIP_ETA,
    fit_strip_slopes,
    oracle_profile,
    oracle_slopes,
    oscillation_indicator,
    strip_index,
)
from problems.torus import exact_solution, exact_surface_laplacian, forcing
from surfaces import PlanePatch, Torus, ambient_surface_laplacian

FOUR_PI = (0.0, 4.0 * np.pi)


class FlakyBenchmark(Benchmark):
    """Fails on the middle resolution."""

    kind = BenchmarkKind.FLAT_POISSON
    default_h = 1.0

    def run_level(self, h, settings, resolution=0):
        if resolution == 1:
            raise SingularSystem("rank-deficient neighborhood", point=3)
        return LevelResult(resolution=resolution, h=h, n_points=10, eps2=h ** 2)


class TestHarness(unittest.TestCase):
    """Level bookkeeping, slopes and error capture."""

    def test_slope_of_quadratic_errors(self):
        levels = [LevelResult(resolution=i, h=h, eps2=3.0 * h ** 2) for i, h in enumerate([0.4, 0.2, 0.1])]
        report = BenchmarkReport(name="x", label="x", levels=levels)
        self.assertAlmostEqual(report.slope, 2.0)
        self.assertTrue(report.converged)

    def test_failed_level_is_recorded(self):
        report = FlakyBenchmark().run(Settings(), levels=3)
        self.assertEqual(len(report.levels), 3)
        failed = report.levels[1]
        self.assertFalse(failed.converged)
        self.assertEqual(failed.error_type, "SingularSystem")
        self.assertFalse(report.converged)
        self.assertTrue(np.isnan(report.slope))
        self.assertTrue(report.levels[2].converged)

    def test_resolutions(self):
        self.assertEqual(len(HeatSphere().resolutions(levels=4)), 4)
        hs = AdvectionCone().resolutions(1.2, 3)
        np.testing.assert_allclose(hs, [1.2, 0.6, 0.3])

    def test_default_jitter(self):
        self.assertEqual(HeatSphere().jitter(Settings()), 0.3)
        self.assertEqual(TorusForced().jitter(Settings()), 0.3)
        self.assertEqual(HeatSphere().jitter(Settings(jitter=0.0)), 0.0)
        self.assertEqual(FlatPoisson().jitter(Settings()), 0.0)

    def test_relative_error(self):
        self.assertEqual(relative_l2_error(np.ones(4), np.ones(4)), 0.0)
        self.assertAlmostEqual(relative_l2_error(np.array([1.1, 0.0]), np.array([1.0, 0.0])), 0.1)
        self.assertAlmostEqual(relative_l2_error(np.array([3.0, 4.0]), np.zeros(2)), 5.0)


class TestFactory(unittest.TestCase):

    def test_names_and_aliases(self):
        self.assertIsInstance(get_benchmark_by_name("heat"), HeatSphere)
        self.assertIsInstance(get_benchmark_by_name("torus", mode="neighbor"), TorusForced)
        self.assertIsInstance(get_benchmark_by_name("cone"), AdvectionCone)
        self.assertIsInstance(get_benchmark_by_name("ch"), CahnHilliard)
        self.assertIsInstance(get_benchmark(BenchmarkKind.FOUR_STRIP), FourStrip)
        self.assertIsInstance(get_benchmark_by_name("Flat-Poisson"), FlatPoisson)

    def test_unknown(self):
        with self.assertRaises(InvalidParameter):
            get_benchmark_by_name("navier-stokes")

    def test_listing_covers_kinds(self):
        self.assertEqual({entry[0] for entry in list_supported_benchmarks()}, set(BenchmarkKind))

    def test_labels(self):
        self.assertEqual(HeatSphere(order=3).label, "heat-sphere-p3")
        self.assertEqual(TorusForced("neighbor").label, "torus-neighbor")
        self.assertEqual(AdvectionCone("muscl").label, "advection-muscl")
        self.assertEqual(FourStrip(jump=False).label, "four-strip-nojump")
        self.assertEqual(FlatPoisson(neumann=True).label, "flat-poisson-neumann")


class TestHeatSphere(unittest.TestCase):

    def test_exact_solution(self):
        x = np.array([[1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0), 0.0]])
        self.assertAlmostEqual(HeatSphere.exact(x, 0.3)[0], 0.5 * np.exp(-1.8), places=12)
        self.assertAlmostEqual(HeatSphere.exact(x, 0.3)[0], 0.08265, places=4)

    def test_coarse_level(self):
        result = HeatSphere().run_level(0.6, Settings(dt=0.05))
        self.assertEqual(result.metrics["steps"], 6)
        self.assertLess(result.eps2, 0.2)
        self.assertGreater(result.n_points, 100)
        self.assertIn("error", result.fields)

    def test_default_levels_are_accurate(self):
        report = HeatSphere().run(Settings(), h0=0.6, levels=2)
        self.assertTrue(report.converged)
        for level in report.levels:
            self.assertLess(level.eps2, 1e-2)

    def test_second_order_at_small_clouds(self):
        report = HeatSphere().run(Settings(), h0=0.6, levels=3)
        self.assertGreater(report.slope, 1.5)

    def test_time_step_follows_support_radius(self):
        result = HeatSphere().run_level(0.6, Settings())
        dt, steps = result.metrics["dt"], result.metrics["steps"]
        self.assertAlmostEqual(dt * steps, HeatSphere.t_end, places=12)
        self.assertAlmostEqual(steps, round(HeatSphere.t_end / (0.1 * result.metrics["support_radius"] ** 2)))


class TestTorusSolution(unittest.TestCase):
    """Manufactured solution on the torus."""

    def setUp(self):
        self.torus = Torus()
        self.x = self.torus.sample(0.5, 0.0, np.random.default_rng(0)).positions

    def test_reference_values(self):
        self.assertAlmostEqual(exact_solution(np.array([[4.0 / 3.0, 0.0, 0.0]]), 0.0)[0], 0.9364, places=4)
        on_plane = np.array([[0.0, 1.0, 0.2], [0.0, -0.8, -0.1]])
        np.testing.assert_allclose(exact_solution(on_plane, 0.1), 0.0)

    def test_laplacian_matches_finite_differences(self):
        step = 1e-4
        n_points = len(self.x)
        gradient = np.zeros((n_points, 3))
        hessian = np.zeros((n_points, 3, 3))
        eye = np.eye(3) * step
        u = lambda y: exact_solution(y, 0.0)
        for a in range(3):
            gradient[:, a] = (u(self.x + eye[a]) - u(self.x - eye[a])) / (2 * step)
            for b in range(3):
                hessian[:, a, b] = (u(self.x + eye[a] + eye[b]) - u(self.x + eye[a] - eye[b])
                                    - u(self.x - eye[a] + eye[b]) + u(self.x - eye[a] - eye[b])) / (4 * step ** 2)
        numeric = ambient_surface_laplacian(gradient, hessian, self.torus.normal(self.x),
                                            self.torus.mean_curvature(self.x))
        exact = exact_surface_laplacian(self.torus, self.x, 0.0)
        np.testing.assert_allclose(numeric, exact, rtol=1e-4, atol=1e-4 * np.abs(exact).max())

    def test_forcing_balances(self):
        t = 0.2
        total = forcing(self.torus, self.x, t) + exact_surface_laplacian(self.torus, self.x, t)
        np.testing.assert_allclose(total, -5.0 * exact_solution(self.x, t), atol=1e-12)

class TestTorusProjection(unittest.TestCase):

    def test_central_normal_beats_neighbor_normal(self):
        central = TorusForced("central").run_level(0.38, Settings())
        neighbor = TorusForced("neighbor").run_level(0.38, Settings())
        self.assertLess(central.eps2, neighbor.eps2)



class TestFourStripOracle(unittest.TestCase):
    """The 1D flux-continuity profile."""

    def test_slopes(self):
        slopes = oracle_slopes(STRIP_ETA, FOUR_PI)
        # equal flux through every strip
        np.testing.assert_allclose(slopes * np.array(STRIP_ETA), slopes[0] * STRIP_ETA[0])
        self.assertAlmostEqual(np.sum(slopes * np.pi), 1.0)

    def test_profile(self):
        edges = np.linspace(*FOUR_PI, 5)
        values = oracle_profile(np.array([0.0, edges[1], 4.0 * np.pi]), STRIP_ETA, FOUR_PI)
        self.assertAlmostEqual(values[0], 0.0)
        self.assertAlmostEqual(values[1], 1.0 / 2.0101e4, places=12)
        self.assertAlmostEqual(values[2], 1.0)
        eps = 1e-9
        for edge in edges[1:-1]:
            left, right = oracle_profile(np.array([edge - eps, edge + eps]), STRIP_ETA, FOUR_PI)
            self.assertAlmostEqual(left, right, places=6)

    def test_homogeneous_is_linear(self):
        x = np.linspace(0.0, 4.0 * np.pi, 17)
        np.testing.assert_allclose(oracle_profile(x, (1.0, 1.0, 1.0, 1.0), FOUR_PI), x / (4.0 * np.pi))

    def test_strip_index(self):
        np.testing.assert_array_equal(strip_index(np.array([0.0, np.pi, 3.5 * np.pi, 4.0 * np.pi]), FOUR_PI, 4),
                                      [0, 1, 3, 3])

    def test_fit_recovers_oracle(self):
        x = np.linspace(0.0, 4.0 * np.pi, 400)
        phi = oracle_profile(x, STRIP_ETA, FOUR_PI)
        fitted = fit_strip_slopes(x, phi, FOUR_PI, 4, margin=0.1)
        np.testing.assert_allclose(fitted, oracle_slopes(STRIP_ETA, FOUR_PI), rtol=1e-8)
        self.assertAlmostEqual(oscillation_indicator(x, np.zeros_like(x), FOUR_PI, 16), 0.0)


class TestFourStripSolve(unittest.TestCase):
    """End-to-end four-strip solves."""

    def test_flat_homogeneous(self):
        benchmark = FourStrip(eta=(1.0, 1.0, 1.0, 1.0), compare=False)
        benchmark.surface = PlanePatch(x_range=(0.0, 4.0), y_range=(0.0, 1.0))
        report = benchmark.run(Settings(), h=0.3)
        self.assertTrue(report.converged, report.error_message)
        self.assertLess(report.metrics["eps2_oracle"], 1e-6)
        self.assertEqual(report.metrics["monotone"], 1.0)
        self.assertIn("four-strip", report.systems)
        self.assertEqual(len(report.fields["phi"]), report.n_points)

    def test_wave_patch_with_jump(self):
        report = FourStrip().run(Settings(), h=0.9)
        self.assertTrue(report.converged, report.error_message)
        self.assertEqual(report.metrics["monotone"], 1.0)
        self.assertLess(report.metrics["oscillation"], report.metrics["oscillation_nojump"])
        for s in (2, 4):
            fitted, expected = report.metrics[f"slope_{s}"], report.metrics[f"slope_{s}_oracle"]
            self.assertLess(abs(fitted - expected), 0.25 * expected)

    def test_failure_is_reported(self):
        report = FourStrip().run(Settings(neighbors="knn:3"), h=1.5)
        self.assertFalse(report.converged)
        self.assertEqual(report.error_type, "InsufficientNeighbors")


class TestFlatPoisson(unittest.TestCase):

    def test_single_level(self):
        result = FlatPoisson().run_level(0.2, Settings())
        self.assertLess(result.eps2, 0.02)
        self.assertIn("flat-poisson", result.systems)

    def test_neumann_variant(self):
        result = FlatPoisson(neumann=True).run_level(0.2, Settings())
        self.assertLess(result.eps2, 0.05)

    def test_convergence(self):
        report = FlatPoisson().run(Settings(), h0=0.3, levels=3)
        self.assertTrue(report.converged)
        self.assertGreater(report.slope, 1.0)


class TestAdvectionCone(unittest.TestCase):

    def test_initial_condition(self):
        self.assertAlmostEqual(initial_condition(BELL_CENTER[None, :])[0], 1.0)
        far = BELL_CENTER + np.array([0.0, 0.0, 5.5])
        self.assertEqual(initial_condition(far[None, :])[0], 0.0)

    def test_velocity_is_tangent_to_cone(self):
        x = AdvectionCone().surface.sample(1.5, 0.0, np.random.default_rng(0)).positions
        normals = AdvectionCone().surface.normal(x)
        np.testing.assert_allclose(np.einsum("ij,ij->i", rotation_velocity(x), normals), 0.0, atol=1e-12)

    def test_coarse_rotation(self):
        result = AdvectionCone("upwind").run_level(1.2, Settings(dt=0.2))
        self.assertTrue(result.converged)
        self.assertEqual(len(result.monitors["peak"]), result.metrics["steps"] + 1)
        self.assertLess(result.metrics["peak_final"], result.metrics["peak_initial"])
        self.assertTrue(np.isfinite(result.eps2))

    def test_dt_policies(self):
        settings = Settings()
        self.assertAlmostEqual(AdvectionCone().time_grid(0.6, settings).dt, 2.0 * np.pi / round(2.0 * np.pi / 0.02))
        grid = AdvectionCone(dt_policy="h").time_grid(0.5, settings)
        self.assertAlmostEqual(grid.dt, 2.0 * np.pi / round(2.0 * np.pi / 0.05))


class TestCahnHilliard(unittest.TestCase):

    def test_double_well(self):
        np.testing.assert_allclose(double_well(np.array([-1.0, 0.0, 1.0])), [0.0, 0.25, 0.0])
        np.testing.assert_allclose(double_well_derivative(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 6.0])

    def test_uniform_state_is_steady(self):
        report = CahnHilliard(steps=3, amplitude=0.0).run(Settings(), h=0.5)
        self.assertTrue(report.converged, report.error_message)
        np.testing.assert_allclose(report.monitors["energy"], 0.25 * report.n_points)
        np.testing.assert_allclose(report.monitors["mass"], 0.0)
        self.assertEqual(report.metrics["steps"], 3)
        self.assertEqual(report.systems["cahn-hilliard"].matrix.shape, (2 * report.n_points,) * 2)

    def test_mass_conserved_from_noise(self):
        report = CahnHilliard(steps=5, dt=1e-3).run(Settings(), h=0.5)
        self.assertTrue(report.converged, report.error_message)
        self.assertEqual(len(report.monitors["mass"]), 6)
        self.assertLess(report.metrics["mass_drift"], 0.05 * report.n_points)
        self.assertEqual(len(report.checkpoints), 2)

    def test_energy_does_not_increase(self):
        report = CahnHilliard(steps=5, dt=1e-3).run(Settings(), h=0.5)
        energies = np.asarray(report.monitors["energy"])
        self.assertTrue(np.all(np.diff(energies) <= 1e-6 * energies[0]))


if __name__ == '__main__':
    unittest.main()
