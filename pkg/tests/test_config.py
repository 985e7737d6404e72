"""
Unit tests for environment configuration and run parameters.
"""
import os
import unittest
import tempfile
from pathlib import Path
from unittest.mock import patch
import sys

from pydantic import ValidationError

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from config import Config, RunConfig


class TestConfig(unittest.TestCase):
    """Test environment-driven configuration."""

    def test_defaults(self):
        with patch.dict(os.environ, {}, clear=True):
            config = Config()
        self.assertEqual(config.log_level, "INFO")
        self.assertEqual(config.max_iter, 1000)
        self.assertEqual(config.jobs, 1)

    def test_environment_overrides(self):
        env = {"GFDM_OUT": "/tmp/gfdm-out", "GFDM_SOLVER_TOL": "1e-8", "GFDM_MAX_ITER": "50", "GFDM_JOBS": "3"}
        with patch.dict(os.environ, env, clear=True):
            config = Config()
        self.assertEqual(config.output_dir, "/tmp/gfdm-out")
        self.assertEqual(config.solver_tol, 1e-8)
        self.assertEqual(config.max_iter, 50)
        self.assertEqual(config.jobs, 3)

    def test_validate_output_dir(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            config = Config()
            config.output_dir = str(Path(temp_dir) / "nested" / "out")
            self.assertTrue(config.validate_output_dir())
            self.assertTrue(Path(config.output_dir).is_dir())


class TestRunConfig(unittest.TestCase):
    """Validation, merging and the key = value echo."""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_defaults(self):
        run = RunConfig()
        self.assertIsNone(run.h)
        self.assertIsNone(run.dt)
        self.assertEqual(run.order, 2)
        self.assertEqual(run.neighbor_strategy, ("knn", 15))
        self.assertTrue(run.optimize)
        self.assertIsNone(run.jitter)
        self.assertFalse(RunConfig(optimize=False).optimize)

    def test_validation(self):
        for bad in ({"order": 4}, {"projection": "orthographic"}, {"neighbors": "knn"},
                    {"ac": 1.0}, {"ac": 0.0}, {"h": -0.1}, {"jitter": 1.0}, {"levels": 0}):
            with self.subTest(values=bad):
                with self.assertRaises(ValidationError):
                    RunConfig(**bad)
        self.assertEqual(RunConfig(ac=-1.5).ac, -1.5)
        self.assertEqual(RunConfig(neighbors="radius").neighbor_strategy, ("radius", None))

    def test_flags_override_file(self):
        path = self.root / "run.cfg"
        path.write_text("# coarse run\norder = 3\nmax-iter = 77\n\nh = 0.4  # comment\n", encoding="utf-8")
        run = RunConfig.from_sources(path, order=None, h=0.2)
        self.assertEqual(run.order, 3)
        self.assertEqual(run.max_iter, 77)
        self.assertEqual(run.h, 0.2)

    def test_parse_file_rejects_bare_words(self):
        path = self.root / "broken.cfg"
        path.write_text("order 3\n", encoding="utf-8")
        with self.assertRaises(ValueError):
            RunConfig.parse_file(path)

    def test_echo_reads_back(self):
        run = RunConfig(geometry="torus", h=0.25, optimize=True, ac=-2.0, levels=2)
        path = run.write(self.root / "out")
        self.assertEqual(path.name, "run_config.txt")
        text = path.read_text(encoding="utf-8")
        self.assertIn("geometry = torus\n", text)
        self.assertNotIn("dt =", text)
        self.assertEqual(RunConfig.from_sources(path), run)


if __name__ == '__main__':
    unittest.main()
