"""
Unit tests for the command line interface.
"""
import csv
import json
import logging
import unittest
import tempfile
from pathlib import Path
import sys

from click.testing import CliRunner
from scipy.io import mmread

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from cli import cli
from logger import RUN_LOG_HANDLER
from pointcloud import read_cloud


class TestCli(unittest.TestCase):
    """Commands run end to end on small clouds."""

    def setUp(self):
        self.runner = CliRunner(mix_stderr=False)
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_listings(self):
        result = self.runner.invoke(cli, ['surfaces'])
        self.assertEqual(result.exit_code, 0)
        self.assertIn('torus', result.output)
        result = self.runner.invoke(cli, ['benchmarks'])
        self.assertEqual(result.exit_code, 0)
        self.assertIn('four-strip', result.output)
        result = self.runner.invoke(cli, ['config-check'])
        self.assertEqual(result.exit_code, 0)
        self.assertIn('GFDM_OUT', result.output)

    def test_generate_is_deterministic(self):
        paths = [self.root / "a.cloud", self.root / "b.cloud"]
        for path in paths:
            result = self.runner.invoke(cli, ['generate', 'circle', '--h', '0.1', '--jitter', '0.4',
                                              '--seed', '9', '--output', str(path)])
            self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(paths[0].read_text(encoding="ascii"), paths[1].read_text(encoding="ascii"))
        cloud = read_cloud(paths[0])
        self.assertEqual(cloud.manifold_dim, 1)

    def test_invalid_parameter(self):
        result = self.runner.invoke(cli, ['generate', 'circle', '--order', '4', '--out', str(self.root)])
        self.assertEqual(result.exit_code, 1)
        message = json.loads(result.stderr.strip().splitlines()[-1])
        self.assertEqual(message["error"], "InvalidParameter")
        self.assertIn("order", message["message"])

    def test_unknown_benchmark(self):
        result = self.runner.invoke(cli, ['bench', 'navier-stokes', '--out', str(self.root)])
        self.assertEqual(result.exit_code, 1)
        self.assertEqual(json.loads(result.stderr.strip().splitlines()[-1])["error"], "InvalidParameter")

    def test_stencil_dump(self):
        result = self.runner.invoke(cli, ['stencil-dump', 'circle', '--h', '0.3', '--neighbors', 'knn:5',
                                          '--op', 'grad', '--check-consistency', '--out', str(self.root)])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('Consistency Check', result.output)
        with open(self.root / "stencils_grad.csv", newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        self.assertEqual(rows[0], ["i", "j", "op", "coeff"])
        self.assertGreater(len(rows), 1)
        self.assertTrue((self.root / "run_config.txt").exists())

    def test_bench_with_matrix_dump(self):
        result = self.runner.invoke(cli, ['bench', 'flat-poisson', '--h', '0.3', '--levels', '1',
                                          '--dump-matrix', '--out', str(self.root)])
        self.assertEqual(result.exit_code, 0, result.output)
        out_dir = self.root / "flat-poisson"
        with open(out_dir / "flat-poisson.csv", newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        self.assertEqual(rows[0][:3], ["resolution", "N", "h"])
        self.assertEqual(len(rows), 2)
        matrix = mmread(str(out_dir / "r0_flat-poisson.mtx"))
        self.assertEqual(matrix.shape[0], int(rows[1][1]))
        self.assertTrue((out_dir / "r0_flat-poisson_rhs.mtx").exists())
        self.assertIn("levels = 1", (out_dir / "run_config.txt").read_text(encoding="utf-8"))

    def test_run_log_in_output_directory(self):
        self.addCleanup(self._close_run_log)
        result = self.runner.invoke(cli, ['generate', 'circle', '--h', '0.2', '--out', str(self.root)])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertTrue((self.root / "circle.cloud").exists())
        self.assertEqual(len(list(self.root.glob("gfdm_*.log"))), 1)

    def test_bench_log_and_plain_stencils(self):
        self.addCleanup(self._close_run_log)
        result = self.runner.invoke(cli, ['bench', 'flat-poisson', '--h', '0.3', '--levels', '1', '--no-optimize',
                                          '--out', str(self.root)])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(len(list(self.root.glob("gfdm_*.log"))), 1)
        self.assertIn("optimize = False", (self.root / "flat-poisson" / "run_config.txt").read_text(encoding="utf-8"))

    @staticmethod
    def _close_run_log():
        root = logging.getLogger()
        for handler in [h for h in root.handlers if h.get_name() == RUN_LOG_HANDLER]:
            root.removeHandler(handler)
            handler.close()


if __name__ == '__main__':
    unittest.main()
