"""
Unit tests for sparse assembly and the BiCGSTAB solver.
"""
import unittest
import tempfile
from pathlib import Path
import sys

import numpy as np
from scipy import sparse
from scipy.io import mmread

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from errors import (
    Breakdown,
    DuplicateBoundaryCondition,
    InvalidParameter,
    MaxIterExceeded,
    UncoveredBoundaryPoint,
)
from sparse import BoundaryCondition, BoundaryKind, SparseSystem, assemble, bicgstab, check_csr, operator_matrix
from stencils import OperatorKind, StencilSet


def second_difference(n: int) -> sparse.csr_matrix:
    return sparse.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="csr")


def line_gradient(n: int) -> StencilSet:
    """First-difference rows on a unit-spaced line: one-sided at the ends."""
    members, coefficients = [], []
    for i in range(n):
        if i == 0:
            members.append(np.array([0, 1]))
            coefficients.append(np.array([-1.0, 1.0]))
        elif i == n - 1:
            members.append(np.array([n - 1, n - 2]))
            coefficients.append(np.array([1.0, -1.0]))
        else:
            members.append(np.array([i, i - 1, i + 1]))
            coefficients.append(np.array([0.0, -0.5, 0.5]))
    return StencilSet(kind=OperatorKind.SURFACE_GRAD_X, members=members, coefficients=coefficients)


class TestBiCGSTAB(unittest.TestCase):
    """BiCGSTAB convergence, breakdown and budget handling."""

    def test_scalar_system_one_iteration(self):
        x, stats = bicgstab(sparse.csr_matrix([[4.0]]), np.array([2.0]))
        self.assertAlmostEqual(x[0], 0.5)
        self.assertEqual(stats.iterations, 1)
        self.assertTrue(stats.converged)
        self.assertEqual(stats.restarts, 0)

    def test_zero_rhs(self):
        x, stats = bicgstab(second_difference(6), np.zeros(6))
        np.testing.assert_array_equal(x, 0.0)
        self.assertEqual(stats.iterations, 0)

    def test_diagonally_dominant_system(self):
        rng = np.random.default_rng(7)
        n = 60
        matrix = sparse.random(n, n, density=0.1, random_state=7, format="csr")
        matrix = sparse.csr_matrix(matrix + sparse.diags(np.abs(matrix).sum(axis=1).A1 + 1.0))
        b = rng.standard_normal(n)
        x, stats = bicgstab(matrix, b, tol=1e-12, max_iter=500)
        self.assertLessEqual(np.linalg.norm(b - matrix @ x), 1e-10 * np.linalg.norm(b))
        self.assertGreater(stats.iterations, 0)

    def test_skew_system_breaks_down(self):
        skew = sparse.csr_matrix([[0.0, 1.0], [-1.0, 0.0]])
        with self.assertRaises(Breakdown):
            bicgstab(skew, np.array([1.0, 0.0]))

    def test_budget_exhausted(self):
        matrix = sparse.diags(np.arange(1.0, 11.0), format="csr")
        with self.assertRaises(MaxIterExceeded):
            bicgstab(matrix, np.ones(10), tol=1e-14, max_iter=1)

    def test_rejects_bad_input(self):
        with self.assertRaises(InvalidParameter):
            bicgstab(sparse.csr_matrix(np.ones((2, 3))), np.ones(2))
        with self.assertRaises(InvalidParameter):
            bicgstab(sparse.identity(2, format="csr"), np.array([1.0, np.nan]))
        with self.assertRaises(InvalidParameter):
            bicgstab(sparse.identity(2, format="csr"), np.ones(2), tol=0.0)

    def test_diagonal_scaling(self):
        matrix = sparse.csr_matrix(np.array([[100.0, 1.0], [2.0, 0.5]]))
        b = np.array([1.0, 2.0])
        x, _ = bicgstab(matrix, b, diagonal_scaling=True, tol=1e-12)
        np.testing.assert_allclose(matrix @ x, b, atol=1e-9)

    def test_diagonal_scaling_reports_original_residual(self):
        n = 64
        matrix = sparse.lil_matrix(-second_difference(n))
        matrix[0, :] = 1e6 * matrix[0, :].toarray()
        matrix = sparse.csr_matrix(matrix)
        b = np.random.default_rng(3).standard_normal(n)
        b[0] *= 1e6
        x, stats = bicgstab(matrix, b, tol=1e-10, max_iter=2000, diagonal_scaling=True)
        true_residual = np.linalg.norm(b - matrix @ x) / np.linalg.norm(b)
        self.assertLessEqual(true_residual, 1e-10)
        self.assertAlmostEqual(stats.residual, true_residual, delta=1e-14)


class TestDenseOracle(unittest.TestCase):
    """BiCGSTAB against a dense direct solve."""

    def test_random_spd(self):
        rng = np.random.default_rng(11)
        q = rng.standard_normal((50, 50))
        dense = q.T @ q + 50.0 * np.eye(50)
        b = rng.standard_normal(50)
        x, stats = bicgstab(sparse.csr_matrix(dense), b, tol=1e-12, max_iter=500)
        expected = np.linalg.solve(dense, b)
        self.assertLess(np.linalg.norm(x - expected), 1e-8 * np.linalg.norm(expected))
        self.assertTrue(stats.converged)

    def test_poisson_1d(self):
        n = 64
        matrix = sparse.csr_matrix(-second_difference(n))
        b = np.ones(n) / (n + 1) ** 2
        x, _ = bicgstab(matrix, b, tol=1e-13, max_iter=2000)
        expected = np.linalg.solve(matrix.toarray(), b)
        self.assertLess(np.linalg.norm(x - expected), 1e-8 * np.linalg.norm(expected))
        # discrete solution of -u'' = 1 with zero ends is exact for the parabola
        grid = np.arange(1, n + 1) / (n + 1)
        np.testing.assert_allclose(expected, 0.5 * grid * (1.0 - grid), atol=1e-12)


class TestAssembly(unittest.TestCase):
    """Interior rows from the operator, boundary rows from the conditions."""

    def test_dirichlet_rows(self):
        n = 7
        system = assemble(second_difference(n), [BoundaryCondition.dirichlet([0, n - 1], [1.0, 3.0])],
                          np.zeros(n), is_boundary=np.isin(np.arange(n), [0, n - 1]))
        dense = system.matrix.toarray()
        np.testing.assert_array_equal(dense[0], np.eye(n)[0])
        np.testing.assert_array_equal(dense[-1], np.eye(n)[-1])
        self.assertEqual(system.rhs[0], 1.0)
        self.assertEqual(system.rhs[-1], 3.0)
        u, _ = bicgstab(system.matrix, system.rhs, tol=1e-12)
        np.testing.assert_allclose(u, np.linspace(1.0, 3.0, n), atol=1e-8)

    def test_neumann_rows(self):
        n = 6
        gradient = line_gradient(n)
        bc_right = BoundaryCondition.neumann([n - 1], [0.5], [gradient], np.array([[1.0]]))
        self.assertIs(bc_right.kind, BoundaryKind.NEUMANN)
        system = assemble(second_difference(n), [BoundaryCondition.dirichlet([0], [0.0]), bc_right], np.zeros(n))
        row = system.matrix.toarray()[-1]
        np.testing.assert_array_equal(row[-2:], [-1.0, 1.0])
        # linear profile with slope 0.5 from the Dirichlet end
        u, _ = bicgstab(system.matrix, system.rhs, tol=1e-12)
        np.testing.assert_allclose(u, 0.5 * np.arange(n), atol=1e-8)

    def test_duplicate_condition(self):
        bcs = [BoundaryCondition.dirichlet([0], [1.0]), BoundaryCondition.dirichlet([0, 4], [0.0, 0.0])]
        with self.assertRaises(DuplicateBoundaryCondition):
            assemble(second_difference(5), bcs, np.zeros(5))

    def test_uncovered_boundary_point(self):
        flags = np.array([True, False, False, False, True])
        with self.assertRaises(UncoveredBoundaryPoint):
            assemble(second_difference(5), [BoundaryCondition.dirichlet([0], [1.0])], np.zeros(5),
                     is_boundary=flags)

    def test_neumann_needs_stencil(self):
        with self.assertRaises(InvalidParameter):
            BoundaryCondition(kind=BoundaryKind.NEUMANN, points=[0], values=[0.0])

    def test_weighted_operator_sum(self):
        gradient = line_gradient(4)
        combined = operator_matrix([(2.0, gradient), (-1.0, gradient)])
        np.testing.assert_allclose(combined.toarray(), gradient.matrix.toarray())
        with self.assertRaises(InvalidParameter):
            operator_matrix([])


class TestCsrChecks(unittest.TestCase):

    def test_assembled_matrix_passes(self):
        system = assemble(second_difference(5), [BoundaryCondition.dirichlet([0, 4], 0.0)], np.ones(5))
        check_csr(system.matrix)

    def test_unsorted_columns(self):
        matrix = sparse.csr_matrix((np.array([1.0, 2.0]), np.array([1, 0]), np.array([0, 2])), shape=(1, 2))
        with self.assertRaises(InvalidParameter):
            check_csr(matrix)

    def test_nonfinite_entry(self):
        matrix = sparse.csr_matrix(np.array([[1.0, np.inf]]))
        with self.assertRaises(InvalidParameter):
            check_csr(matrix)

    def test_nonfinite_coefficient_rejected_on_assembly(self):
        operator = second_difference(5).tolil()
        operator[2, 2] = np.nan
        with self.assertRaises(InvalidParameter):
            assemble(sparse.csr_matrix(operator), [BoundaryCondition.dirichlet([0, 4], 0.0)], np.ones(5))


class TestSystemDump(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_matrix_market_files(self):
        system = SparseSystem(matrix=second_difference(4), rhs=np.arange(4.0))
        path = system.dump(Path(self.temp_dir.name) / "r0_demo.mtx")
        self.assertTrue(path.exists())
        np.testing.assert_allclose(mmread(str(path)).toarray(), system.matrix.toarray())
        rhs = mmread(str(path.with_name("r0_demo_rhs.mtx")))
        np.testing.assert_allclose(np.asarray(rhs).ravel(), system.rhs)


if __name__ == '__main__':
    unittest.main()
