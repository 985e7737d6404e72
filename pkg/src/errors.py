"""
Exception hierarchy for the surface GFDM toolkit.
"""
from typing import Any


class GFDMError(Exception):
    """Base exception for all GFDM operations."""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.context = context


class InvalidParameter(GFDMError):
    """Exception raised for nonpositive radii, empty ranges and similar input errors."""
    pass


class EmptyCloud(GFDMError):
    """Exception raised when an operation receives a cloud without points."""
    pass


class InsufficientNeighbors(GFDMError):
    """Exception raised when a support holds fewer points than monomial conditions."""
    pass


class DegenerateNeighborhood(GFDMError):
    """Exception raised when a neighborhood cannot span the tangent space."""
    pass


class NonTransversal(GFDMError):
    """Exception raised when a neighbor normal is nearly parallel to the tangent plane."""
    pass


class SingularSystem(GFDMError):
    """Exception raised when the local least squares system is rank deficient."""
    pass


class OptimizerDegenerate(GFDMError):
    """Exception raised when the optimized Laplacian split has a vanishing denominator."""
    pass


class NonSPDKappa(GFDMError):
    """Exception raised when a diffusion coefficient is not positive (definite)."""
    pass


class UncoveredBoundaryPoint(GFDMError):
    """Exception raised when a boundary point has no boundary condition."""
    pass


class DuplicateBoundaryCondition(GFDMError):
    """Exception raised when a boundary point has more than one boundary condition."""
    pass


class SolverError(GFDMError):
    """Base exception for iterative solver failures."""
    pass


class Breakdown(SolverError):
    """Exception raised when BiCGSTAB breaks down (rho or omega vanish)."""
    pass


class MaxIterExceeded(SolverError):
    """Exception raised when the iteration budget is exhausted."""
    pass


class SolverFailure(GFDMError):
    """Exception raised by time integrators when a step cannot be solved."""

    def __init__(self, message: str, step: int, **context: Any):
        super().__init__(message, step=step, **context)
        self.step = step


class CloudFormatError(GFDMError):
    """Exception raised when a cloud file cannot be parsed."""
    pass
