"""
Surface GFDM Toolkit

Meshfree generalized finite differences for PDEs on point-cloud manifolds:
surface gradient, Laplace-Beltrami and anisotropic diffusion stencils built by
weighted least squares on projected tangent planes, sparse implicit solvers and
a benchmark harness.

Modules are imported by flat name with this directory on sys.path (see main.py).
"""

__version__ = "1.0.0"
__author__ = "Surface GFDM Team"
__email__ = "contact@example.com"
