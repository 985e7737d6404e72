"""
Base classes for the benchmark problems.
"""
import time
from abc import ABC, abstractmethod
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np
import structlog

from config import RunConfig
from errors import GFDMError
from frames import Frame, boundary_normals, estimate_frames
from logger import log_operation_error, log_operation_start, log_operation_success
from pointcloud import Neighborhood, NeighborStrategy, PointCloud, build_neighborhoods, with_support_radii
from projection import ProjectedNeighborhood, project_all
from sparse import SparseSystem
from stencils import (
    LocalSystem,
    MonomialBasis,
    StencilSet,
    WeightSpec,
    factorize,
    surface_gradient,
    surface_laplacian,
)
from timeint import SolverOptions
from utils import loglog_slope

logger = structlog.get_logger()


class BenchmarkKind(Enum):
    """Supported benchmark problems."""
    HEAT_SPHERE = "heat-sphere"
    TORUS_FORCED = "torus"
    FOUR_STRIP = "four-strip"
    ADVECTION_CONE = "advection"
    CAHN_HILLIARD = "cahn-hilliard"
    FLAT_POISSON = "flat-poisson"


@dataclass
class Settings:
    """Numerical settings shared by all benchmarks."""
    order: int = 2
    wf: float = 2.0
    ac: Optional[float] = None
    optimize: bool = True
    projection: str = "central"
    neighbors: str = "knn:15"
    tol: float = 1e-10
    max_iter: int = 1000
    dt: Optional[float] = None
    seed: int = 0
    jitter: Optional[float] = None
    checkpoint_stride: int = 0

    @classmethod
    def from_run_config(cls, run: RunConfig) -> "Settings":
        return cls(order=run.order, wf=run.wf, ac=run.ac, optimize=run.optimize or run.ac is not None,
                   projection=run.projection, neighbors=run.neighbors, tol=run.tol, max_iter=run.max_iter,
                   dt=run.dt, seed=run.seed, jitter=run.jitter, checkpoint_stride=run.checkpoint_stride)

    def solver_options(self, max_iter: Optional[int] = None) -> SolverOptions:
        return SolverOptions(tol=self.tol, max_iter=max_iter or self.max_iter,
                             checkpoint_stride=self.checkpoint_stride)


@dataclass
class Discretization:
    """Everything needed to build operators on one cloud."""
    cloud: PointCloud
    neighborhoods: List[Neighborhood]
    frames: List[Frame]
    projections: List[ProjectedNeighborhood]
    basis: MonomialBasis
    weights: WeightSpec
    systems: List[LocalSystem]
    settings: Settings

    @property
    def n_points(self) -> int:
        return self.cloud.size

    @property
    def support_radius(self) -> float:
        """Mean support radius, the h of the time-step policies."""
        return float(np.mean(self.cloud.smoothing_length))

    @cached_property
    def gradient(self) -> List[StencilSet]:
        return surface_gradient(self.cloud, self.frames, self.projections, self.basis, self.weights,
                                self.systems)

    @cached_property
    def laplacian(self) -> StencilSet:
        return surface_laplacian(self.projections, self.basis, self.weights, optimize=self.settings.optimize,
                                 ac=self.settings.ac, systems=self.systems)


def discretize(cloud: PointCloud, settings: Settings) -> Discretization:
    """Neighborhoods, frames (with ν on boundaries), projections and factorized local systems."""
    basis = MonomialBasis(dim=cloud.manifold_dim, order=settings.order)
    weights = WeightSpec(wf=settings.wf)
    neighborhoods = build_neighborhoods(cloud, NeighborStrategy.parse(settings.neighbors), required=basis.count)
    cloud = with_support_radii(cloud, neighborhoods)
    frames = estimate_frames(cloud, neighborhoods, wf=settings.wf)
    if cloud.is_boundary.any():
        frames = boundary_normals(cloud, frames, neighborhoods)
    projections = project_all(cloud, frames, neighborhoods, settings.projection)
    systems = factorize(projections, basis, weights)
    return Discretization(cloud=cloud, neighborhoods=neighborhoods, frames=frames, projections=projections,
                          basis=basis, weights=weights, systems=systems, settings=settings)


def relative_l2_error(numeric: np.ndarray, exact: np.ndarray) -> float:
    """ε₂ = sqrt(Σ (u - u_exact)²) / sqrt(Σ u_exact²)."""
    numeric, exact = np.asarray(numeric, dtype=float), np.asarray(exact, dtype=float)
    denominator = np.sqrt(np.sum(exact ** 2))
    if denominator == 0:
        return float(np.sqrt(np.sum((numeric - exact) ** 2)))
    return float(np.sqrt(np.sum((numeric - exact) ** 2)) / denominator)


@dataclass
class LevelResult:
    """Result of one resolution of a convergence study."""
    resolution: int
    h: float
    n_points: int = 0
    eps2: float = float("nan")
    iterations: int = 0
    seconds: float = 0.0
    converged: bool = True
    error_message: Optional[str] = None
    error_type: Optional[str] = None
    metrics: Dict[str, float] = field(default_factory=dict)
    monitors: Dict[str, List[float]] = field(default_factory=dict)
    positions: Optional[np.ndarray] = field(default=None, repr=False)
    fields: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    systems: Dict[str, SparseSystem] = field(default_factory=dict, repr=False)


@dataclass
class BenchmarkReport:
    """Per-resolution errors with a fitted log-log slope."""
    name: str
    label: str
    levels: List[LevelResult] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return bool(self.levels) and all(level.converged for level in self.levels)

    @property
    def slope(self) -> float:
        """Least-squares slope of log ε₂ against log h; NaN below three converged levels."""
        usable = [level for level in self.levels if level.converged]
        if len(usable) < 3:
            return float("nan")
        return loglog_slope([level.h for level in usable], [level.eps2 for level in usable])

    @property
    def max_iterations(self) -> int:
        return max((level.iterations for level in self.levels), default=0)


@dataclass
class FieldReport:
    """Single-resolution run reported through fields and scalar metrics."""
    name: str
    label: str
    h: float
    n_points: int = 0
    seconds: float = 0.0
    iterations: int = 0
    converged: bool = True
    error_message: Optional[str] = None
    error_type: Optional[str] = None
    metrics: Dict[str, float] = field(default_factory=dict)
    monitors: Dict[str, List[float]] = field(default_factory=dict)
    positions: Optional[np.ndarray] = field(default=None, repr=False)
    fields: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    systems: Dict[str, SparseSystem] = field(default_factory=dict, repr=False)
    checkpoints: List[Tuple[float, np.ndarray]] = field(default_factory=list, repr=False)


class Benchmark(ABC):
    """A convergence study over successively refined clouds."""

    kind: BenchmarkKind
    default_h: float = 0.3
    # sampler irregularity used unless the run sets one
    default_jitter: float = 0.0
    # ratio between consecutive smoothing lengths
    refinement: float = np.sqrt(2.0)

    @property
    def label(self) -> str:
        return self.kind.value

    def jitter(self, settings: Settings) -> float:
        return self.default_jitter if settings.jitter is None else settings.jitter

    def resolutions(self, h0: Optional[float] = None, levels: int = 3) -> List[float]:
        h0 = self.default_h if h0 is None else h0
        return [h0 / self.refinement ** level for level in range(levels)]

    @abstractmethod
    def run_level(self, h: float, settings: Settings, resolution: int = 0) -> LevelResult:
        """Run one resolution; failures propagate as GFDMError."""
        pass

    def _safe_level(self, h: float, settings: Settings, resolution: int) -> LevelResult:
        start = time.time()
        log_operation_start(self.label, resolution=resolution, h=h)
        try:
            result = self.run_level(h, settings, resolution)
        except GFDMError as e:
            log_operation_error(self.label, e, **{**e.context, "resolution": resolution})
            return LevelResult(resolution=resolution, h=h, seconds=time.time() - start, converged=False,
                               error_message=str(e), error_type=type(e).__name__)
        result.seconds = time.time() - start
        log_operation_success(self.label, duration=result.seconds, resolution=resolution,
                              n_points=result.n_points, eps2=result.eps2, iterations=result.iterations)
        return result

    def run(self, settings: Settings, h0: Optional[float] = None, levels: int = 3, jobs: int = 1) -> BenchmarkReport:
        """Run every resolution, in parallel processes when jobs > 1."""
        hs = self.resolutions(h0, levels)
        if jobs > 1 and len(hs) > 1:
            with ProcessPoolExecutor(max_workers=min(jobs, len(hs))) as executor:
                futures = [executor.submit(self._safe_level, h, settings, idx) for idx, h in enumerate(hs)]
                results = [future.result() for future in futures]
        else:
            results = [self._safe_level(h, settings, idx) for idx, h in enumerate(hs)]

        report = BenchmarkReport(name=self.kind.value, label=self.label, levels=results)
        logger.info("Benchmark completed", benchmark=self.label, levels=len(results),
                    converged=report.converged, slope=report.slope)
        return report


class FieldBenchmark(ABC):
    """A single-resolution run with qualitative or semi-analytic checks."""

    kind: BenchmarkKind
    default_h: float = 0.3
    default_jitter: float = 0.0

    @property
    def label(self) -> str:
        return self.kind.value

    def jitter(self, settings: Settings) -> float:
        return self.default_jitter if settings.jitter is None else settings.jitter

    @abstractmethod
    def solve(self, h: float, settings: Settings) -> FieldReport:
        pass

    def run(self, settings: Settings, h: Optional[float] = None) -> FieldReport:
        h = self.default_h if h is None else h
        start = time.time()
        log_operation_start(self.label, h=h)
        try:
            report = self.solve(h, settings)
        except GFDMError as e:
            log_operation_error(self.label, e, **e.context)
            return FieldReport(name=self.kind.value, label=self.label, h=h, seconds=time.time() - start,
                               converged=False, error_message=str(e), error_type=type(e).__name__)
        report.seconds = time.time() - start
        log_operation_success(self.label, duration=report.seconds, n_points=report.n_points)
        return report
