"""
Point clouds: positions, smoothing lengths, neighborhoods and boundary flags.
"""
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import structlog
from scipy.spatial import cKDTree

from errors import CloudFormatError, EmptyCloud, InsufficientNeighbors, InvalidParameter
from logger import log_operation_start, log_operation_success
from surfaces import R_MAX, R_MIN, Surface, get_surface_by_name

logger = structlog.get_logger()

CLOUD_HEADER = "gfdm-cloud v1"


@dataclass(frozen=True)
class PointCloud:
    """Discretized k-manifold in R^n. Arrays are read-only after construction."""
    positions: np.ndarray
    smoothing_length: np.ndarray
    is_boundary: np.ndarray
    manifold_dim: int
    surface: Optional[Surface] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float)
        if positions.ndim != 2 or len(positions) == 0:
            raise EmptyCloud("point cloud needs at least one point")
        n_points, embedding_dim = positions.shape
        if not np.all(np.isfinite(positions)):
            raise InvalidParameter("positions must be finite")
        if not 1 <= self.manifold_dim < embedding_dim:
            raise InvalidParameter("need 1 <= k < n", k=self.manifold_dim, n=embedding_dim)

        h = np.broadcast_to(np.asarray(self.smoothing_length, dtype=float), (n_points,)).copy()
        if not np.all(h > 0):
            raise InvalidParameter("smoothing lengths must be positive")
        flags = np.broadcast_to(np.asarray(self.is_boundary, dtype=bool), (n_points,)).copy()

        for array in (positions, h, flags):
            array.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "smoothing_length", h)
        object.__setattr__(self, "is_boundary", flags)

    @property
    def size(self) -> int:
        return len(self.positions)

    @property
    def embedding_dim(self) -> int:
        return self.positions.shape[1]

    def __len__(self) -> int:
        return self.size


@dataclass
class Neighborhood:
    """Support S_i of point `center`; members[0] is the center itself."""
    center: int
    members: np.ndarray
    h: float

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class NeighborStrategy:
    """Either the k nearest points (kind='knn') or all points within h_i (kind='radius')."""
    kind: str = "knn"
    k_nn: int = 15

    @classmethod
    def parse(cls, text: str) -> "NeighborStrategy":
        text = text.strip().lower()
        if text == "radius":
            return cls(kind="radius")
        if text.startswith("knn:"):
            return cls(kind="knn", k_nn=int(text.split(":", 1)[1]))
        raise InvalidParameter(f"unknown neighborhood strategy '{text}'")


@dataclass
class SpacingReport:
    """Violations of the r_min / r_max spacing conventions."""
    close_pairs: List[Tuple[int, int]]
    hole_points: List[int]

    @property
    def ok(self) -> bool:
        return not self.close_pairs and not self.hole_points


def build_neighborhoods(cloud: PointCloud, strategy: Union[NeighborStrategy, str] = NeighborStrategy(),
                        required: Optional[int] = None) -> List[Neighborhood]:
    """
    Build one support per point.

    For kNN, h_i is reset to the largest center-to-member distance. For the
    radius strategy, members are all points within the cloud's h_i.

    Raises:
        EmptyCloud: for empty clouds
        InvalidParameter: if k_nn exceeds N
        InsufficientNeighbors: if `required` is given and a support is smaller
    """
    if isinstance(strategy, str):
        strategy = NeighborStrategy.parse(strategy)
    if cloud.size == 0:
        raise EmptyCloud("cannot build neighborhoods of an empty cloud")

    start = time.time()
    tree = cKDTree(cloud.positions)
    neighborhoods: List[Neighborhood] = []

    if strategy.kind == "knn":
        if not 1 <= strategy.k_nn <= cloud.size:
            raise InvalidParameter("k_nn must lie in [1, N]", k_nn=strategy.k_nn, n_points=cloud.size)
        distances, indices = tree.query(cloud.positions, k=strategy.k_nn)
        distances = np.asarray(distances).reshape(cloud.size, -1)
        indices = np.asarray(indices).reshape(cloud.size, -1)
        for i in range(cloud.size):
            members = indices[i]
            if members[0] != i:
                # coincident points can outrank the center; put it first
                members = np.concatenate([[i], members[members != i]])[:strategy.k_nn]
            offsets = cloud.positions[members] - cloud.positions[i]
            radius = float(np.max(np.linalg.norm(offsets, axis=1)))
            neighborhoods.append(Neighborhood(center=i, members=members.astype(np.intp), h=radius))
    elif strategy.kind == "radius":
        for i, found in enumerate(tree.query_ball_point(cloud.positions, r=cloud.smoothing_length)):
            found = np.asarray(found, dtype=np.intp)
            members = np.concatenate([[i], np.sort(found[found != i])]).astype(np.intp)
            neighborhoods.append(Neighborhood(center=i, members=members, h=float(cloud.smoothing_length[i])))
    else:
        raise InvalidParameter(f"unknown neighborhood strategy '{strategy.kind}'")

    if required is not None:
        for hood in neighborhoods:
            if len(hood) < required:
                raise InsufficientNeighbors("support smaller than the monomial count",
                                            point=hood.center, size=len(hood), required=required)

    sizes = np.array([len(hood) for hood in neighborhoods])
    logger.debug("neighborhoods_built", strategy=strategy.kind, n_points=cloud.size,
                 min_size=int(sizes.min()), max_size=int(sizes.max()),
                 seconds=time.time() - start)
    return neighborhoods


def with_support_radii(cloud: PointCloud, neighborhoods: List[Neighborhood]) -> PointCloud:
    """Copy of the cloud whose smoothing lengths are the supports actually used."""
    return PointCloud(
        positions=cloud.positions,
        smoothing_length=np.array([hood.h for hood in neighborhoods]),
        is_boundary=cloud.is_boundary,
        manifold_dim=cloud.manifold_dim,
        surface=cloud.surface,
    )


def sample_surface(kind: Union[str, Surface], target_h: float, jitter: float = 0.0, seed: int = 0,
                   **params) -> PointCloud:
    """
    Sample an analytic surface into a point cloud.

    Args:
        kind: Surface name ('sphere', 'torus', 'cone', 'wave', 'plane', 'circle') or instance
        target_h: Smoothing length; sampler spacing is tied to it
        jitter: Irregularity in [0, 1)
        seed: Seed for all randomness of the sampler
        **params: Geometry parameters (radius, x_range, z_range, ...)
    """
    surface = kind if isinstance(kind, Surface) else get_surface_by_name(kind, **params)
    start = time.time()
    log_operation_start("sample_surface", surface=surface.describe(), target_h=target_h, jitter=jitter, seed=seed)

    rng = np.random.default_rng(seed)
    sample = surface.sample(target_h, jitter, rng)
    cloud = PointCloud(
        positions=sample.positions,
        smoothing_length=np.full(len(sample.positions), float(target_h)),
        is_boundary=sample.is_boundary,
        manifold_dim=surface.manifold_dim,
        surface=surface,
    )

    log_operation_success("sample_surface", duration=time.time() - start,
                          n_points=cloud.size, n_boundary=int(cloud.is_boundary.sum()))
    return cloud


def validate_spacing(cloud: PointCloud, neighborhoods: Optional[List[Neighborhood]] = None,
                     r_min: float = R_MIN, r_max: float = R_MAX) -> SpacingReport:
    """
    Check the r_min separation and approximate the r_max hole criterion.

    A pair (i, j) violates r_min when ‖x_i − x_j‖ < r_min·min(h_i, h_j).
    For holes, each interior point i tests the location at distance r_max·h_i
    away from each of its neighbors; if no other point is closer to that location
    than i itself, an empty ball of radius r_max·h_i touches i and a hole is
    reported at i.
    """
    h = cloud.smoothing_length
    tree = cKDTree(cloud.positions)

    close_pairs = []
    candidates = tree.query_pairs(r_min * float(h.max()), output_type="ndarray")
    if len(candidates):
        gaps = np.linalg.norm(cloud.positions[candidates[:, 0]] - cloud.positions[candidates[:, 1]], axis=1)
        limit = r_min * np.minimum(h[candidates[:, 0]], h[candidates[:, 1]])
        close_pairs = [tuple(map(int, pair)) for pair in candidates[gaps < limit]]

    if neighborhoods is None:
        neighborhoods = build_neighborhoods(cloud, NeighborStrategy(kind="knn", k_nn=min(15, cloud.size)))

    hole_points = []
    for hood in neighborhoods:
        i = hood.center
        if cloud.is_boundary[i] or len(hood) < 2:
            continue
        away = cloud.positions[i] - cloud.positions[hood.members[1:]]
        lengths = np.linalg.norm(away, axis=1)
        away = away[lengths > 0] / lengths[lengths > 0][:, None]
        if len(away) == 0:
            continue
        radius = r_max * h[i]
        targets = cloud.positions[i] + radius * away
        nearest, _ = tree.query(targets, k=1)
        if np.any(nearest >= radius * (1.0 - 1e-9)):
            hole_points.append(int(i))

    report = SpacingReport(close_pairs=close_pairs, hole_points=hole_points)
    logger.debug("spacing_validated", close_pairs=len(close_pairs), holes=len(hole_points))
    return report


def write_cloud(cloud: PointCloud, path: Union[str, Path]) -> Path:
    """Write the `gfdm-cloud v1` plain-text format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{CLOUD_HEADER} n={cloud.embedding_dim} k={cloud.manifold_dim} N={cloud.size}"]
    for x, h, b in zip(cloud.positions, cloud.smoothing_length, cloud.is_boundary):
        coords = " ".join(repr(float(value)) for value in x)
        lines.append(f"{coords} {float(h)!r} {int(b)}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_cloud(path: Union[str, Path]) -> PointCloud:
    """
    Read the `gfdm-cloud v1` format.

    Raises:
        CloudFormatError: on a bad header, wrong column count or missing boundary flags
    """
    path = Path(path)
    lines = [line for line in path.read_text(encoding="ascii").splitlines() if line.strip()]
    if not lines or not lines[0].startswith(CLOUD_HEADER):
        raise CloudFormatError("missing 'gfdm-cloud v1' header", path=str(path))
    try:
        fields = dict(item.split("=", 1) for item in lines[0][len(CLOUD_HEADER):].split())
        embedding_dim, manifold_dim, n_points = int(fields["n"]), int(fields["k"]), int(fields["N"])
    except (KeyError, ValueError) as exc:
        raise CloudFormatError(f"bad header: {lines[0]!r}", path=str(path)) from exc

    body = lines[1:]
    if len(body) != n_points:
        raise CloudFormatError("point count does not match header", expected=n_points, found=len(body))
    try:
        table = np.array([[float(value) for value in line.split()] for line in body], dtype=float)
    except ValueError as exc:
        raise CloudFormatError("non-numeric entry", path=str(path)) from exc
    if table.ndim != 2 or table.shape[1] != embedding_dim + 2:
        raise CloudFormatError("each line needs n coordinates, h and a boundary flag",
                               expected=embedding_dim + 2)
    flags = table[:, -1]
    if not np.all(np.isin(flags, (0.0, 1.0))):
        raise CloudFormatError("boundary flag must be 0 or 1")

    return PointCloud(
        positions=table[:, :embedding_dim],
        smoothing_length=table[:, embedding_dim],
        is_boundary=flags.astype(bool),
        manifold_dim=manifold_dim,
    )
