"""
Per-point tangent/normal frames and boundary normals.
"""
import time
from collections import deque
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import structlog

from errors import DegenerateNeighborhood
from highdim import GeneralRotation, orthonormal_completion, tangential_offsets_general
from pointcloud import Neighborhood, PointCloud

logger = structlog.get_logger()

# smallest admissible ratio of the k-th largest to the largest covariance eigenvalue
RANK_TOL = 1e-12


@dataclass
class Frame(GeneralRotation):
    """Orthonormal frame at one point; boundary points also carry ν."""
    boundary_normal: Optional[np.ndarray] = None


def gaussian_weights(offsets: np.ndarray, h_center: float, h_members: np.ndarray, wf: float) -> np.ndarray:
    """W_ij = exp(-W_F ‖δx‖² / (h_i² + h_j²))."""
    sq = np.einsum("ij,ij->i", offsets, offsets)
    return np.exp(-wf * sq / (h_center ** 2 + h_members ** 2))


def estimate_frames(cloud: PointCloud, neighborhoods: List[Neighborhood], wf: float = 2.0,
                    analytic: bool = False) -> List[Frame]:
    """
    Weighted-PCA frames.

    The smallest n-k eigenvectors of the weighted covariance of each support
    span the normal space. Normals of codimension-one clouds are oriented
    against the analytic normal when the cloud knows its surface, otherwise by
    breadth-first sign propagation from point 0. A codimension-one normal is
    then tilted by the slope of a weighted quadratic height fit over its
    tangent plane, so its error is O(h²) on one-sided supports too. With
    `analytic=True` the analytic normals are used directly.

    Raises:
        DegenerateNeighborhood: if a support cannot span the tangent space
    """
    start = time.time()
    k, n = cloud.manifold_dim, cloud.embedding_dim
    codim = n - k
    radii = np.array([hood.h for hood in neighborhoods])

    if analytic and cloud.surface is None:
        logger.warning("analytic_normals_unavailable", reason="cloud has no attached surface")
        analytic = False

    normals = np.empty((cloud.size, codim, n))
    if analytic:
        normals[:, 0, :] = cloud.surface.normal(cloud.positions)
    else:
        for hood in neighborhoods:
            normals[hood.center] = _pca_normals(cloud, hood, radii, k, wf)
        if codim == 1:
            if cloud.surface is not None:
                reference = cloud.surface.normal(cloud.positions)
                flip = np.einsum("ij,ij->i", normals[:, 0, :], reference) < 0
                normals[flip] *= -1.0
            else:
                _propagate_signs(normals, neighborhoods)
            for hood in neighborhoods:
                normals[hood.center, 0] = _height_fit_normal(cloud, hood, radii, normals[hood.center, 0], k, wf)

    frames = []
    for i in range(cloud.size):
        tangents = orthonormal_completion(normals[i])
        frames.append(Frame(rotation=np.vstack([tangents, normals[i]]), manifold_dim=k))

    logger.debug("frames_estimated", n_points=cloud.size, analytic=analytic, seconds=time.time() - start)
    return frames


def _pca_normals(cloud: PointCloud, hood: Neighborhood, radii: np.ndarray, k: int, wf: float) -> np.ndarray:
    i = hood.center
    if len(hood) < k + 1:
        raise DegenerateNeighborhood("support too small to span the tangent space",
                                     point=i, size=len(hood), k=k)
    points = cloud.positions[hood.members]
    weights = gaussian_weights(points - cloud.positions[i], radii[i], radii[hood.members], wf)
    mean = weights @ points / weights.sum()
    centered = points - mean
    covariance = (centered * weights[:, None]).T @ centered / weights.sum()

    values, vectors = np.linalg.eigh(covariance)
    n = len(values)
    if values[-1] <= 0 or values[n - k] / values[-1] < RANK_TOL:
        raise DegenerateNeighborhood("neighborhood covariance has rank below k", point=i,
                                     eigenvalues=values.tolist())
    return vectors[:, :n - k].T


def _height_fit_normal(cloud: PointCloud, hood: Neighborhood, radii: np.ndarray, normal: np.ndarray,
                      k: int, wf: float) -> np.ndarray:
    """Normal of the weighted quadratic fit z(τ) of the support heights over the plane ⊥ `normal`."""
    i = hood.center
    offsets = cloud.positions[hood.members] - cloud.positions[i]
    tangents = orthonormal_completion(normal[None, :])
    tau = offsets @ tangents.T
    heights = offsets @ normal
    scale = max(float(np.abs(tau).max()), 1e-300)
    columns = [np.ones(len(tau))] + [tau[:, a] / scale for a in range(k)]
    columns += [tau[:, a] * tau[:, b] / scale ** 2 for a in range(k) for b in range(a, k)]
    if len(tau) < len(columns):
        return normal
    root = np.sqrt(gaussian_weights(offsets, radii[i], radii[hood.members], wf))
    fit, *_ = np.linalg.lstsq(np.column_stack(columns) * root[:, None], heights * root, rcond=None)
    slope = fit[1:k + 1] / scale
    tilted = normal - slope @ tangents
    return tilted / np.linalg.norm(tilted)


def _propagate_signs(normals: np.ndarray, neighborhoods: List[Neighborhood]) -> None:
    visited = np.zeros(len(normals), dtype=bool)
    for seed in range(len(normals)):
        if visited[seed]:
            continue
        visited[seed] = True
        queue = deque([seed])
        while queue:
            i = queue.popleft()
            for j in neighborhoods[i].members:
                if visited[j]:
                    continue
                if normals[j, 0] @ normals[i, 0] < 0:
                    normals[j] *= -1.0
                visited[j] = True
                queue.append(j)


def boundary_normals(cloud: PointCloud, frames: List[Frame], neighborhoods: List[Neighborhood]) -> List[Frame]:
    """
    Attach the outward boundary normal ν to every boundary point.

    ν lies in the tangent plane, is orthogonal to the local boundary direction
    (principal axis of the boundary members of S_i) and points away from the
    centroid of the interior members. Interior frames are returned unchanged.

    Raises:
        DegenerateNeighborhood: if the support gives no outward direction
    """
    updated = list(frames)
    for i in np.flatnonzero(cloud.is_boundary):
        frame, hood = frames[i], neighborhoods[i]
        offsets = tangential_offsets_general(frame, cloud.positions[hood.members] - cloud.positions[i])
        flags = cloud.is_boundary[hood.members]
        inner = offsets[~flags]
        reference = inner.mean(axis=0) if len(inner) else offsets[1:].mean(axis=0) if len(offsets) > 1 else None
        if reference is None:
            raise DegenerateNeighborhood("isolated boundary point", point=int(i))

        outward = _outward_tangent(offsets[flags], reference, frame.manifold_dim)
        along = outward @ reference
        if abs(along) <= 1e-12 * max(np.abs(offsets).max(), 1e-300):
            raise DegenerateNeighborhood("support lies on one line through the boundary point", point=int(i))
        if along > 0:
            outward = -outward

        nu = outward @ frame.tangents
        updated[i] = Frame(rotation=frame.rotation, manifold_dim=frame.manifold_dim,
                           boundary_normal=nu / np.linalg.norm(nu))
    return updated


def _outward_tangent(edge_offsets: np.ndarray, reference: np.ndarray, k: int) -> np.ndarray:
    """Unit tangent-coordinate direction orthogonal to the boundary, unoriented."""
    if k == 1:
        return np.array([1.0])
    if len(edge_offsets) >= 2 and k == 2:
        moment = edge_offsets.T @ edge_offsets
        _, vectors = np.linalg.eigh(moment)
        along = vectors[:, -1]
        return np.array([-along[1], along[0]])
    # no boundary direction available: fall back to the centroid direction
    norm = np.linalg.norm(reference)
    if norm == 0:
        return np.zeros(k)
    return reference / norm
