"""
Rotation and projection machinery for k-manifolds embedded in R^n.

The code is dimension-generic; (k, n) = (1, 2) and (2, 3) are the tested
configurations.
"""
from dataclasses import dataclass

import numpy as np

from errors import InvalidParameter

ORTHONORMAL_TOL = 1e-12


@dataclass
class GeneralRotation:
    """Rotation R whose rows are the tangents t_1..t_k followed by the normals n_1..n_{n-k}."""
    rotation: np.ndarray
    manifold_dim: int

    @property
    def embedding_dim(self) -> int:
        return self.rotation.shape[0]

    @property
    def tangents(self) -> np.ndarray:
        return self.rotation[:self.manifold_dim]

    @property
    def normals(self) -> np.ndarray:
        return self.rotation[self.manifold_dim:]

    @property
    def projector(self) -> np.ndarray:
        """Tangential projector P = I - sum_r n_r n_r^T."""
        return np.eye(self.embedding_dim) - self.normals.T @ self.normals

    def validate(self, tol: float = ORTHONORMAL_TOL) -> None:
        """Raise InvalidParameter unless R R^T = I within `tol`."""
        n = self.embedding_dim
        if self.rotation.shape != (n, n) or not 1 <= self.manifold_dim < n:
            raise InvalidParameter("rotation must be square with 1 <= k < n",
                                   shape=self.rotation.shape, k=self.manifold_dim)
        defect = np.abs(self.rotation @ self.rotation.T - np.eye(n)).max()
        if defect > tol:
            raise InvalidParameter("rotation rows are not orthonormal", defect=float(defect))

    @classmethod
    def from_vectors(cls, tangents, normals) -> "GeneralRotation":
        tangents = np.atleast_2d(np.asarray(tangents, dtype=float))
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        return cls(rotation=np.vstack([tangents, normals]), manifold_dim=len(tangents))


def tangential_offsets_general(frame: GeneralRotation, offsets: np.ndarray) -> np.ndarray:
    """First k components of R·δx for each row of `offsets` (shape (m, n) -> (m, k))."""
    offsets = np.atleast_2d(offsets)
    return offsets @ frame.tangents.T


def normal_offsets_general(frame: GeneralRotation, offsets: np.ndarray) -> np.ndarray:
    """Last n-k components of R·δx."""
    offsets = np.atleast_2d(offsets)
    return offsets @ frame.normals.T


def rotate_to_embedding(frame: GeneralRotation, tangent_rows: np.ndarray) -> np.ndarray:
    """
    Map tangent-plane gradient rows back to embedding coordinates.

    `tangent_rows` has shape (k, m), one row per tangent direction; the
    normal components are zero, so the result R^T·[c_t; 0] has shape (n, m).
    """
    return frame.tangents.T @ tangent_rows


def orthonormal_completion(normals: np.ndarray) -> np.ndarray:
    """
    Tangent basis orthogonal to the given normals.

    Coordinate axes are taken in order of decreasing projected length and
    Gram-Schmidt orthogonalized against the normals and each other, which pins
    the tangent basis deterministically.
    """
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    n = normals.shape[1]
    k = n - len(normals)
    projector = np.eye(n) - normals.T @ normals
    lengths = np.linalg.norm(projector, axis=0)
    tangents = []
    for axis in np.argsort(-lengths, kind="stable"):
        vec = projector[:, axis].copy()
        for t in tangents:
            vec -= (vec @ t) * t
        norm = np.linalg.norm(vec)
        if norm > 1e-8:
            tangents.append(vec / norm)
        if len(tangents) == k:
            break
    if len(tangents) < k:
        raise InvalidParameter("could not complete the normal space to a basis")
    return np.array(tangents)
