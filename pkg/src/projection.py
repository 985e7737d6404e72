"""
Projection of neighborhoods into the central tangent plane.

Only offset coordinates are produced; function values at projected sites are
the values at the original neighbors.
"""
from dataclasses import dataclass
from enum import Enum
from typing import List, Union

import numpy as np

from errors import InvalidParameter, NonTransversal
from frames import Frame
from highdim import normal_offsets_general, tangential_offsets_general
from pointcloud import Neighborhood, PointCloud

TRANSVERSAL_TOL = 1e-8


class ProjectionMode(Enum):
    CENTRAL_NORMAL = "central"
    NEIGHBOR_NORMAL = "neighbor"

    @classmethod
    def parse(cls, value: Union[str, "ProjectionMode"]) -> "ProjectionMode":
        if isinstance(value, cls):
            return value
        aliases = {"central": cls.CENTRAL_NORMAL, "central_normal": cls.CENTRAL_NORMAL,
                   "neighbor": cls.NEIGHBOR_NORMAL, "neighbor_normal": cls.NEIGHBOR_NORMAL}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise InvalidParameter(f"unknown projection mode '{value}'") from None


@dataclass
class ProjectedNeighborhood:
    center: int
    members: np.ndarray
    tangential_offsets: np.ndarray
    normal_offsets: np.ndarray
    h: float
    mode: ProjectionMode

    def __len__(self) -> int:
        return len(self.members)


def project(cloud: PointCloud, frames: List[Frame], neighborhood: Neighborhood,
            mode: Union[str, ProjectionMode] = ProjectionMode.CENTRAL_NORMAL) -> ProjectedNeighborhood:
    """
    Tangent-plane offsets of one support.

    Central mode rotates δx_ij by R_i. Neighbor mode first slides x_j along
    n_j onto the plane through x_i with normal n_i (codimension one only).

    Raises:
        NonTransversal: in neighbor mode when |n_j·n_i| < 1e-8
    """
    mode = ProjectionMode.parse(mode)
    i = neighborhood.center
    frame = frames[i]
    points = cloud.positions[neighborhood.members]
    offsets = points - cloud.positions[i]

    if mode is ProjectionMode.NEIGHBOR_NORMAL:
        if cloud.embedding_dim - cloud.manifold_dim != 1:
            raise InvalidParameter("neighbor-normal projection needs codimension one")
        n_i = frame.normals[0]
        n_j = np.array([frames[j].normals[0] for j in neighborhood.members])
        cosines = n_j @ n_i
        if np.any(np.abs(cosines) < TRANSVERSAL_TOL):
            bad = int(neighborhood.members[np.argmin(np.abs(cosines))])
            raise NonTransversal("neighbor normal is nearly tangent to the central plane",
                                 point=i, neighbor=bad)
        heights = offsets @ n_i
        offsets = offsets - (heights / cosines)[:, None] * n_j

    return ProjectedNeighborhood(
        center=i,
        members=neighborhood.members,
        tangential_offsets=tangential_offsets_general(frame, offsets),
        normal_offsets=normal_offsets_general(frame, offsets),
        h=neighborhood.h,
        mode=mode,
    )


def project_all(cloud: PointCloud, frames: List[Frame], neighborhoods: List[Neighborhood],
                mode: Union[str, ProjectionMode] = ProjectionMode.CENTRAL_NORMAL) -> List[ProjectedNeighborhood]:
    mode = ProjectionMode.parse(mode)
    return [project(cloud, frames, hood, mode) for hood in neighborhoods]
