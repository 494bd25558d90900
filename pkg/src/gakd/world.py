from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Face, TriangleMesh
from .spatial_index import VoxelGrid, build_index, nearest_face


@dataclass(frozen=True)
class World:
    """A mesh together with its voxel index; immutable and shareable across rollouts."""

    mesh: TriangleMesh
    grid: VoxelGrid

    @classmethod
    def build(cls, mesh: TriangleMesh, voxel_size: float | None = None,
              padding: float | None = None) -> "World":
        return cls(mesh, build_index(mesh, voxel_size, padding))

    def face_at(self, point) -> Face:
        return nearest_face(self.grid, self.mesh, point)

    def face_ids(self, points: np.ndarray) -> np.ndarray:
        return self.grid.lookup(points)

    def contains(self, point) -> bool:
        return bool(self.grid.lookup(np.asarray(point, dtype=np.float64)[None, :])[0] >= 0)
