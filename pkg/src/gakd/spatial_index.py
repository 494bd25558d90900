"""Voxel hash over the mesh bounding box for constant-time nearest-face lookup."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh import Face, TriangleMesh


class OutOfBoundsError(LookupError):
    """Query point lies outside the indexed volume (the vehicle left the terrain)."""


class CapacityError(ValueError):
    pass


DEFAULT_MAX_VOXELS = 20_000_000
_KD_CANDIDATES = 8


@dataclass(frozen=True)
class VoxelGrid:
    origin: np.ndarray
    voxel_size: float
    dims: tuple[int, int, int]
    table: np.ndarray  # int32 face id per voxel, shape == dims

    def centers(self) -> np.ndarray:
        ii, jj, kk = np.meshgrid(*(np.arange(d) for d in self.dims), indexing="ij")
        idx = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
        return self.origin + (idx + 0.5) * self.voxel_size

    def lookup(self, points: np.ndarray) -> np.ndarray:
        """Face id for each row of ``points``; -1 where the point is outside coverage."""
        points = np.asarray(points, dtype=np.float64)
        rel = np.floor((points - self.origin) / self.voxel_size)
        dx, dy, dz = self.dims
        i, j, k = rel[..., 0], rel[..., 1], rel[..., 2]
        inside = (i >= 0) & (i < dx) & (j >= 0) & (j < dy) & (k >= 0) & (k < dz)
        flat = np.where(inside, (i * dy + j) * dz + k, 0).astype(np.intp)
        return np.where(inside, self.table.ravel()[flat], -1)


def _sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d0 = a[..., 0] - b[..., 0]
    d1 = a[..., 1] - b[..., 1]
    d2 = a[..., 2] - b[..., 2]
    return d0 * d0 + d1 * d1 + d2 * d2


def brute_force_nearest(centroids: np.ndarray, points: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Exhaustive nearest-centroid search; ties go to the lowest face id."""
    points = np.atleast_2d(points)
    out = np.empty(len(points), dtype=np.int64)
    for s in range(0, len(points), chunk):
        d = _sq_dist(points[s:s + chunk, None, :], centroids[None, :, :])
        out[s:s + chunk] = np.argmin(d, axis=1)
    return out


def _nearest_with_ties(centroids: np.ndarray, tree: cKDTree, points: np.ndarray) -> np.ndarray:
    k = min(_KD_CANDIDATES, len(centroids))
    dist, cand = tree.query(points, k=k)
    if k == 1:
        dist, cand = dist[:, None], cand[:, None]
    exact = _sq_dist(points[:, None, :], centroids[cand])
    best = exact.min(axis=1)
    # lowest face id among exactly tied candidates
    ids = np.where(exact == best[:, None], cand, np.iinfo(np.int64).max).min(axis=1)
    if k < len(centroids):
        # more near-ties than candidates: fall back to the exhaustive scan for those voxels
        risky = np.flatnonzero(dist[:, -1] ** 2 <= best * (1 + 1e-9) + 1e-12)
        if risky.size:
            ids[risky] = brute_force_nearest(centroids, points[risky])
    return ids


def build_index(mesh: TriangleMesh, voxel_size: float | None = None, padding: float | None = None,
                max_voxels: int = DEFAULT_MAX_VOXELS) -> VoxelGrid:
    """Voxelize the padded mesh AABB and store the nearest face centroid for every voxel.

    Defaults: ``voxel_size`` is twice the mean edge length and ``padding`` is two voxels.
    """
    if mesh.n_faces == 0:
        raise ValueError("cannot index an empty mesh")
    if voxel_size is None:
        voxel_size = 2.0 * mesh.mean_edge_length()
    if not voxel_size > 0:
        raise ValueError("voxel_size must be > 0")
    if padding is None:
        padding = 2.0 * voxel_size
    lo, hi = mesh.aabb
    origin = lo - padding
    extent = (hi + padding) - origin
    dims = tuple(max(1, int(math.ceil(e / voxel_size))) for e in extent)
    count = dims[0] * dims[1] * dims[2]
    if count > max_voxels:
        raise CapacityError(f"{count} voxels exceed the budget of {max_voxels}; use a larger voxel_size")
    grid = VoxelGrid(origin=origin, voxel_size=float(voxel_size), dims=dims,
                     table=np.empty(dims, dtype=np.int32))
    centers = grid.centers()
    tree = cKDTree(mesh.face_centroids)
    ids = np.empty(len(centers), dtype=np.int64)
    step = 65536
    for s in range(0, len(centers), step):
        ids[s:s + step] = _nearest_with_ties(mesh.face_centroids, tree, centers[s:s + step])
    table = ids.reshape(dims).astype(np.int32)
    table.setflags(write=False)
    origin.setflags(write=False)
    return VoxelGrid(origin=origin, voxel_size=float(voxel_size), dims=dims, table=table)


def voxel_coords(grid: VoxelGrid, point) -> tuple[int, int, int]:
    rel = (np.asarray(point, dtype=np.float64) - grid.origin) / grid.voxel_size
    i, j, k = (int(math.floor(r)) for r in rel)
    if not (0 <= i < grid.dims[0] and 0 <= j < grid.dims[1] and 0 <= k < grid.dims[2]):
        raise OutOfBoundsError(f"point {np.asarray(point, dtype=float).tolist()} is outside the indexed volume")
    return i, j, k


def nearest_face(grid: VoxelGrid, mesh: TriangleMesh, point) -> Face:
    i, j, k = voxel_coords(grid, point)
    return mesh.face(grid.table[i, j, k])
