"""Point clouds, voxel-grid downsampling and exact nearest-neighbour search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels

LEAF_SIZE = 8


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Immutable ``(n, 3)`` array of finite points in metres."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (n, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def transformed(self, T) -> PointCloud:
        return PointCloud(T.apply(self.points))

    def bounding_box(self):
        return self.points.min(axis=0), self.points.max(axis=0)


def voxel_downsample(cloud: PointCloud, voxel: float) -> PointCloud:
    """Replace the points of each occupied ``voxel``-sized cell by their centroid.

    Cells are indexed by ``floor(coord / voxel)``; output rows follow the
    lexicographic order of the cell indices.
    """
    if not voxel > 0:
        raise ValueError(f"voxel size must be positive, got {voxel}")
    if len(cloud) == 0:
        raise ValueError("cannot downsample an empty cloud")
    keys = np.floor(cloud.points / voxel).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((counts.size, 3))
    np.add.at(sums, inverse, cloud.points)
    centroids = sums / counts[:, None]
    # a centroid can round one ulp outside the input's extent
    lo, hi = cloud.bounding_box()
    return PointCloud(np.clip(centroids, lo, hi))


class KdIndex:
    """Balanced kd-tree snapshot of a cloud answering exact 1-NN queries.

    Ties between equidistant points resolve to the lowest point id.
    """

    def __init__(self, cloud: PointCloud, leaf_size: int = LEAF_SIZE):
        if len(cloud) == 0:
            raise ValueError("cannot index an empty cloud")
        self.cloud = cloud
        self.points = cloud.points
        self.leaf_size = int(leaf_size)
        perm, split_dim = _build_tree(self.points, self.leaf_size)
        self.tree_ids = perm
        self.tree_points = np.ascontiguousarray(self.points[perm])
        self.split_dim = split_dim

    def __len__(self):
        return self.points.shape[0]

    def query(self, queries):
        """Nearest ids and Euclidean distances for an ``(m, 3)`` array."""
        ids, d2 = kernels.query(self, np.asarray(queries, dtype=np.float64).reshape(-1, 3))
        return ids, np.sqrt(d2)

    def query_transformed(self, source, rotation, translation):
        """Nearest ids and *squared* distances of ``rotation @ s + translation``."""
        return kernels.query_transformed(self, source, rotation, translation)


def _build_tree(points: np.ndarray, leaf_size: int):
    n = points.shape[0]
    perm = np.arange(n, dtype=np.int64)
    split_dim = np.full(n, -1, dtype=np.int8)
    stack = [(0, n)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo <= leaf_size:
            continue
        sub = perm[lo:hi]
        block = points[sub]
        dim = int(np.argmax(block.max(axis=0) - block.min(axis=0)))
        mid = (lo + hi) // 2
        order = np.argpartition(block[:, dim], mid - lo, kind="introselect")
        perm[lo:hi] = sub[order]
        split_dim[mid] = dim
        stack.append((lo, mid))
        stack.append((mid + 1, hi))
    return perm, split_dim


def build_index(cloud: PointCloud) -> KdIndex:
    return KdIndex(cloud)


def nearest(index: KdIndex, q) -> tuple[int, float]:
    """``(point_id, distance)`` of the indexed point closest to ``q``."""
    q = np.asarray(q, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(q)):
        raise ValueError("query point must be finite")
    ids, dist = index.query(q[None, :])
    return int(ids[0]), float(dist[0])
