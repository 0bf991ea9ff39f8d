"""Organized point-cloud data model and index bookkeeping.

A cloud is a struct-of-arrays container for one full revolution of a
multi-beam spinning LIDAR: per point it stores spatial coordinates, range,
intensity, reflectivity, the (ring, col) grid position and a validity flag.
Points are kept in row-major (ring, col) order and clouds are immutable
after construction, so they can be shared freely across workers.

Subsets are expressed as ``IndexMask`` objects holding sorted indices into
a parent cloud. Masks created at different pipeline stages compose, which
keeps every stage's output expressed in the original frame's indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import StructuralError


class LidarPoint(NamedTuple):
    x: float
    y: float
    z: float
    r: float
    intensity: float
    reflectivity: float
    ring: int
    col: int
    valid: bool = True


_RANGE_RTOL = 1e-3


@dataclass
class PointCloud:
    """One complete revolution, row-major by (ring, col).

    All arrays share the same length. ``valid`` marks real returns;
    no-return slots kept by a sensor adapter carry ``valid=False`` and are
    excluded from every downstream statistic.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    r: np.ndarray
    intensity: np.ndarray
    reflectivity: np.ndarray
    ring: np.ndarray
    col: np.ndarray
    valid: np.ndarray
    n_layers: int = 64
    n_cols: int = 1024
    frame_id: str = ""

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.z = np.asarray(self.z, dtype=np.float64)
        self.r = np.asarray(self.r, dtype=np.float64)
        self.intensity = np.asarray(self.intensity, dtype=np.float32)
        self.reflectivity = np.asarray(self.reflectivity, dtype=np.float64)
        self.ring = np.asarray(self.ring, dtype=np.int32)
        self.col = np.asarray(self.col, dtype=np.int32)
        self.valid = np.asarray(self.valid, dtype=bool)
        n = self.x.shape[0]
        for name in ("y", "z", "r", "intensity", "reflectivity", "ring", "col", "valid"):
            if getattr(self, name).shape != (n,):
                raise StructuralError(f"field '{name}' length differs from x")
        if self.n_layers <= 0 or self.n_cols <= 0:
            raise StructuralError("n_layers and n_cols must be positive")
        self._validate()
        for name in ("x", "y", "z", "r", "intensity", "reflectivity", "ring", "col", "valid"):
            getattr(self, name).setflags(write=False)

    def _validate(self):
        if len(self) == 0:
            return
        if self.ring.min() < 0 or self.ring.max() >= self.n_layers:
            raise StructuralError("ring index outside [0, n_layers)")
        if self.col.min() < 0 or self.col.max() >= self.n_cols:
            raise StructuralError("col index outside [0, n_cols)")
        key = self.ring.astype(np.int64) * self.n_cols + self.col
        if np.any(np.diff(key) <= 0):
            raise StructuralError("points must be unique and sorted row-major by (ring, col)")
        v = self.valid
        if np.any(v):
            if self.r[v].min() < 0:
                raise StructuralError("negative range on a valid return")
            refl = self.reflectivity[v]
            if refl.min() < 0 or refl.max() > 255:
                raise StructuralError("reflectivity outside [0, 255] on a valid return")
            if self.intensity[v].min() < 0:
                raise StructuralError("negative intensity on a valid return")
            norm = np.sqrt(self.x[v] ** 2 + self.y[v] ** 2 + self.z[v] ** 2)
            tol = _RANGE_RTOL * np.maximum(1.0, self.r[v])
            if np.any(np.abs(norm - self.r[v]) > tol):
                raise StructuralError("range field inconsistent with coordinates")

    def __len__(self) -> int:
        return self.x.shape[0]

    def point(self, k: int) -> LidarPoint:
        return LidarPoint(
            float(self.x[k]), float(self.y[k]), float(self.z[k]), float(self.r[k]),
            float(self.intensity[k]), float(self.reflectivity[k]),
            int(self.ring[k]), int(self.col[k]), bool(self.valid[k]),
        )

    def __iter__(self) -> Iterator[LidarPoint]:
        for k in range(len(self)):
            yield self.point(k)

    def xyz(self) -> np.ndarray:
        """(n, 3) coordinate array (copy)."""
        return np.column_stack([self.x, self.y, self.z])

    def same_points(self, other: "PointCloud") -> bool:
        """Bitwise equality of all per-point fields and grid metadata."""
        if len(self) != len(other):
            return False
        if (self.n_layers, self.n_cols) != (other.n_layers, other.n_cols):
            return False
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("x", "y", "z", "r", "intensity", "reflectivity", "ring", "col", "valid")
        )

    @classmethod
    def from_points(cls, points, n_layers: int, n_cols: int, frame_id: str = "") -> "PointCloud":
        pts = sorted(points, key=lambda p: (p.ring, p.col))
        if not pts:
            z = np.zeros(0)
            return cls(z, z, z, z, z, z, z, z, np.zeros(0, bool), n_layers, n_cols, frame_id)
        cols = list(zip(*pts))
        return cls(
            np.array(cols[0]), np.array(cols[1]), np.array(cols[2]), np.array(cols[3]),
            np.array(cols[4]), np.array(cols[5]),
            np.array(cols[6]), np.array(cols[7]), np.array(cols[8], dtype=bool),
            n_layers, n_cols, frame_id,
        )


def empty_cloud(n_layers: int = 64, n_cols: int = 1024, frame_id: str = "") -> PointCloud:
    z = np.zeros(0)
    return PointCloud(z, z, z, z, z, z, z, z, np.zeros(0, bool), n_layers, n_cols, frame_id)


@dataclass(frozen=True)
class IndexMask:
    """Sorted, unique indices into a parent cloud of ``parent_size`` points."""

    indices: np.ndarray
    parent_size: int
    parent_frame: str = ""

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        object.__setattr__(self, "indices", idx)
        if idx.size:
            if idx.min() < 0 or idx.max() >= self.parent_size:
                raise StructuralError("mask index outside parent bounds")
            if np.any(np.diff(idx) <= 0):
                raise StructuralError("mask indices must be strictly increasing")
        self.indices.setflags(write=False)

    def __len__(self) -> int:
        return int(self.indices.size)

    def compose(self, inner: "IndexMask") -> "IndexMask":
        """Re-index ``inner`` (a mask into this mask's selection) through self."""
        if inner.parent_size != len(self):
            raise StructuralError(
                f"inner mask parent size {inner.parent_size} != selection size {len(self)}"
            )
        return IndexMask(self.indices[inner.indices], self.parent_size, self.parent_frame)

    def is_subset_of(self, other: "IndexMask") -> bool:
        if self.parent_size != other.parent_size:
            return False
        return bool(np.all(np.isin(self.indices, other.indices, assume_unique=True)))


def full_mask(cloud: PointCloud) -> IndexMask:
    return IndexMask(np.arange(len(cloud), dtype=np.int64), len(cloud), cloud.frame_id)


def select(cloud: PointCloud, mask: IndexMask) -> PointCloud:
    """Return the sub-cloud holding exactly the masked points, order preserved.

    Grid metadata (n_layers, n_cols, frame_id) is carried over unchanged so
    ring/col coordinates keep their meaning in the parent frame.
    """
    if mask.parent_size != len(cloud):
        raise StructuralError(
            f"mask parent size {mask.parent_size} does not match cloud size {len(cloud)}"
        )
    idx = mask.indices
    return PointCloud(
        cloud.x[idx], cloud.y[idx], cloud.z[idx], cloud.r[idx],
        cloud.intensity[idx], cloud.reflectivity[idx],
        cloud.ring[idx], cloud.col[idx], cloud.valid[idx],
        cloud.n_layers, cloud.n_cols, cloud.frame_id,
    )


def ring_indices(cloud: PointCloud, i: int) -> np.ndarray:
    """Indices of the valid points on ring ``i`` (ascending)."""
    if not 0 <= i < cloud.n_layers:
        raise StructuralError(f"ring {i} outside [0, {cloud.n_layers})")
    return np.nonzero((cloud.ring == i) & cloud.valid)[0]


def points_of_ring(cloud: PointCloud, i: int) -> list[LidarPoint]:
    """The valid points of ring ``i``, in column order."""
    return [cloud.point(k) for k in ring_indices(cloud, i)]
