"""Shared test helpers: small hand-built organized clouds."""

import numpy as np
import pytest

from lidarmarks.cloud import PointCloud


def cloud_from_xyz(xyz, reflectivity=None, intensity=None, n_layers=None,
                   n_cols=None, frame_id="test"):
    """Wrap an (n, 3) coordinate array into an organized cloud.

    Grid positions are assigned row-major, which satisfies the ordering
    and uniqueness invariants without implying any ray geometry.
    """
    xyz = np.asarray(xyz, dtype=np.float64)
    n = xyz.shape[0]
    if n_cols is None:
        n_cols = max(8, int(np.ceil(np.sqrt(n))))
    if n_layers is None:
        n_layers = max(1, (n + n_cols - 1) // n_cols)
    ring = np.arange(n) // n_cols
    col = np.arange(n) % n_cols
    r = np.linalg.norm(xyz, axis=1)
    if reflectivity is None:
        reflectivity = np.full(n, 50.0)
    if intensity is None:
        intensity = np.asarray(reflectivity, dtype=np.float64).copy()
    return PointCloud(
        x=xyz[:, 0], y=xyz[:, 1], z=xyz[:, 2], r=r,
        intensity=np.asarray(intensity), reflectivity=np.asarray(reflectivity),
        ring=ring, col=col, valid=np.ones(n, dtype=bool),
        n_layers=int(n_layers), n_cols=int(n_cols), frame_id=frame_id,
    )


def plane_grid(nx=30, ny=30, z=-2.0, spacing=0.2, x0=0.0, y0=0.0):
    """Regular grid of points on a horizontal plane."""
    xs = x0 + spacing * np.arange(nx)
    ys = y0 + spacing * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(z))])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
