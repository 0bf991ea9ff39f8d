"""Ring cutoff and height-band pre-filter.

Keeps only valid returns from the lower rings and inside a z band around
the expected road surface. The band is configured with positive depths
below the sensor origin (``z_low``/``z_high``), so the default keeps
``-z_high <= z <= -z_low``; ``z_band_absolute`` switches to the literal
``z_low <= z <= z_high`` reading for sensors with an upward offset frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import IndexMask, PointCloud
from .errors import ConfigError


@dataclass(frozen=True)
class PrefilterParams:
    max_ring: int = 30
    z_low: float = 1.44
    z_high: float = 2.44
    z_band_absolute: bool = False

    def __post_init__(self):
        if self.max_ring <= 0:
            raise ConfigError("max_ring must be positive")
        if not self.z_low < self.z_high:
            raise ConfigError("z_low must be below z_high")


def prefilter(cloud: PointCloud, params: PrefilterParams = PrefilterParams()) -> IndexMask:
    """Mask of valid points with ring < max_ring inside the height band."""
    if params.max_ring > cloud.n_layers:
        raise ConfigError(
            f"max_ring {params.max_ring} exceeds cloud layer count {cloud.n_layers}"
        )
    if params.z_band_absolute:
        lo, hi = params.z_low, params.z_high
    else:
        lo, hi = -params.z_high, -params.z_low
    keep = cloud.valid & (cloud.ring < params.max_ring) & (cloud.z >= lo) & (cloud.z <= hi)
    return IndexMask(np.nonzero(keep)[0], len(cloud), cloud.frame_id)
