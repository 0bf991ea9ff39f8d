"""Per-ring adaptive thresholding of a reflectance channel.

Each ring gets its own normalized histogram because beam calibration can
shift the response of the same surface between rings. The threshold is
the maximizer of the inter-class variance

    sigma_b^2(t) = w_lo(t) * w_hi(t) * (mu_lo(t) - mu_hi(t))^2

searched over t >= t0 only, where t0 is derived from the ring's mean and
variance. Points at or above the chosen threshold become road-marking
candidates; rings where no split point has mass on both sides yield no
candidates at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import IndexMask, PointCloud
from .errors import ConfigError, StructuralError

T0_MODES = ("mean_plus_var", "mean_plus_std")


@dataclass
class RingHistogram:
    ring: int
    n_bins: int
    freqs: np.ndarray
    n_samples: int

    @property
    def degenerate(self) -> bool:
        return self.n_samples == 0


@dataclass(frozen=True)
class LayerStats:
    mean: float
    variance: float


@dataclass(frozen=True)
class ThresholdResult:
    ring: int
    t_star: int
    t0: int
    sigma_b2: float
    degenerate: bool


def quantize(values, n_bins: int = 256) -> np.ndarray:
    """Map channel samples onto integer bins 0..n_bins-1.

    Values are rounded to the nearest integer and clamped, so unbounded
    raw intensities land in the top bin.
    """
    v = np.rint(np.asarray(values, dtype=np.float64))
    return np.clip(v, 0, n_bins - 1).astype(np.int64)


def ring_histogram(values, n_bins: int = 256, ring: int = -1) -> RingHistogram:
    """Normalized occupancy histogram of already-quantized samples."""
    v = np.asarray(values, dtype=np.int64)
    if v.size == 0:
        return RingHistogram(ring, n_bins, np.zeros(n_bins), 0)
    if v.min() < 0 or v.max() >= n_bins:
        raise StructuralError("histogram samples outside [0, n_bins)")
    counts = np.bincount(v, minlength=n_bins)
    return RingHistogram(ring, n_bins, counts / v.size, int(v.size))


def layer_stats(values) -> LayerStats:
    """Mean and population variance (E[x^2] - mean^2) of one ring's samples."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise StructuralError("layer statistics need at least one sample")
    mean = float(v.sum() / v.size)
    var = float((v * v).sum() / v.size - mean * mean)
    return LayerStats(mean, max(var, 0.0))


def otsu_restricted(hist: RingHistogram, t0: int) -> ThresholdResult:
    """Inter-class variance maximizer over t in [max(t0, 1), n_bins - 1].

    Class weights and first moments are seeded with prefix sums over bins
    below the start threshold and updated incrementally per candidate t.
    Ties break toward the smallest t. When every candidate split leaves
    one class empty the result is flagged degenerate.
    """
    h = hist.freqs
    n = hist.n_bins
    t_start = max(int(t0), 1)
    if hist.degenerate or t_start > n - 1:
        return ThresholdResult(hist.ring, -1, int(t0), 0.0, True)
    k = np.arange(n, dtype=np.float64)
    prefix_w = np.cumsum(h)
    prefix_m = np.cumsum(k * h)
    total_w = prefix_w[-1]
    total_m = prefix_m[-1]
    w_lo = float(prefix_w[t_start - 1])
    m_lo = float(prefix_m[t_start - 1])
    best_t = -1
    best_sigma = -1.0
    for t in range(t_start, n):
        w_hi = total_w - w_lo
        if w_lo > 0.0 and w_hi > 0.0:
            mu_lo = m_lo / w_lo
            mu_hi = (total_m - m_lo) / w_hi
            sigma = w_lo * w_hi * (mu_lo - mu_hi) ** 2
            if sigma > best_sigma:
                best_sigma = sigma
                best_t = t
        w_lo += h[t]
        m_lo += t * h[t]
    if best_t < 0:
        return ThresholdResult(hist.ring, -1, int(t0), 0.0, True)
    return ThresholdResult(hist.ring, best_t, int(t0), float(best_sigma), False)


def channel_values(cloud: PointCloud, channel: str) -> np.ndarray:
    if channel == "reflectivity":
        return np.asarray(cloud.reflectivity, dtype=np.float64)
    if channel == "intensity":
        return np.asarray(cloud.intensity, dtype=np.float64)
    raise ConfigError(f"unknown channel '{channel}'")


def _start_threshold(stats: LayerStats, t0_mode: str, n_bins: int) -> int:
    if t0_mode == "mean_plus_var":
        raw = stats.mean + stats.variance
    elif t0_mode == "mean_plus_std":
        raw = stats.mean + np.sqrt(stats.variance)
    else:
        raise ConfigError(f"unknown t0_mode '{t0_mode}'")
    return int(np.clip(np.rint(raw), 0, n_bins - 1))


def extract_candidates(cloud: PointCloud, channel: str = "reflectivity",
                       n_bins: int = 256, t0_mode: str = "mean_plus_std",
                       return_details: bool = False):
    """Per-ring thresholding of the selected channel.

    For every ring present in the cloud: quantize the channel, compute
    ring statistics, start the threshold search at the clamped
    mean-plus-variance (or mean-plus-std) value, and keep points whose
    quantized value is at or above the chosen threshold. Degenerate rings
    contribute nothing. Returns the union mask; with
    ``return_details=True`` also a {ring: ThresholdResult} dict.
    """
    values = channel_values(cloud, channel)
    q = quantize(values, n_bins)
    keep_rows = []
    details: dict[int, ThresholdResult] = {}
    present = np.unique(cloud.ring[cloud.valid]) if len(cloud) else []
    for i in present:
        rows = np.nonzero((cloud.ring == i) & cloud.valid)[0]
        ring_q = q[rows]
        stats = layer_stats(ring_q)
        t0 = _start_threshold(stats, t0_mode, n_bins)
        hist = ring_histogram(ring_q, n_bins, ring=int(i))
        res = otsu_restricted(hist, t0)
        details[int(i)] = res
        if not res.degenerate:
            keep_rows.append(rows[ring_q >= res.t_star])
    if keep_rows:
        idx = np.sort(np.concatenate(keep_rows))
    else:
        idx = np.zeros(0, dtype=np.int64)
    mask = IndexMask(idx, len(cloud), cloud.frame_id)
    if return_details:
        return mask, details
    return mask
