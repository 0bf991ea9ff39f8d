import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lidarmarks.errors import ConfigError, StructuralError
from lidarmarks.threshold import (LayerStats, RingHistogram, extract_candidates,
                                  layer_stats, otsu_restricted, quantize,
                                  ring_histogram)

from conftest import cloud_from_xyz, plane_grid


def otsu_brute(freqs, t0):
    """Direct evaluation of the inter-class variance at every threshold.

    Independent of the incremental implementation: computes the class
    weights and means from prefix sums and scores every candidate split,
    returning the smallest argmax.
    """
    n = freqs.shape[0]
    k = np.arange(n, dtype=np.float64)
    pw = np.cumsum(freqs)
    pm = np.cumsum(k * freqs)
    best_t, best_sigma = -1, -1.0
    for t in range(max(int(t0), 1), n):
        w_lo = pw[t - 1]
        w_hi = pw[n - 1] - pw[t - 1]
        if w_lo <= 0.0 or w_hi <= 0.0:
            continue
        mu_lo = pm[t - 1] / w_lo
        mu_hi = (pm[n - 1] - pm[t - 1]) / w_hi
        sigma = w_lo * w_hi * (mu_lo - mu_hi) ** 2
        if sigma > best_sigma:
            best_sigma, best_t = sigma, t
    return best_t, best_sigma


def random_histogram(rng, n_bins=256):
    kind = rng.integers(0, 3)
    if kind == 0:
        counts = rng.integers(0, 50, n_bins).astype(float)
    elif kind == 1:
        counts = np.zeros(n_bins)
        for _ in range(rng.integers(1, 5)):
            mu = rng.uniform(0, n_bins - 1)
            sd = rng.uniform(1, 25)
            vals = quantize(rng.normal(mu, sd, rng.integers(20, 400)), n_bins)
            counts += np.bincount(vals, minlength=n_bins)
    else:
        counts = np.zeros(n_bins)
        occupied = rng.integers(0, n_bins, rng.integers(1, 8))
        counts[occupied] = rng.integers(1, 100, occupied.size)
    total = counts.sum()
    if total == 0:
        counts[0] = 1.0
        total = 1.0
    return RingHistogram(0, n_bins, counts / total, int(total))


def test_quantize_clamps_and_rounds():
    out = quantize([-5.0, 0.4, 0.6, 255.0, 400.0, 1023.0], 256)
    assert out.tolist() == [0, 0, 1, 255, 255, 255]


def test_histogram_two_value_example():
    h = ring_histogram(quantize([10, 10, 200, 200]), 256)
    assert h.freqs[10] == 0.5 and h.freqs[200] == 0.5
    assert h.freqs.sum() == 1.0 and h.n_samples == 4


def test_histogram_single_value():
    h = ring_histogram([7, 7, 7], 256)
    assert h.freqs[7] == 1.0


def test_histogram_empty_is_degenerate():
    h = ring_histogram([], 256)
    assert h.degenerate and h.n_samples == 0


def test_histogram_rejects_out_of_range():
    with pytest.raises(StructuralError):
        ring_histogram([300], 256)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 255), min_size=1, max_size=300))
def test_histogram_normalization_property(values):
    h = ring_histogram(values, 256)
    assert abs(h.freqs.sum() - 1.0) <= 1e-9
    assert np.all(h.freqs >= 0)


def test_layer_stats_examples():
    s = layer_stats([10, 10, 200, 200])
    assert s.mean == 105.0 and s.variance == 9025.0
    s = layer_stats([50, 50, 50])
    assert s.mean == 50.0 and s.variance == 0.0
    s = layer_stats([0, 255])
    assert s.mean == 127.5 and s.variance == 16256.25
    with pytest.raises(StructuralError):
        layer_stats([])


def test_layer_stats_matches_brute_force(rng):
    vals = rng.integers(0, 256, 500).astype(float)
    s = layer_stats(vals)
    assert s.mean == pytest.approx(sum(vals) / len(vals), abs=1e-9)
    brute_var = sum(v * v for v in vals) / len(vals) - (sum(vals) / len(vals)) ** 2
    assert s.variance == pytest.approx(brute_var, rel=1e-9)


def test_otsu_two_mass_tie_break():
    h = ring_histogram(quantize([10, 10, 200, 200]), 256)
    res = otsu_restricted(h, 0)
    bt, bs = otsu_brute(h.freqs, 0)
    assert res.t_star == bt == 11
    assert res.sigma_b2 == bs
    # inter-class variance is flat over the empty gap, smallest t wins
    assert not res.degenerate


def test_otsu_matches_brute_force_on_random_histograms():
    rng = np.random.default_rng(99)
    for _ in range(150):
        h = random_histogram(rng)
        res = otsu_restricted(h, 0)
        bt, _ = otsu_brute(h.freqs, 0)
        assert res.t_star == bt


def test_otsu_restriction_consistency():
    rng = np.random.default_rng(123)
    for _ in range(150):
        h = random_histogram(rng)
        t0 = int(rng.integers(0, 256))
        unrestricted = otsu_restricted(h, 0)
        restricted = otsu_restricted(h, t0)
        bt, _ = otsu_brute(h.freqs, t0)
        if restricted.degenerate:
            assert bt == -1
            continue
        assert restricted.t_star == bt
        if not unrestricted.degenerate and unrestricted.t_star >= max(t0, 1):
            assert restricted.t_star == unrestricted.t_star


def test_otsu_class_weight_and_mean_conservation():
    rng = np.random.default_rng(7)
    h = random_histogram(rng)
    k = np.arange(256, dtype=np.float64)
    total_mean = float((k * h.freqs).sum())
    for t in range(1, 256):
        w_lo = h.freqs[:t].sum()
        w_hi = h.freqs[t:].sum()
        assert abs(w_lo + w_hi - 1.0) <= 1e-9
        if w_lo > 0 and w_hi > 0:
            mu_lo = float((k[:t] * h.freqs[:t]).sum()) / w_lo
            mu_hi = float((k[t:] * h.freqs[t:]).sum()) / w_hi
            assert abs(w_lo * mu_lo + w_hi * mu_hi - total_mean) <= 1e-9


def test_otsu_single_bin_degenerate():
    h = ring_histogram([42] * 10, 256)
    assert otsu_restricted(h, 0).degenerate


def test_otsu_t0_beyond_occupied_degenerate():
    h = ring_histogram(quantize([30, 40, 50, 60]), 256)
    assert otsu_restricted(h, 100).degenerate
    assert otsu_restricted(h, 256).degenerate


def single_ring_cloud(reflectivity):
    n = len(reflectivity)
    xyz = np.column_stack([np.linspace(5, 25, n), np.zeros(n), np.full(n, -2.0)])
    return cloud_from_xyz(xyz, reflectivity=np.asarray(reflectivity, float),
                          n_cols=n, n_layers=2)


def test_extract_candidates_bimodal_ring():
    rng = np.random.default_rng(2024)
    asphalt = quantize(rng.normal(40, 5, 950))
    marking = quantize(rng.normal(180, 8, 50))
    refl = np.concatenate([asphalt, marking]).astype(float)
    c = single_ring_cloud(refl)
    mask, details = extract_candidates(c, t0_mode="mean_plus_std",
                                       return_details=True)
    picked = np.zeros(len(c), dtype=bool)
    picked[mask.indices] = True
    marking_rows = np.arange(950, 1000)
    asphalt_rows = np.arange(950)
    assert picked[marking_rows].mean() >= 0.90
    assert picked[asphalt_rows].mean() <= 0.02
    # the chosen threshold agrees with an exhaustive search over the window
    res = details[0]
    bt, _ = otsu_brute(ring_histogram(quantize(refl), 256).freqs, res.t0)
    assert res.t_star == bt


def test_extract_candidates_literal_mode_clamps_to_degenerate():
    # mean + variance exceeds the top bin for this mixture, and with no
    # mass in the top bin the ring yields nothing under the literal rule
    rng = np.random.default_rng(2024)
    refl = np.concatenate([quantize(rng.normal(40, 5, 950)),
                           quantize(rng.normal(180, 8, 50))]).astype(float)
    stats = layer_stats(quantize(refl))
    assert stats.mean + stats.variance > 255
    c = single_ring_cloud(refl)
    mask, details = extract_candidates(c, t0_mode="mean_plus_var",
                                       return_details=True)
    assert details[0].t0 == 255
    assert details[0].degenerate
    assert len(mask) == 0


def test_extract_candidates_unimodal_ring_literal_mode():
    # all-asphalt ring: t0 = mean + variance lands beyond the occupied
    # bins, so no candidates are produced
    rng = np.random.default_rng(11)
    refl = quantize(rng.normal(40, 5, 800)).astype(float)
    c = single_ring_cloud(refl)
    mask = extract_candidates(c, t0_mode="mean_plus_var")
    assert len(mask) == 0


def test_extract_candidates_empty_cloud():
    c = single_ring_cloud([50.0])
    empty = cloud_from_xyz(np.zeros((0, 3)))
    assert len(extract_candidates(empty)) == 0
    assert len(extract_candidates(c)) == 0  # single-value ring is degenerate


def test_candidate_values_meet_threshold(rng):
    refl = quantize(np.concatenate([rng.normal(60, 10, 500),
                                    rng.normal(190, 10, 40)])).astype(float)
    c = single_ring_cloud(refl)
    mask, details = extract_candidates(c, return_details=True)
    t_star = details[0].t_star
    q = quantize(refl)
    assert np.all(q[mask.indices] >= t_star)
    below = np.setdiff1d(np.arange(len(c)), mask.indices)
    assert np.all(q[below] < t_star)


def test_channel_symmetry_identical_values():
    rng = np.random.default_rng(4)
    refl = quantize(np.concatenate([rng.normal(50, 8, 400),
                                    rng.normal(200, 6, 30)])).astype(float)
    c = single_ring_cloud(refl)
    c2 = cloud_from_xyz(c.xyz(), reflectivity=refl, intensity=refl.copy(),
                        n_cols=c.n_cols, n_layers=c.n_layers)
    m_r = extract_candidates(c2, channel="reflectivity")
    m_i = extract_candidates(c2, channel="intensity")
    assert np.array_equal(m_r.indices, m_i.indices)


def test_unknown_channel_and_mode_rejected():
    c = single_ring_cloud([10.0, 20.0])
    with pytest.raises(ConfigError):
        extract_candidates(c, channel="amplitude")
    with pytest.raises(ConfigError):
        extract_candidates(c, t0_mode="median")
