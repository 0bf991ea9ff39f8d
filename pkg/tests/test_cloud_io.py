import numpy as np
import pytest

from lidarmarks import synth
from lidarmarks.cloud import empty_cloud
from lidarmarks.cloud_io import (read_cloud, read_labels, write_cloud,
                                 write_labels)
from lidarmarks.errors import CorruptionError, SchemaError

from conftest import cloud_from_xyz, plane_grid


def sample_cloud():
    xyz = plane_grid(6, 8, z=-1.9)
    refl = np.round(np.linspace(0, 255, xyz.shape[0]))
    inten = np.linspace(0.5, 900.25, xyz.shape[0]).astype(np.float32)
    return cloud_from_xyz(xyz, reflectivity=refl, intensity=inten, n_cols=8)


def test_binary_round_trip_bit_identical(tmp_path):
    c = sample_cloud()
    p1, p2 = tmp_path / "a.cloud", tmp_path / "b.cloud"
    write_cloud(c, p1, layout="binary")
    c2 = read_cloud(p1)
    assert c2.same_points(c)
    write_cloud(c2, p2, layout="binary")
    assert p1.read_bytes() == p2.read_bytes()


def test_binary_round_trip_synthetic_frame(tmp_path):
    cloud, _ = synth.generate(synth.SceneConfig(n_cols=256, seed=3, frame_id="rt"))
    p1, p2 = tmp_path / "a.cloud", tmp_path / "b.cloud"
    write_cloud(cloud, p1, layout="binary")
    back = read_cloud(p1)
    assert back.same_points(cloud)
    write_cloud(back, p2, layout="binary")
    assert p1.read_bytes() == p2.read_bytes()


def test_text_round_trip_within_tolerance(tmp_path):
    c = sample_cloud()
    p = tmp_path / "a.cloud"
    write_cloud(c, p, layout="text")
    c2 = read_cloud(p)
    for f in ("x", "y", "z", "r"):
        assert np.allclose(getattr(c2, f), getattr(c, f), atol=1e-6, rtol=0)
    assert np.array_equal(c2.reflectivity, c.reflectivity)
    assert np.array_equal(c2.ring, c.ring)
    assert np.array_equal(c2.col, c.col)


def test_text_row_count_matches_header(tmp_path):
    cloud, _ = synth.generate(synth.SceneConfig(n_cols=128, dropout_prob=0.1,
                                                seed=5, frame_id="rows"))
    p = tmp_path / "a.cloud"
    write_cloud(cloud, p, layout="text")
    lines = p.read_text().splitlines()
    header_end = lines.index("DATA text")
    assert len(lines) - header_end - 1 == len(cloud)
    assert f"COUNT {len(cloud)}" in lines


def test_write_is_deterministic(tmp_path):
    c = sample_cloud()
    p1, p2 = tmp_path / "a.cloud", tmp_path / "b.cloud"
    for layout in ("binary", "text"):
        write_cloud(c, p1, layout=layout)
        write_cloud(c, p2, layout=layout)
        assert p1.read_bytes() == p2.read_bytes()


def test_empty_cloud_round_trip(tmp_path):
    p = tmp_path / "empty.cloud"
    write_cloud(empty_cloud(16, 32), p, layout="binary")
    c = read_cloud(p)
    assert len(c) == 0 and c.n_layers == 16 and c.n_cols == 32


def test_missing_required_field_names_it(tmp_path):
    p = tmp_path / "bad.cloud"
    p.write_text(
        "FIELDS x y z range intensity ring col valid\n"
        "COUNT 0\nLAYERS 4\nCOLS 4\nDATA text\n"
    )
    with pytest.raises(SchemaError, match="reflectivity"):
        read_cloud(p)


def test_unknown_field_rejected(tmp_path):
    p = tmp_path / "bad.cloud"
    p.write_text(
        "FIELDS x y z range intensity reflectivity ring col valid bogus\n"
        "COUNT 0\nLAYERS 4\nCOLS 4\nDATA text\n"
    )
    with pytest.raises(SchemaError, match="bogus"):
        read_cloud(p)


def test_truncated_binary_reports_offset(tmp_path):
    c = sample_cloud()
    p = tmp_path / "a.cloud"
    write_cloud(c, p, layout="binary")
    data = p.read_bytes()
    p.write_bytes(data[:-10])
    with pytest.raises(CorruptionError) as exc:
        read_cloud(p)
    assert exc.value.byte_offset == len(data) - 10


def test_trailing_bytes_rejected(tmp_path):
    c = sample_cloud()
    p = tmp_path / "a.cloud"
    write_cloud(c, p, layout="binary")
    p.write_bytes(p.read_bytes() + b"xx")
    with pytest.raises(CorruptionError):
        read_cloud(p)


def test_ring_exceeding_layer_count_rejected(tmp_path):
    p = tmp_path / "bad.cloud"
    p.write_text(
        "FIELDS x y z range intensity reflectivity ring col valid\n"
        "COUNT 1\nLAYERS 4\nCOLS 4\nDATA text\n"
        "0 0 -2 2 1 10 4 0 1\n"
    )
    with pytest.raises(SchemaError, match="layer count"):
        read_cloud(p)


def test_count_mismatch_rejected(tmp_path):
    p = tmp_path / "bad.cloud"
    p.write_text(
        "FIELDS x y z range intensity reflectivity ring col valid\n"
        "COUNT 2\nLAYERS 4\nCOLS 4\nDATA text\n"
        "0 0 -2 2 1 10 0 0 1\n"
    )
    with pytest.raises(SchemaError, match="COUNT"):
        read_cloud(p)


def test_labels_round_trip(tmp_path):
    labels = np.array(["road", "marking", "other", "marking", "road"])
    p = tmp_path / "a.labels"
    write_labels(labels, p)
    back = read_labels(p, expected_count=5)
    assert np.array_equal(back, labels)
    assert int(np.sum(back == "marking")) == 2


def test_labels_count_mismatch(tmp_path):
    p = tmp_path / "a.labels"
    write_labels(["road", "other"], p)
    with pytest.raises(SchemaError, match="count"):
        read_labels(p, expected_count=5)


def test_labels_unknown_token(tmp_path):
    p = tmp_path / "a.labels"
    p.write_text("road\nlane\n")
    with pytest.raises(SchemaError, match="lane"):
        read_labels(p)
    with pytest.raises(SchemaError):
        write_labels(["tree"], tmp_path / "b.labels")


def test_frame_id_round_trip(tmp_path):
    c = sample_cloud()
    p = tmp_path / "a.cloud"
    write_cloud(c, p, layout="binary")
    assert read_cloud(p).frame_id == "test"
