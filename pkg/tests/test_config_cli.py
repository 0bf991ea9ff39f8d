import numpy as np
import pytest

from lidarmarks import cloud_io
from lidarmarks.cli import main
from lidarmarks.config import default_config, load_config
from lidarmarks.errors import ConfigError


def test_defaults_follow_experiment_values():
    cfg = default_config()
    assert cfg.prefilter.max_ring == 30
    assert cfg.prefilter.z_low == 1.44
    assert cfg.prefilter.z_high == 2.44
    assert cfg.ground.th_plane == 0.30
    assert cfg.ground.k_neighbors == 30
    assert cfg.ground.th_angle_deg == 2.0
    assert cfg.ground.th_curve == 1.0
    assert cfg.threshold.n_bins == 256
    assert cfg.threshold.channel == "reflectivity"
    assert cfg.lines.th_lines == 0.15
    assert cfg.lines.max_lines == 10
    assert cfg.lines.min_support == 10


def test_load_config_round_trip(tmp_path):
    p = tmp_path / "exp.ini"
    p.write_text(
        "[prefilter]\nmax_ring = 25\nz_low = 1.30\nz_high = 2.50\n"
        "[ground]\nth_plane = 0.2\nmax_iter = 99\nseed = 4\n"
        "k_neighbors = 20\nth_angle_deg = 3.0\nth_curve = 0.5\n"
        "[threshold]\nn_bins = 128\nchannel = intensity\nt0_mode = mean_plus_var\n"
        "[lines]\nth_lines = 0.1\nmax_lines = 5\nmin_support = 8\n"
        "max_iter = 50\nseed = 11\n"
        "[pipeline]\nworkers = 2\n"
    )
    cfg = load_config(p)
    assert cfg.prefilter.max_ring == 25
    assert cfg.ground.max_iter == 99 and cfg.ground.seed == 4
    assert cfg.threshold.n_bins == 128 and cfg.threshold.channel == "intensity"
    assert cfg.threshold.t0_mode == "mean_plus_var"
    assert cfg.lines.rng_seed == 11 and cfg.lines.max_lines == 5
    assert cfg.workers == 2


def test_load_config_rejects_unknown_key(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[ground]\nth_plane = 0.2\nth_plain = 0.3\n")
    with pytest.raises(ConfigError, match="th_plain"):
        load_config(p)


def test_load_config_rejects_unknown_section(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[grounds]\nth_plane = 0.2\n")
    with pytest.raises(ConfigError, match="grounds"):
        load_config(p)


def test_load_config_rejects_bad_value(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[ground]\nmax_iter = soon\n")
    with pytest.raises(ConfigError, match="max_iter"):
        load_config(p)


def test_cli_synth_run_eval_cycle(tmp_path, capsys):
    out = tmp_path / "frames"
    assert main(["synth", "--profile", "test_track", "--frames", "1",
                 "--seed", "3", "--out", str(out)]) == 0
    clouds = sorted(out.glob("*.cloud"))
    labels = sorted(out.glob("*.labels"))
    assert len(clouds) == 1 and len(labels) == 1

    rc = main(["run", str(clouds[0]), "--truth", str(labels[0]),
               "--out", str(tmp_path / "results")])
    assert rc == 0
    captured = capsys.readouterr().out
    assert "accepted lines" in captured
    assert "precision" in captured
    pred = tmp_path / "results" / (clouds[0].stem + ".pred_labels")
    lines_file = tmp_path / "results" / (clouds[0].stem + ".lines")
    assert pred.exists() and lines_file.exists()

    rc = main(["eval", "--pred", str(pred), "--truth", str(labels[0])])
    assert rc == 0
    assert "dataset" in capsys.readouterr().out


def test_cli_batch_over_directory(tmp_path, capsys):
    out = tmp_path / "frames"
    main(["synth", "--profile", "test_track", "--frames", "2", "--seed", "5",
          "--out", str(out)])
    rc = main(["batch", "--dir", str(out), "--out", str(tmp_path / "rep")])
    assert rc == 0
    assert "0 failures" in capsys.readouterr().out
    assert (tmp_path / "rep" / "report.tsv").exists()
    assert (tmp_path / "rep" / "report.json").exists()


def test_cli_batch_profile_and_compare(tmp_path, capsys):
    rc = main(["batch", "--profile", "test_track", "--frames", "1",
               "--seed", "2"])
    assert rc == 0
    rc = main(["compare-channels", "--profile", "test_track", "--frames", "1",
               "--seed", "2", "--out", str(tmp_path / "cmp")])
    assert rc == 0
    table = (tmp_path / "cmp" / "report.tsv").read_text()
    assert "reflectivity" in table and "intensity" in table


def test_cli_missing_file_is_data_error(capsys):
    assert main(["run", "/nonexistent/file.cloud"]) == 2


def test_cli_bad_config_is_usage_error(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[ground]\nbogus = 1\n")
    cloud = tmp_path / "c.cloud"
    from lidarmarks.synth import SceneConfig, generate
    c, _ = generate(SceneConfig(n_cols=64, seed=0))
    cloud_io.write_cloud(c, cloud)
    assert main(["run", str(cloud), "--config", str(p)]) == 1


def test_cli_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["batch"])  # missing required source argument
    assert exc.value.code == 1


def test_cli_corrupt_cloud_is_data_error(tmp_path):
    p = tmp_path / "bad.cloud"
    p.write_text("FIELDS x y\nCOUNT 1\nLAYERS 4\nCOLS 4\nDATA text\n0 0\n")
    assert main(["run", str(p)]) == 2


def test_cli_synth_text_layout(tmp_path):
    out = tmp_path / "frames"
    assert main(["synth", "--frames", "1", "--seed", "1", "--out", str(out),
                 "--layout", "text"]) == 0
    cloud_path = next(out.glob("*.cloud"))
    c = cloud_io.read_cloud(cloud_path)
    assert len(c) > 0
