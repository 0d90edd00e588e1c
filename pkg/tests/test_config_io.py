"""Config parsing, presets, the RF container format, rasters, and CSV export."""

import csv
import math

import numpy as np
import pytest

from ulmkit import config, io, localize, track
from ulmkit.config import ConfigError
from ulmkit.rfsim import Probe, RfFrame


# ---- config ----------------------------------------------------------------------

def test_config_round_trips_through_text():
    cfg = config.default_config()
    text = config.serialize_config(cfg)
    assert config.parse_config(text).items == cfg.items
    # every default key appears exactly once
    keys = [line.split("=")[0] for line in text.strip().splitlines()]
    assert sorted(keys) == sorted(config.DEFAULTS)


def test_overrides_comments_and_whitespace():
    cfg = config.parse_config(
        "# a comment\n"
        "\n"
        "phantom.n_frames = 12\n"
        "beamformer=das\n"
        "phantom.noise_enabled=false\n"
        "apod.f_number=1.5\n"
    )
    assert cfg["phantom.n_frames"] == 12
    assert isinstance(cfg["phantom.n_frames"], int)
    assert cfg["apod.f_number"] == 1.5
    assert cfg["phantom.noise_enabled"] is False
    assert cfg.beamformers() == ("DAS",)
    assert cfg["probe.fc"] == 15.625e6  # untouched defaults remain


def test_malformed_config_lines_are_rejected():
    with pytest.raises(ConfigError):
        config.parse_config("no_such.key=1\n")
    with pytest.raises(ConfigError):
        config.parse_config("phantom.n_frames=abc\n")
    with pytest.raises(ConfigError):
        config.parse_config("just a sentence\n")
    with pytest.raises(ConfigError):
        config.parse_config("phantom.noise_enabled=True\n")  # booleans are lowercase


def test_validation_catches_bad_settings():
    bad = [
        "phantom.n_frames=0",
        "phantom.preset=bogus",
        "grid.x_min=1e-3\ngrid.x_max=-1e-3",
        "grid.z_min=0.0",
        "grid.axial_refine=0",
        "detect.threshold_rel=1.0",
        "localize.methods=rs,teleport",
        "localize.methods=",
        "beamformer=vibes",
    ]
    for text in bad:
        with pytest.raises(ConfigError):
            config.parse_config(text + "\n")


def test_custom_canals_parse_and_validate():
    cfg = config.parse_config(
        "phantom.preset=custom\n"
        "canal.0.points=0:9.5e-3 0:12e-3\n"
        "canal.0.diameter=2e-5\n"
        "canal.0.speed=0.01\n"
        "canal.2.points=-1e-3:1e-2, 1e-3:1.1e-2\n"
        "canal.2.diameter=3e-5\n"
        "canal.2.speed=0.02\n"
    )
    canals = cfg.canals()
    assert len(canals) == 2
    assert canals[0].points == ((0.0, 9.5e-3), (0.0, 12e-3))
    assert canals[1].speed == 0.02
    with pytest.raises(ConfigError, match="missing"):
        config.parse_config("phantom.preset=custom\ncanal.0.points=0:1e-3 0:2e-3\ncanal.0.speed=0.01\n")
    with pytest.raises(ConfigError):
        config.parse_config("phantom.preset=custom\n")
    with pytest.raises(ConfigError, match="x:z"):
        config.parse_config(
            "phantom.preset=custom\ncanal.0.points=oops\ncanal.0.diameter=1e-5\ncanal.0.speed=0.01\n"
        )


def test_method_list_parsing():
    cfg = config.parse_config("localize.methods=rs , wa\n")
    assert cfg.methods() == ("rs", "wa")
    assert config.default_config().methods() == ("spinterp", "gaussfit", "wa", "rs")


def test_max_link_auto_tracks_the_fastest_canal():
    cfg = config.default_config()
    fastest = max(c.speed for c in cfg.canals())
    assert cfg.max_link() == pytest.approx(2.0 * fastest / 500.0)
    explicit = config.parse_config("track.max_link=5e-05\n")
    assert explicit.max_link() == 5e-05


def test_metrics_region_from_config_or_preset():
    probe = Probe()
    lam = probe.wavelength
    assert config.default_config().metrics_region() == (-5 * lam, 5 * lam, 10.0e-3, 12.0e-3)
    cfg = config.parse_config("metrics.region=-1e-3:1e-3:9e-3:10e-3\n")
    assert cfg.metrics_region() == (-1e-3, 1e-3, 9e-3, 10e-3)
    with pytest.raises(ConfigError):
        config.parse_config("metrics.region=1:2:3\n").metrics_region()


def test_twin_canals_straddle_the_center_column():
    probe = Probe()
    lam = probe.wavelength
    twins = config.preset_canals("twins", probe)
    assert len(twins) == 2
    (a, b) = twins
    assert a.points[0][0] == pytest.approx(-0.2 * lam)
    assert b.points[0][0] == pytest.approx(+0.2 * lam)
    assert a.points[0][1] == b.points[0][1]
    assert a.speed == b.speed
    demo = config.preset_canals("demo", probe)
    assert len(demo) == 4 and demo[:2] == twins
    assert len(config.preset_canals("line", probe)) == 1
    with pytest.raises(ConfigError):
        config.preset_canals("nope", probe)
    assert config.preset_region("custom", probe) is None


# ---- container -------------------------------------------------------------------

def small_frames(probe, n_frames, n_samples=50, seed=3):
    rng = np.random.default_rng(seed)
    return [
        RfFrame(samples=rng.normal(size=(n_samples, probe.n_elements)), frame_index=f, probe=probe, t0=0.0)
        for f in range(n_frames)
    ]


def test_container_round_trip_is_float32_exact(tmp_path):
    probe = Probe(n_elements=8)
    frames = small_frames(probe, 3)
    path = tmp_path / "rf.ulm"
    n_bytes = io.write_container(path, probe, frames)
    assert n_bytes == path.stat().st_size == 18 + 5 * 8 + 3 * 50 * 8 * 4
    reader = io.open_container(path)
    assert reader.probe == probe
    assert reader.n_frames == 3
    assert reader.n_samples == 50
    for f, frame in enumerate(reader.frames()):
        assert frame.frame_index == f
        expected = frames[f].samples.astype("<f4").astype(np.float64)
        assert np.array_equal(frame.samples, expected)
    with pytest.raises(ValueError):
        reader.frame(3)


def test_container_write_rejects_inconsistent_frames(tmp_path):
    probe = Probe(n_elements=8)
    with pytest.raises(ValueError):
        io.write_container(tmp_path / "a.ulm", probe, [])
    short = small_frames(probe, 1, n_samples=20)
    with pytest.raises(ValueError, match="record length"):
        io.write_container(tmp_path / "b.ulm", probe, small_frames(probe, 1) + short)
    other = Probe(n_elements=16)
    with pytest.raises(ValueError, match="probe"):
        io.write_container(tmp_path / "c.ulm", probe, small_frames(other, 1))


def test_container_header_corruption_is_detected(tmp_path):
    probe = Probe(n_elements=8)
    path = tmp_path / "rf.ulm"
    io.write_container(path, probe, small_frames(probe, 2))
    raw = path.read_bytes()

    bad_magic = tmp_path / "m.ulm"
    bad_magic.write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(ValueError, match="magic"):
        io.open_container(bad_magic)

    bad_version = tmp_path / "v.ulm"
    bad_version.write_bytes(raw[:4] + (2).to_bytes(2, "little") + raw[6:])
    with pytest.raises(ValueError, match="version"):
        io.open_container(bad_version)

    truncated = tmp_path / "t.ulm"
    truncated.write_bytes(raw[:-17])
    with pytest.raises(ValueError, match="length mismatch"):
        io.open_container(truncated)

    stub = tmp_path / "s.ulm"
    stub.write_bytes(raw[:20])
    with pytest.raises(ValueError, match="too short"):
        io.open_container(stub)


# ---- rasters ---------------------------------------------------------------------

def test_raster_round_trip_preserves_values_and_metadata(tmp_path):
    rng = np.random.default_rng(2)
    values = rng.uniform(0, 4, size=(9, 6))
    base = tmp_path / "density_das_rs"
    io.write_raster(base, values, pitch_x=9.856e-06, pitch_z=9.856e-06, origin_x=-1.77e-3, origin_z=8.67e-3)
    for ext in (".f32", ".txt", ".pgm"):
        assert (tmp_path / ("density_das_rs" + ext)).exists()
    back, meta = io.read_raster(base)
    assert np.array_equal(back, values.astype("<f4").astype(np.float64))
    assert meta["pitch_x"] == 9.856e-06
    assert meta["origin_x"] == -1.77e-3
    assert meta["origin_z"] == 8.67e-3


def test_pgm_is_8_bit_minmax_scaled(tmp_path):
    values = np.array([[0.0, 1.0], [2.0, 4.0]])
    path = tmp_path / "m.pgm"
    io.write_pgm(path, values)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n2 2\n255\n")
    pixels = raw[len(b"P5\n2 2\n255\n"):]
    assert list(pixels) == [0, 64, 128, 255]
    io.write_pgm(path, np.full((3, 3), 5.0))
    flat = path.read_bytes()
    assert flat.endswith(bytes(9))  # constant maps render black, not NaN


def test_raster_reader_rejects_dim_mismatch(tmp_path):
    base = tmp_path / "r"
    io.write_raster(base, np.zeros((4, 4)), 1.0, 1.0, 0.0, 0.0)
    sidecar = (tmp_path / "r.txt").read_text().replace("n_rows=4", "n_rows=5")
    (tmp_path / "r.txt").write_text(sidecar)
    with pytest.raises(ValueError, match="does not match"):
        io.read_raster(base)
    (tmp_path / "r.txt").write_text("n_cols=4\n")
    with pytest.raises(ValueError, match="missing"):
        io.read_raster(base)


# ---- CSV -------------------------------------------------------------------------

def test_detections_csv_is_lossless(tmp_path):
    dets = [
        localize.Detection(x=-1.23456789e-4, z=9.87e-3, intensity=0.5, frame_index=3, method="rs"),
        localize.Detection(x=1 / 3 * 1e-3, z=1.01e-2, intensity=1.25, frame_index=4, method="wa"),
    ]
    path = tmp_path / "d.csv"
    io.write_detections_csv(path, dets)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["frame_index", "x_m", "z_m", "intensity", "method"]
    assert len(rows) == 3
    for row, d in zip(rows[1:], dets):
        assert int(row[0]) == d.frame_index
        assert float(row[1]) == d.x  # repr round-trips exactly
        assert float(row[2]) == d.z
        assert float(row[3]) == d.intensity
        assert row[4] == d.method


def test_tracks_csv_repeats_last_velocity(tmp_path):
    dets = tuple(
        localize.Detection(x=0.0, z=9e-3 + k * 1e-4, intensity=1.0, frame_index=k, method="rs")
        for k in range(3)
    )
    tr = track.Track(id=5, detections=dets, velocities=((0.0, 0.05), (0.0, 0.06)))
    path = tmp_path / "t.csv"
    io.write_tracks_csv(path, [tr])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["track_id", "frame_index", "x_m", "z_m", "vx", "vz"]
    assert [r[0] for r in rows[1:]] == ["5", "5", "5"]
    assert [float(r[5]) for r in rows[1:]] == [0.05, 0.06, 0.06]


def test_metrics_csv_blanks_undefined_spread(tmp_path):
    from ulmkit.metrics import MetricReport

    reports = [
        MetricReport("DAS", "rs", 0.125, 0.03, 0.42),
        MetricReport("FDMAS", "wa", 0.2, 0.01, float("nan")),
    ]
    path = tmp_path / "m.csv"
    io.write_metrics_csv(path, reports)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["beamformer", "localizer", "local_contrast_mean", "local_contrast_std", "lateral_spread_lambda"]
    assert rows[1] == ["DAS", "rs", "0.125", "0.03", "0.42"]
    assert rows[2][4] == ""
    assert not math.isnan(float(rows[1][4]))
