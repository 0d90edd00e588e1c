"""Command-line front end: simulate, run, evaluate, inspect, error paths."""

import csv
import re

import numpy as np
import pytest

from ulmkit import cli, config, io

RUN_CFG = """\
phantom.preset=twins
phantom.n_frames=20
phantom.noise_enabled=false
grid.x_min=-7.8848e-4
grid.x_max=7.8848e-4
grid.z_min=9.4e-3
grid.z_max=12.6e-3
localize.methods=spinterp,rs
"""

SMALL_CFG = RUN_CFG.replace("phantom.n_frames=20", "phantom.n_frames=10") + "beamformer=das\nlocalize.methods=rs\n"


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One simulated container and two identical pipeline runs."""
    root = tmp_path_factory.mktemp("cliws")
    cfg = root / "run.cfg"
    cfg.write_text(RUN_CFG)
    container = root / "rf.ulm"
    assert cli.main(["simulate", str(cfg), str(container)]) == 0
    out1, out2 = root / "out1", root / "out2"
    assert cli.main(["run", str(cfg), str(container), str(out1)]) == 0
    assert cli.main(["run", str(cfg), str(container), str(out2)]) == 0
    return {"cfg": cfg, "container": container, "out1": out1, "out2": out2}


# ---- simulate / inspect ----------------------------------------------------------

def test_simulate_reports_and_reproduces(tmp_path, capsys):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("phantom.preset=twins\nphantom.n_frames=3\n")
    a, b = tmp_path / "a.ulm", tmp_path / "b.ulm"
    assert cli.main(["simulate", str(cfg), str(a)]) == 0
    out = capsys.readouterr().out
    m = re.fullmatch(rf"wrote {re.escape(str(a))}: 3 frames, 6 bubbles/frame, (\d+) bytes\n", out)
    assert m, out
    assert a.stat().st_size == int(m.group(1))
    assert cli.main(["simulate", str(cfg), str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_inspect_prints_the_header(workspace, capsys):
    assert cli.main(["inspect", str(workspace["container"])]) == 0
    reader = io.open_container(workspace["container"])
    assert capsys.readouterr().out == (
        "magic=ULMF version=1\n"
        f"n_frames=20\n"
        f"n_samples={reader.n_samples}\n"
        "n_channels=128\n"
        "pitch=0.00011\n"
        "fc=15625000.0\n"
        "fs=100000000.0\n"
        "c=1540.0\n"
        "frame_rate=500.0\n"
    )


# ---- run -------------------------------------------------------------------------

def expected_tree(beamformers=("das", "fdmas"), methods=("spinterp", "rs")):
    names = {"metrics.csv", "run.log"}
    raster_exts = (".f32", ".txt", ".pgm")
    for bf in beamformers:
        for stem in (f"bmode_{bf}", f"power_doppler_{bf}"):
            names |= {stem + e for e in raster_exts}
        for m in methods:
            tag = f"{bf}_{m}"
            names |= {f"detections_{tag}.csv", f"tracks_{tag}.csv"}
            for stem in (f"density_{tag}", f"velocity_{tag}"):
                names |= {stem + e for e in raster_exts}
    return names


def test_run_writes_the_full_output_tree(workspace):
    out = workspace["out1"]
    assert {p.name for p in out.iterdir()} == expected_tree()
    rows = list(csv.reader((out / "metrics.csv").open()))
    assert rows[0][0] == "beamformer"
    assert [(r[0], r[1]) for r in rows[1:]] == [
        ("DAS", "spinterp"), ("DAS", "rs"), ("FDMAS", "spinterp"), ("FDMAS", "rs")]
    for r in rows[1:]:
        assert float(r[2]) > 0
        assert 0.0 < float(r[4]) < 1.0  # spread measured, in wavelengths
    dens, meta = io.read_raster(out / "density_fdmas_rs")
    assert dens.sum() > 0
    assert meta["pitch_x"] == pytest.approx(9.856e-06)
    vel, _ = io.read_raster(out / "velocity_fdmas_rs")
    assert float(vel.max()) == pytest.approx(1.0)
    bmode, _ = io.read_raster(out / "bmode_das")
    assert float(bmode.max()) == 0.0  # log-compressed, peak pinned at 0 dB
    with (out / "detections_das_rs.csv").open() as fh:
        assert len(fh.readlines()) > 20


def test_rerun_is_byte_identical_except_the_log(workspace):
    out1, out2 = workspace["out1"], workspace["out2"]
    names = {p.name for p in out1.iterdir()}
    assert names == {p.name for p in out2.iterdir()}
    for name in sorted(names - {"run.log"}):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name
    for out in (out1, out2):
        log = (out / "run.log").read_text()
        assert "started=" in log and "elapsed=" in log
        assert f"files={len(names) - 1}\n" in log


def test_run_console_summary(tmp_path, capsys):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL_CFG)
    container = tmp_path / "rf.ulm"
    cli.main(["simulate", str(cfg), str(container)])
    out = tmp_path / "out"
    assert cli.main(["run", str(cfg), str(container), str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    combo = [l for l in lines if "tracks=" in l]
    assert len(combo) == 1
    assert re.fullmatch(r"\s*DAS rs\s+tracks=\d+\s+contrast=\d+\.\d{4}\+-\d+\.\d{4} spread=(\d+\.\d{3}|n/a)", combo[0])
    assert lines[-1] == f"wrote 15 files to {out}"


def test_trackless_run_warns_and_scores_degenerate(tmp_path, capsys):
    cfg = tmp_path / "sparse.cfg"
    cfg.write_text(SMALL_CFG + "track.min_length=50\n")
    container = tmp_path / "rf.ulm"
    cli.main(["simulate", str(cfg), str(container)])
    out = tmp_path / "out"
    assert cli.main(["run", str(cfg), str(container), str(out)]) == 0
    captured = capsys.readouterr()
    assert "warning: DAS/rs: empty density map, metrics degenerate" in captured.err
    assert "spread=n/a" in captured.out
    rows = list(csv.reader((out / "metrics.csv").open()))
    assert rows[1] == ["DAS", "rs", "0.0", "0.0", ""]
    dens, _ = io.read_raster(out / "density_das_rs")
    assert dens.sum() == 0


# ---- evaluate --------------------------------------------------------------------

def write_twin_ridge_raster(base, constant=False):
    lam = 1540.0 / 15.625e6
    pitch = lam / 10
    n_cols, n_rows = 100, 203  # covers the bundled scoring region exactly
    values = np.ones((n_rows, n_cols)) if constant else np.zeros((n_rows, n_cols))
    if not constant:
        values[:, 44] = 1.0
        values[:, 55] = 1.0
    io.write_raster(base, values, pitch_x=pitch, pitch_z=pitch,
                    origin_x=-5 * lam + pitch / 2, origin_z=10e-3 + pitch / 2)


def test_evaluate_scores_an_external_raster(tmp_path, capsys):
    cfg = tmp_path / "default.cfg"
    cfg.write_text(config.serialize_config(config.default_config()))
    base = tmp_path / "truth"
    write_twin_ridge_raster(base)
    assert cli.main(["evaluate", str(cfg), str(base)]) == 0
    out1 = capsys.readouterr().out
    header, row = out1.strip().splitlines()
    assert header == "beamformer,localizer,local_contrast_mean,local_contrast_std,lateral_spread_lambda"
    src, loc, mean, std, spread = row.split(",")
    assert (src, loc) == ("external", "external")
    assert float(mean) > 0 and float(std) >= 0
    assert float(spread) == pytest.approx(0.1, rel=1e-9)  # one-bin ridges
    assert cli.main(["evaluate", str(cfg), str(base)]) == 0
    assert capsys.readouterr().out == out1


def test_evaluate_rejects_an_unmeasurable_raster(tmp_path, capsys):
    cfg = tmp_path / "default.cfg"
    cfg.write_text(config.serialize_config(config.default_config()))
    base = tmp_path / "flat"
    write_twin_ridge_raster(base, constant=True)
    assert cli.main(["evaluate", str(cfg), str(base)]) == 2
    assert "error: no measurable rows in the region" in capsys.readouterr().err


# ---- failure modes ---------------------------------------------------------------

def test_invalid_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("phantom.n_frames=0\n")
    assert cli.main(["simulate", str(cfg), str(tmp_path / "x.ulm")]) == 2
    assert capsys.readouterr().err == "error: phantom.n_frames must be >= 1\n"


def test_missing_paths_exit_2(tmp_path, capsys):
    assert cli.main(["simulate", str(tmp_path / "absent.cfg"), str(tmp_path / "x.ulm")]) == 2
    assert capsys.readouterr().err.startswith("error: ")
    cfg = tmp_path / "ok.cfg"
    cfg.write_text("")
    assert cli.main(["run", str(cfg), str(tmp_path / "absent.ulm"), str(tmp_path / "out")]) == 2
    assert capsys.readouterr().err.startswith("error: ")


def test_usage_errors_raise_system_exit():
    with pytest.raises(SystemExit):
        cli.main([])
    with pytest.raises(SystemExit):
        cli.main(["frobnicate"])
