"""End-to-end orchestration: simulate, beamform, filter, localize, track, render, score.

Every stage is a pure function of its inputs, so frames could be beamformed in
parallel and combinations processed independently; the reference implementation
runs them serially, which makes byte-identical reruns trivial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ulmkit import beamform, clutter, io, localize, metrics, rfsim, track
from ulmkit.config import PipelineConfig


@dataclass(frozen=True)
class ComboResult:
    """Everything produced for one (beamformer, localizer) pair."""

    beamformer: str
    localizer: str
    detections: tuple
    tracks: tuple
    density: track.SuperResMap
    velocity: track.SuperResMap
    report: metrics.MetricReport


@dataclass(frozen=True)
class RunResult:
    combos: tuple  # ComboResult, ordered (beamformer, localizer)
    bmodes: dict  # beamformer -> BfImage (bmode_db, fine grid, frame 0)
    power: dict  # beamformer -> BfImage (power, coarse grid)
    warnings: tuple

    def combo(self, beamformer: str, localizer: str) -> ComboResult:
        for c in self.combos:
            if c.beamformer == beamformer and c.localizer == localizer:
                return c
        raise KeyError((beamformer, localizer))


def simulate_frames(cfg: PipelineConfig):
    """Generator of simulated RfFrames for the configured phantom."""
    probe = cfg.probe()
    spec = cfg.phantom()
    n_cycles = cfg["pulse.n_cycles"]
    n_samples = rfsim.record_length(spec, probe, n_cycles)
    for f in range(spec.n_frames):
        yield rfsim.simulate_frame(spec, probe, f, n_samples, n_cycles)


def coarse_grid(cfg: PipelineConfig) -> beamform.BeamGrid:
    lam = cfg.probe().wavelength
    return beamform.make_grid(
        cfg["grid.x_min"], cfg["grid.x_max"], cfg["grid.z_min"], cfg["grid.z_max"], cfg["grid.pitch_lambda"] * lam
    )


def beamform_stacks(cfg: PipelineConfig, frames) -> tuple:
    """Beamform every frame with the selected beamformers.

    Returns (stacks, bmodes): per-beamformer coarse envelope ImageStacks and a
    fine-grid B-mode of the first frame. Frames are consumed streaming; only
    coarse envelopes are kept.
    """
    probe = cfg.probe()
    grid = coarse_grid(cfg)
    refine = cfg["grid.axial_refine"]
    fine = beamform.refine_axial(grid, refine)
    apod = beamform.Apodization(kind=cfg["apod.kind"], f_number=cfg["apod.f_number"])
    bpf = beamform.BandpassSpec(
        center=cfg["bpf.center_frac"] * probe.fc,
        fractional_bandwidth=cfg["bpf.fractional_bandwidth"],
        n_taps=cfg["bpf.n_taps"],
    )
    selected = cfg.beamformers()
    plan = None
    per_bf = {bf: [] for bf in selected}
    bmodes = {}
    for frame in frames:
        if plan is None:
            plan = beamform.build_plan(fine, probe, apod, frame.samples.shape[0], frame.t0)
        for bf in selected:
            if bf == "DAS":
                rf = beamform.das_from_plan(plan, frame)
            else:
                rf = beamform.fdmas_from_plan(plan, frame, bpf)
            env = beamform.envelope(rf)
            if frame.frame_index == 0:
                bmodes[bf] = beamform.log_compress(env, cfg["bmode.dynamic_range_db"])
            per_bf[bf].append(beamform.decimate_axial(env, refine))
    if plan is None:
        raise ValueError("no frames to beamform")
    stacks = {bf: clutter.ImageStack(frames=tuple(imgs)) for bf, imgs in per_bf.items()}
    return stacks, bmodes


def run_pipeline(cfg: PipelineConfig, frames=None) -> RunResult:
    """Full pipeline on an iterable of RfFrames (simulated from cfg when None)."""
    if frames is None:
        frames = simulate_frames(cfg)
    probe = cfg.probe()
    lam = probe.wavelength
    warnings = []
    stacks, bmodes = beamform_stacks(cfg, frames)
    cut_low = cfg["clutter.cut_low"]
    cut_high = cfg["clutter.cut_high"]
    filtered = {bf: clutter.svd_filter(stack, cut_low, cut_high) for bf, stack in stacks.items()}
    power = {bf: track.power_doppler(stack) for bf, stack in filtered.items()}
    mgrid = track.map_grid(cfg["grid.x_min"], cfg["grid.x_max"], cfg["grid.z_min"], cfg["grid.z_max"], lam)
    region_m = cfg.metrics_region()
    combos = []
    for bf in cfg.beamformers():
        stack = filtered[bf]
        per_frame_patches = [
            localize.detect_candidates(
                img,
                max_count=cfg["detect.max_count"],
                min_separation_px=cfg["detect.min_separation_px"],
                threshold_rel=cfg["detect.threshold_rel"],
            )
            for img in stack.frames
        ]
        for method in cfg.methods():
            detections = []
            for f, patches in enumerate(per_frame_patches):
                for patch in patches:
                    try:
                        det = localize.refine_patch(patch, method, f, wa_literal=cfg["localize.wa_literal"])
                    except localize.LocalizationFailure:
                        continue
                    detections.append(det)
            tracks = track.link_detections(
                detections,
                max_link_distance=cfg.max_link(),
                max_gap=cfg["track.max_gap"],
                min_track_length=cfg["track.min_length"],
                frame_rate=probe.frame_rate,
            )
            density = track.render_density(tracks, mgrid)
            velocity = track.render_velocity(tracks, mgrid)
            report, warn = score_map(density, mgrid, lam, region_m, cfg["metrics.masked"], bf, method)
            warnings.extend(warn)
            combos.append(
                ComboResult(
                    beamformer=bf,
                    localizer=method,
                    detections=tuple(detections),
                    tracks=tuple(tracks),
                    density=density,
                    velocity=velocity,
                    report=report,
                )
            )
    return RunResult(combos=tuple(combos), bmodes=bmodes, power=power, warnings=tuple(warnings))


def region_to_bins(grid: beamform.BeamGrid, region_m) -> tuple:
    """Map a meters rectangle (x0, x1, z0, z1) to half-open map-bin ranges."""
    x0, x1, z0, z1 = region_m
    px, pz = grid.pitch_x, grid.pitch_z
    ox = grid.x[0] - px / 2.0
    oz = grid.z[0] - pz / 2.0
    c0 = max(int(math.floor((x0 - ox) / px)), 0)
    c1 = min(int(math.ceil((x1 - ox) / px)), grid.x.size)
    r0 = max(int(math.floor((z0 - oz) / pz)), 0)
    r1 = min(int(math.ceil((z1 - oz) / pz)), grid.z.size)
    if r0 >= r1 or c0 >= c1:
        raise ValueError("region lies outside the map")
    return (r0, r1, c0, c1)


def score_map(density, mgrid, lam, region_m, masked, bf, method):
    """MetricReport for one density map; degenerate maps score (0, 0, nan) with a warning."""
    warnings = []
    values = density.values
    if float(np.asarray(values).max()) <= 0:
        warnings.append(f"{bf}/{method}: empty density map, metrics degenerate")
        report = metrics.MetricReport(bf, method, 0.0, 0.0, float("nan"))
        return report, warnings
    mean, std = metrics.local_contrast_score(values, masked=masked)
    spread = float("nan")
    if region_m is not None:
        try:
            bins = region_to_bins(mgrid, region_m)
            spread = metrics.lateral_spread_score(values, mgrid.pitch_x, lam, bins).value
        except ValueError as exc:
            warnings.append(f"{bf}/{method}: lateral spread unavailable ({exc})")
    report = metrics.MetricReport(bf, method, mean, std, spread)
    return report, warnings


def write_outputs(cfg: PipelineConfig, result: RunResult, outdir) -> list:
    """Write the full output tree; returns the relative paths written."""
    import os

    os.makedirs(outdir, exist_ok=True)
    written = []

    def raster(name, values, grid):
        base = os.path.join(outdir, name)
        io.write_raster(
            base,
            values,
            pitch_x=grid.pitch_x,
            pitch_z=grid.pitch_z,
            origin_x=float(grid.x[0]),
            origin_z=float(grid.z[0]),
        )
        written.extend([name + ext for ext in (".f32", ".txt", ".pgm")])

    for bf in sorted(result.bmodes):
        raster(f"bmode_{bf.lower()}", result.bmodes[bf].values, result.bmodes[bf].grid)
        pd = result.power[bf]
        # raw raster stays linear; the PGM preview is log-scaled
        base = os.path.join(outdir, f"power_doppler_{bf.lower()}")
        io.write_raster(
            base,
            pd.values,
            pitch_x=pd.grid.pitch_x,
            pitch_z=pd.grid.pitch_z,
            origin_x=float(pd.grid.x[0]),
            origin_z=float(pd.grid.z[0]),
        )
        peak = float(np.max(pd.values))
        if peak > 0:
            db = 10.0 * np.log10(np.maximum(pd.values / peak, 1e-6))
        else:
            db = np.full(pd.values.shape, -60.0)
        io.write_pgm(base + ".pgm", db)
        written.extend([f"power_doppler_{bf.lower()}{ext}" for ext in (".f32", ".txt", ".pgm")])
    for combo in result.combos:
        tag = f"{combo.beamformer.lower()}_{combo.localizer}"
        io.write_detections_csv(os.path.join(outdir, f"detections_{tag}.csv"), combo.detections)
        io.write_tracks_csv(os.path.join(outdir, f"tracks_{tag}.csv"), combo.tracks)
        written.extend([f"detections_{tag}.csv", f"tracks_{tag}.csv"])
        raster(f"density_{tag}", combo.density.values.astype(np.float64), combo.density.grid)
        raster(f"velocity_{tag}", combo.velocity.values, combo.velocity.grid)
    io.write_metrics_csv(os.path.join(outdir, "metrics.csv"), [c.report for c in result.combos])
    written.append("metrics.csv")
    return written
