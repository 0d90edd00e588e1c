"""Detection linking, velocimetry, and super-resolved map rendering.

Greedy nearest-neighbor linking (deterministic, permutation-invariant via
distance-then-coordinate tie-breaks), per-step velocities, and rendering of
density / normalized-velocity maps on a 0.1-wavelength grid, plus the
power-Doppler raster of a clutter-filtered stack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ulmkit.beamform import BeamGrid, BfImage
from ulmkit.clutter import ImageStack
from ulmkit.localize import Detection

MAP_KINDS = ("density", "velocity", "power_doppler")


@dataclass(frozen=True)
class Track:
    """Linked detections with per-step velocities."""

    id: int
    detections: tuple  # Detections, frame_index strictly increasing
    velocities: tuple  # (vx, vz) per step, length = len(detections) - 1

    def __post_init__(self):
        frames = [d.frame_index for d in self.detections]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("detections must have strictly increasing frame_index")
        if len(self.velocities) != max(len(self.detections) - 1, 0):
            raise ValueError("velocity count must be length - 1")

    @property
    def length(self) -> int:
        return len(self.detections)

    def positions(self) -> np.ndarray:
        return np.array([(d.x, d.z) for d in self.detections], dtype=np.float64)

    def speeds(self) -> np.ndarray:
        return np.array([math.hypot(vx, vz) for vx, vz in self.velocities], dtype=np.float64)


@dataclass(frozen=True)
class SuperResMap:
    """Super-resolved raster at 0.1-wavelength pitch."""

    grid: BeamGrid  # pixel centers
    values: np.ndarray  # [n_z, n_x]; counts for density, [0,1] for velocity
    kind: str
    out_of_grid: int = 0  # resampled points that fell outside the raster

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values))
        if self.kind not in MAP_KINDS:
            raise ValueError(f"unknown map kind {self.kind!r}")
        if self.values.shape != self.grid.shape:
            raise ValueError("values shape does not match grid")
        if self.kind == "density":
            if not np.issubdtype(self.values.dtype, np.integer) or (self.values.size and self.values.min() < 0):
                raise ValueError("density must hold non-negative integers")
        if self.kind == "velocity" and self.values.size:
            if float(self.values.min()) < 0.0 or float(self.values.max()) > 1.0 + 1e-12:
                raise ValueError("velocity_norm must lie in [0, 1]")


def _step_velocities(track_positions, frame_indices, frame_rate: float) -> tuple:
    pos = np.asarray(track_positions, dtype=np.float64)
    if pos.shape[0] < 2:
        raise ValueError("need at least 2 detections for velocities")
    frames = np.asarray(frame_indices)
    steps = np.diff(frames)
    if np.any(steps < 1):
        raise ValueError("frame indices must be strictly increasing")
    d = np.diff(pos, axis=0)
    v = d * (frame_rate / steps)[:, None]
    return tuple((float(vx), float(vz)) for vx, vz in v)


def velocities(track: Track, frame_rate: float) -> tuple:
    """Per-step (vx, vz): displacement times frame_rate (over the frame gap, if any)."""
    return _step_velocities(track.positions(), [d.frame_index for d in track.detections], frame_rate)


def link_detections(
    detections,
    max_link_distance: float,
    max_gap: int = 0,
    min_track_length: int = 5,
    frame_rate: float = 500.0,
) -> list:
    """Frame-by-frame greedy nearest-neighbor linking.

    Candidate (track tail, detection) pairs are sorted by distance, tie-broken
    by tail then detection coordinates, and accepted while both ends are free
    and the distance fits. Unmatched detections open new tracks; tracks
    unmatched for more than max_gap frames close. Tracks shorter than
    min_track_length are dropped. The resulting track set does not depend on
    the within-frame detection order.
    """
    if max_link_distance <= 0:
        raise ValueError("max_link_distance must be > 0")
    by_frame = {}
    for d in detections:
        by_frame.setdefault(d.frame_index, []).append(d)
    if not by_frame:
        return []
    # canonical within-frame order: coordinates, so input order is irrelevant
    for f in by_frame:
        by_frame[f].sort(key=lambda d: (d.x, d.z, -d.intensity))
    active = []  # list of dicts: dets (list), last_frame
    closed = []
    f_lo = min(by_frame)
    f_hi = max(by_frame)
    for f in range(f_lo, f_hi + 1):
        dets = by_frame.get(f, [])
        # retire tracks that have coasted past the allowed gap
        still = []
        for tr in active:
            if f - tr["last_frame"] > max_gap + 1:
                closed.append(tr)
            else:
                still.append(tr)
        active = still
        pairs = []
        for ti, tr in enumerate(active):
            tail = tr["dets"][-1]
            for dj, det in enumerate(dets):
                dist = math.hypot(det.x - tail.x, det.z - tail.z)
                if dist <= max_link_distance:
                    pairs.append((dist, tail.x, tail.z, det.x, det.z, ti, dj))
        pairs.sort()
        used_t = set()
        used_d = set()
        for dist, _, _, _, _, ti, dj in pairs:
            if ti in used_t or dj in used_d:
                continue
            active[ti]["dets"].append(dets[dj])
            active[ti]["last_frame"] = f
            used_t.add(ti)
            used_d.add(dj)
        for dj, det in enumerate(dets):
            if dj not in used_d:
                active.append({"dets": [det], "last_frame": f})
    closed.extend(active)
    tracks = []
    next_id = 0
    for tr in closed:
        dets = tr["dets"]
        if len(dets) < max(min_track_length, 1):
            continue
        pos = [(d.x, d.z) for d in dets]
        frames = [d.frame_index for d in dets]
        vel = _step_velocities(pos, frames, frame_rate) if len(dets) >= 2 else ()
        tracks.append(Track(id=next_id, detections=tuple(dets), velocities=vel))
        next_id += 1
    return tracks


def map_grid(x_min: float, x_max: float, z_min: float, z_max: float, lam: float) -> BeamGrid:
    """0.1-wavelength raster covering the extent; coordinates are bin centers."""
    pitch = lam / 10.0
    nx = max(int(math.ceil((x_max - x_min) / pitch)), 2)
    nz = max(int(math.ceil((z_max - z_min) / pitch)), 2)
    return BeamGrid(
        x=x_min + (np.arange(nx) + 0.5) * pitch,
        z=z_min + (np.arange(nz) + 0.5) * pitch,
    )


def _resample(track: Track, step: float):
    """Points along the track polyline at <= step arc spacing, with per-point speed."""
    pos = track.positions()
    if pos.shape[0] == 1:
        return pos.copy(), np.zeros(1)
    seg = np.diff(pos, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate(([0.0], np.cumsum(seg_len)))
    total = float(cum[-1])
    speeds = track.speeds() if track.velocities else np.zeros(max(pos.shape[0] - 1, 1))
    if total <= 0.0:
        return pos[:1].copy(), np.array([speeds[0] if speeds.size else 0.0])
    n = max(1, int(math.ceil(total / step)))
    arcs = np.linspace(0.0, total, n + 1)
    xs = np.interp(arcs, cum, pos[:, 0])
    zs = np.interp(arcs, cum, pos[:, 1])
    seg_idx = np.minimum(np.searchsorted(cum[1:], arcs, side="left"), len(seg_len) - 1)
    return np.stack([xs, zs], axis=1), speeds[seg_idx]


def _bin_indices(points: np.ndarray, grid: BeamGrid):
    """Right-open bin index per point; mask of points inside the raster."""
    px, pz = grid.pitch_x, grid.pitch_z
    ox = grid.x[0] - px / 2.0
    oz = grid.z[0] - pz / 2.0
    ix = np.floor((points[:, 0] - ox) / px).astype(np.int64)
    iz = np.floor((points[:, 1] - oz) / pz).astype(np.int64)
    inside = (ix >= 0) & (ix < grid.x.size) & (iz >= 0) & (iz < grid.z.size)
    return iz, ix, inside


def render_density(tracks, grid: BeamGrid) -> SuperResMap:
    """Count resampled track samples per bin (0.1-wavelength arc steps)."""
    step = grid.pitch_x
    counts = np.zeros(grid.shape, dtype=np.int64)
    skipped = 0
    for track in sorted(tracks, key=lambda t: t.id):
        points, _ = _resample(track, step)
        iz, ix, inside = _bin_indices(points, grid)
        np.add.at(counts, (iz[inside], ix[inside]), 1)
        skipped += int((~inside).sum())
    return SuperResMap(grid=grid, values=counts, kind="density", out_of_grid=skipped)


def render_velocity(tracks, grid: BeamGrid) -> SuperResMap:
    """Per-bin mean speed of landing samples, normalized by the map maximum."""
    step = grid.pitch_x
    total = np.zeros(grid.shape, dtype=np.float64)
    count = np.zeros(grid.shape, dtype=np.int64)
    skipped = 0
    for track in sorted(tracks, key=lambda t: t.id):
        points, speeds = _resample(track, step)
        iz, ix, inside = _bin_indices(points, grid)
        np.add.at(total, (iz[inside], ix[inside]), speeds[inside])
        np.add.at(count, (iz[inside], ix[inside]), 1)
        skipped += int((~inside).sum())
    mean = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
    peak = float(mean.max())
    if peak > 0.0:
        mean /= peak
    return SuperResMap(grid=grid, values=mean, kind="velocity", out_of_grid=skipped)


def power_doppler(stack: ImageStack) -> BfImage:
    """Per-pixel mean squared value over frames, on the stack's grid (linear scale).

    Export converts to dB relative to the maximum; keeping the linear raster
    here lets metrics and tests read lossless data.
    """
    if stack.n_frames < 2:
        raise ValueError("power Doppler needs at least 2 frames")
    acc = np.zeros(stack.grid.shape, dtype=np.float64)
    for f in stack.frames:
        acc += np.asarray(f.values, dtype=np.float64) ** 2
    acc /= stack.n_frames
    return BfImage(values=acc, grid=stack.grid, kind="power", beamformer=stack.frames[0].beamformer)
