"""Persistence: the RF container format, raster export, and CSV writers.

Container layout (little-endian throughout):
  magic "ULMF" (4 bytes), format version u16,
  n_frames u32, n_samples u32, n_channels u32,
  probe fields as f64: pitch, fc, fs, c, frame_rate,
  payload: n_frames * n_samples * n_channels f32, frame-major,
  sample-major (channel fastest) within a frame.

Rasters are raw little-endian f32, row-major, with a key=value text sidecar
(dims, pitches, origin); an 8-bit PGM copy is written for eyeballing. Metrics
must read the lossless raster, never the PGM.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass

import numpy as np

from ulmkit.rfsim import Probe, RfFrame

MAGIC = b"ULMF"
VERSION = 1
_HEADER = struct.Struct("<4sH3I5d")


def write_container(path, probe: Probe, frames) -> int:
    """Stream RfFrames to a container file; returns bytes written.

    All frames must share the probe and record length; the frame count is
    patched into the header after the stream ends.
    """
    n_frames = 0
    n_samples = None
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, 0, 0, probe.n_elements, probe.pitch, probe.fc, probe.fs, probe.c, probe.frame_rate))
        for frame in frames:
            if frame.probe != probe:
                raise ValueError("frame probe does not match container probe")
            if n_samples is None:
                n_samples = frame.samples.shape[0]
            elif frame.samples.shape[0] != n_samples:
                raise ValueError("all frames must share one record length")
            fh.write(np.ascontiguousarray(frame.samples, dtype="<f4").tobytes())
            n_frames += 1
        if n_frames == 0 or n_samples is None:
            raise ValueError("no frames to write")
        fh.seek(0)
        fh.write(_HEADER.pack(MAGIC, VERSION, n_frames, n_samples, probe.n_elements, probe.pitch, probe.fc, probe.fs, probe.c, probe.frame_rate))
        fh.seek(0, 2)
        return fh.tell()


@dataclass(frozen=True)
class ContainerReader:
    """Validated view over a container file; frames are read on demand."""

    path: str
    probe: Probe
    n_frames: int
    n_samples: int

    @property
    def frame_bytes(self) -> int:
        return self.n_samples * self.probe.n_elements * 4

    def frame(self, index: int) -> RfFrame:
        if not 0 <= index < self.n_frames:
            raise ValueError("frame index out of range")
        offset = _HEADER.size + index * self.frame_bytes
        with open(self.path, "rb") as fh:
            fh.seek(offset)
            raw = fh.read(self.frame_bytes)
        if len(raw) != self.frame_bytes:
            raise ValueError("truncated container payload")
        samples = np.frombuffer(raw, dtype="<f4").reshape(self.n_samples, self.probe.n_elements)
        return RfFrame(samples=samples.astype(np.float64), frame_index=index, probe=self.probe, t0=0.0)

    def frames(self):
        for i in range(self.n_frames):
            yield self.frame(i)


def open_container(path) -> ContainerReader:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError("file too short for a container header")
        magic, version, n_frames, n_samples, n_channels, pitch, fc, fs, c, frame_rate = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}; not a container file")
        if version != VERSION:
            raise ValueError(f"unsupported container version {version}")
        fh.seek(0, 2)
        expected = _HEADER.size + n_frames * n_samples * n_channels * 4
        if fh.tell() != expected:
            raise ValueError(f"payload length mismatch: expected {expected} bytes, file has {fh.tell()}")
    probe = Probe(n_elements=n_channels, pitch=pitch, fc=fc, fs=fs, c=c, frame_rate=frame_rate)
    return ContainerReader(path=str(path), probe=probe, n_frames=n_frames, n_samples=n_samples)


# ---- rasters ----------------------------------------------------------------------


def write_raster(basepath, values: np.ndarray, pitch_x: float, pitch_z: float, origin_x: float, origin_z: float) -> None:
    """Raw f32 grid + sidecar + 8-bit PGM, under basepath.{f32,txt,pgm}."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError("raster must be 2-D")
    base = str(basepath)
    v.astype("<f4").tofile(base + ".f32")
    with open(base + ".txt", "w", encoding="utf-8") as fh:
        fh.write(f"n_rows={v.shape[0]}\n")
        fh.write(f"n_cols={v.shape[1]}\n")
        fh.write(f"pitch_x={pitch_x!r}\n")
        fh.write(f"pitch_z={pitch_z!r}\n")
        fh.write(f"origin_x={origin_x!r}\n")
        fh.write(f"origin_z={origin_z!r}\n")
        fh.write("dtype=float32-le\n")
    write_pgm(base + ".pgm", v)


def read_raster(basepath):
    """Load a raw raster and its sidecar; returns (values float64, meta dict)."""
    base = str(basepath)
    meta = {}
    with open(base + ".txt", "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, raw = line.partition("=")
            meta[key] = raw
    try:
        rows, cols = int(meta["n_rows"]), int(meta["n_cols"])
    except KeyError as exc:
        raise ValueError(f"sidecar is missing {exc.args[0]}") from exc
    data = np.fromfile(base + ".f32", dtype="<f4")
    if data.size != rows * cols:
        raise ValueError("raster payload does not match sidecar dims")
    out = {
        "pitch_x": float(meta.get("pitch_x", "nan")),
        "pitch_z": float(meta.get("pitch_z", "nan")),
        "origin_x": float(meta.get("origin_x", "nan")),
        "origin_z": float(meta.get("origin_z", "nan")),
    }
    return data.astype(np.float64).reshape(rows, cols), out


def write_pgm(path, values: np.ndarray) -> None:
    """8-bit grayscale PGM (P5), min-max normalized. Lossy, for eyeballing only."""
    v = np.asarray(values, dtype=np.float64)
    lo = float(v.min())
    hi = float(v.max())
    span = hi - lo
    scaled = np.zeros_like(v) if span <= 0 else (v - lo) / span
    img = np.round(scaled * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{v.shape[1]} {v.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


# ---- CSV writers ------------------------------------------------------------------


def write_detections_csv(path, detections) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_index", "x_m", "z_m", "intensity", "method"])
        for d in detections:
            writer.writerow([d.frame_index, repr(d.x), repr(d.z), repr(d.intensity), d.method])


def write_tracks_csv(path, tracks) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["track_id", "frame_index", "x_m", "z_m", "vx", "vz"])
        for track in tracks:
            for k, det in enumerate(track.detections):
                # last detection repeats the final step velocity
                vx, vz = track.velocities[min(k, len(track.velocities) - 1)] if track.velocities else (0.0, 0.0)
                writer.writerow([track.id, det.frame_index, repr(det.x), repr(det.z), repr(vx), repr(vz)])


def write_metrics_csv(path, reports) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beamformer", "localizer", "local_contrast_mean", "local_contrast_std", "lateral_spread_lambda"])
        for r in reports:
            spread = "" if math.isnan(r.lateral_spread_lambda) else repr(r.lateral_spread_lambda)
            writer.writerow([r.beamformer, r.localizer, repr(r.local_contrast_mean), repr(r.local_contrast_std), spread])
