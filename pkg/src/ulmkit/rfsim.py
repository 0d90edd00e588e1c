"""Synthetic plane-wave RF acquisition of a parametric microvascular phantom.

Microbubbles are point scatterers advected along parametric canals and insonified
by one non-steered plane wave per frame. Single scattering, 1/z spreading loss,
no element directivity, no attenuation: enough physics to exercise beamforming
and localization, not an acoustic field solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Distinct sub-stream tags so seeded RNG streams never collide.
_TAG_SPAWN = 101
_TAG_JITTER = 102
_TAG_NOISE = 103

# Spreading-loss floor: keeps near-field amplitudes bounded.
Z_SPREAD_MIN = 1.0e-3


@dataclass(frozen=True)
class Probe:
    """Linear array and acquisition constants."""

    n_elements: int = 128
    pitch: float = 0.11e-3
    fc: float = 15.625e6
    fs: float = 100e6
    c: float = 1540.0
    frame_rate: float = 500.0

    def __post_init__(self):
        if self.n_elements < 2:
            raise ValueError("n_elements must be >= 2")
        if self.pitch <= 0:
            raise ValueError("pitch must be > 0")
        if self.fs <= 2 * self.fc:
            raise ValueError("fs must exceed 2*fc")

    @property
    def wavelength(self) -> float:
        return self.c / self.fc

    def element_x(self) -> np.ndarray:
        """Element center x-coordinates, centered on 0, strictly increasing."""
        idx = np.arange(self.n_elements, dtype=np.float64)
        return (idx - (self.n_elements - 1) / 2.0) * self.pitch


@dataclass(frozen=True)
class Canal:
    """Piecewise-linear flow path with a diameter and a mean flow speed."""

    points: tuple  # ((x, z), ...) control points in meters, ordered
    diameter: float  # meters
    speed: float  # m/s along the path

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("canal needs at least 2 control points")
        if self.diameter <= 0:
            raise ValueError("canal diameter must be > 0")
        if self.speed <= 0:
            raise ValueError("canal speed must be > 0")

    def _segments(self):
        pts = np.asarray(self.points, dtype=np.float64)
        deltas = np.diff(pts, axis=0)
        seg_len = np.hypot(deltas[:, 0], deltas[:, 1])
        if np.any(seg_len <= 0):
            raise ValueError("degenerate canal segment")
        return pts, deltas, seg_len

    @property
    def length(self) -> float:
        _, _, seg_len = self._segments()
        return float(seg_len.sum())

    def point_at(self, s: float):
        """Position and unit transverse normal at arc length s (clamped to path)."""
        pts, deltas, seg_len = self._segments()
        cum = np.concatenate(([0.0], np.cumsum(seg_len)))
        s = min(max(s, 0.0), cum[-1])
        k = int(np.searchsorted(cum[1:], s, side="right"))
        k = min(k, len(seg_len) - 1)
        frac = (s - cum[k]) / seg_len[k]
        x = pts[k, 0] + frac * deltas[k, 0]
        z = pts[k, 1] + frac * deltas[k, 1]
        tx, tz = deltas[k] / seg_len[k]
        # normal = tangent rotated 90 degrees
        return x, z, -tz, tx


@dataclass(frozen=True)
class PhantomSpec:
    """Parametric phantom: canals, bubble budget, frame count, noise, seed."""

    canals: tuple  # tuple of Canal
    bubbles_per_frame: int = 25
    n_frames: int = 100
    noise_db: float | None = 20.0  # noise level below peak echo; None = noise off
    rng_seed: int = 7

    def __post_init__(self):
        if len(self.canals) == 0:
            raise ValueError("phantom needs at least one canal")
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        if self.bubbles_per_frame < 1:
            raise ValueError("bubbles_per_frame must be >= 1")

    def bubble_counts(self) -> list:
        """Bubbles per canal, proportional to arc length (largest remainder, >= 1 each)."""
        lengths = np.array([c.length for c in self.canals])
        quota = self.bubbles_per_frame * lengths / lengths.sum()
        counts = np.maximum(np.floor(quota).astype(int), 1)
        rem = quota - np.floor(quota)
        # hand leftover budget to the largest remainders, deterministically
        short = self.bubbles_per_frame - int(counts.sum())
        order = np.lexsort((np.arange(len(rem)), -rem))
        for i in range(max(short, 0)):
            counts[order[i % len(rem)]] += 1
        return counts.tolist()


@dataclass(frozen=True)
class RfFrame:
    """One frame of per-channel RF samples."""

    samples: np.ndarray  # [n_samples, n_channels], real
    frame_index: int
    probe: Probe
    t0: float = 0.0

    def __post_init__(self):
        if self.samples.ndim != 2:
            raise ValueError("samples must be 2-D [n_samples, n_channels]")
        if self.samples.shape[1] != self.probe.n_elements:
            raise ValueError("channel count does not match probe")
        if self.samples.shape[0] < 1:
            raise ValueError("empty frame")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("non-finite samples")


def make_pulse(probe: Probe, n_cycles: int) -> np.ndarray:
    """Hann-windowed sinusoid at fc sampled at fs, peak amplitude exactly 1.

    Length is round(n_cycles*fs/fc) samples; carrier phase is referenced to the
    window center so the peak sits at the center sample for odd lengths.
    """
    if n_cycles < 1:
        raise ValueError("n_cycles must be >= 1")
    if probe.fs <= 2 * probe.fc:
        raise ValueError("fs must exceed 2*fc")
    n = int(round(n_cycles * probe.fs / probe.fc))
    k = np.arange(n, dtype=np.float64)
    center = (n - 1) / 2.0
    carrier = np.cos(2.0 * math.pi * probe.fc * (k - center) / probe.fs)
    window = 0.5 * (1.0 - np.cos(2.0 * math.pi * k / (n - 1))) if n > 1 else np.ones(1)
    pulse = window * carrier
    return pulse / np.max(np.abs(pulse))


def _uniform01(seed_path) -> float:
    return float(np.random.default_rng(seed_path).random())


def _normal01(seed_path) -> float:
    return float(np.random.default_rng(seed_path).standard_normal())


def advance_bubbles(spec: PhantomSpec, frame_index: int, frame_rate: float = 500.0) -> np.ndarray:
    """Scatterer positions for one frame, as an (n, 2) array of (x, z) meters.

    Pure function of (spec, frame_index): each bubble starts at a seeded uniform
    arc offset, advances speed/frame_rate per frame, and wraps around the canal;
    every wrap (lap) redraws its transverse jitter, a clamped normal bounded by
    diameter/2. No mutable state, so frames may be generated in any order.
    """
    if frame_index >= spec.n_frames:
        raise ValueError("frame_index out of range")
    if frame_index < 0:
        raise ValueError("frame_index must be >= 0")
    counts = spec.bubble_counts()
    out = []
    for k, (canal, n_b) in enumerate(zip(spec.canals, counts)):
        length = canal.length
        step = canal.speed / frame_rate
        for b in range(n_b):
            s0 = _uniform01([spec.rng_seed, _TAG_SPAWN, k, b]) * length
            total = s0 + step * frame_index
            lap = int(total // length)
            s = total - lap * length
            raw = _normal01([spec.rng_seed, _TAG_JITTER, k, b, lap]) * (canal.diameter / 4.0)
            jitter = min(max(raw, -canal.diameter / 2.0), canal.diameter / 2.0)
            x, z, nx, nz = canal.point_at(s)
            out.append((x + jitter * nx, z + jitter * nz))
    return np.asarray(out, dtype=np.float64).reshape(-1, 2)


def record_length(spec: PhantomSpec, probe: Probe, n_cycles: int = 5) -> int:
    """Samples needed to hold the farthest echo across the aperture, plus the pulse."""
    z_max = max(p[1] for c in spec.canals for p in c.points) + max(c.diameter for c in spec.canals)
    x_lo = min(p[0] for c in spec.canals for p in c.points)
    x_hi = max(p[0] for c in spec.canals for p in c.points)
    ex = probe.element_x()
    reach = max(abs(ex[0] - x_hi), abs(ex[-1] - x_lo))
    t_max = (z_max + math.hypot(reach, z_max)) / probe.c
    pulse_len = int(round(n_cycles * probe.fs / probe.fc))
    return int(math.ceil(t_max * probe.fs)) + pulse_len + 2


def simulate_frame(
    spec: PhantomSpec,
    probe: Probe,
    frame_index: int,
    n_samples: int | None = None,
    n_cycles: int = 5,
) -> RfFrame:
    """Simulate the per-channel RF record of one plane-wave transmit.

    Each scatterer at (x_s, z_s) contributes, on element i at (x_i, 0), a copy of
    the transmit pulse centered at delay t = (z_s + sqrt((x_i-x_s)^2 + z_s^2))/c
    with amplitude 1/max(z_s, 1 mm). White Gaussian noise at spec.noise_db below
    the frame's peak echo is added last. t0 = 0.
    """
    if n_samples is None:
        n_samples = record_length(spec, probe, n_cycles)
    pulse = make_pulse(probe, n_cycles)
    positions = advance_bubbles(spec, frame_index, probe.frame_rate)
    samples = np.zeros((n_samples, probe.n_elements), dtype=np.float64)
    _add_echoes(samples, positions, probe, pulse)
    if spec.noise_db is not None:
        peak = float(np.max(np.abs(samples)))
        if peak > 0.0:
            sigma = peak * 10.0 ** (-spec.noise_db / 20.0)
            rng = np.random.default_rng([spec.rng_seed, _TAG_NOISE, frame_index])
            samples += sigma * rng.standard_normal(samples.shape)
    return RfFrame(samples=samples, frame_index=frame_index, probe=probe, t0=0.0)


def _add_echoes(samples: np.ndarray, positions: np.ndarray, probe: Probe, pulse: np.ndarray) -> None:
    """Accumulate pulse echoes into the record, in place."""
    n_samples = samples.shape[0]
    elem_x = probe.element_x()
    n_pulse = pulse.shape[0]
    center = (n_pulse - 1) / 2.0
    pulse_k = np.arange(n_pulse, dtype=np.float64)
    for x_s, z_s in positions:
        if z_s <= 0:
            raise ValueError("scatterer depth must be > 0")
        amp = 1.0 / max(z_s, Z_SPREAD_MIN)
        t = (z_s + np.sqrt((elem_x - x_s) ** 2 + z_s**2)) / probe.c
        s = t * probe.fs  # fractional center sample per channel
        for i, s_i in enumerate(s):
            n0 = int(math.ceil(s_i - center))
            n1 = int(math.floor(s_i + center))
            n0 = max(n0, 0)
            n1 = min(n1, n_samples - 1)
            if n1 < n0:
                continue
            grid = np.arange(n0, n1 + 1, dtype=np.float64) - s_i + center
            samples[n0 : n1 + 1, i] += amp * np.interp(grid, pulse_k, pulse, left=0.0, right=0.0)
