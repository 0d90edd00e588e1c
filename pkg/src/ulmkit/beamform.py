"""DAS and filtered-DMAS beamforming of plane-wave RF frames.

Both beamformers share the same delay/apodization plan. DMAS sums the pairwise
products of delay-compensated, signed-square-root channel samples; the filtered
variant bandpasses each axial line around 2*fc to keep only the coherent product
band. The product band is only representable if the axial line is sampled finely
enough (equivalent line rate c/(2*dz) above twice the bandpass edge), so
beamforming normally runs on an axially refined grid and the envelope is
decimated back to the square display/localization grid afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import filtfilt, firwin, hilbert

from ulmkit.rfsim import Probe, RfFrame

KINDS = ("rf_grid", "envelope", "bmode_db", "filtered", "power")
BEAMFORMERS = ("DAS", "FDMAS")


def _check_uniform(coords: np.ndarray, name: str) -> float:
    if coords.ndim != 1 or coords.size < 2:
        raise ValueError(f"{name} must be 1-D with at least 2 points")
    d = np.diff(coords)
    if np.any(d <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    pitch = float(d[0])
    if not np.allclose(d, pitch, rtol=1e-9, atol=0.0):
        raise ValueError(f"{name} must be uniformly spaced")
    return pitch


@dataclass(frozen=True)
class BeamGrid:
    """Rectangular pixel grid. Pitch is uniform per axis; axes may differ.

    A square grid (pitch_x == pitch_z) is what localization and rendering use;
    beamforming internally uses an axially refined (anisotropic) variant so the
    2*fc product band of DMAS survives sampling.
    """

    x: np.ndarray  # lateral pixel centers, meters
    z: np.ndarray  # axial pixel centers, meters

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64))
        object.__setattr__(self, "z", np.asarray(self.z, dtype=np.float64))
        _check_uniform(self.x, "grid.x")
        _check_uniform(self.z, "grid.z")

    @property
    def pitch_x(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def pitch_z(self) -> float:
        return float(self.z[1] - self.z[0])

    @property
    def is_square(self) -> bool:
        return math.isclose(self.pitch_x, self.pitch_z, rel_tol=1e-9)

    @property
    def shape(self) -> tuple:
        return (self.z.size, self.x.size)


def make_grid(x_min: float, x_max: float, z_min: float, z_max: float, pitch: float) -> BeamGrid:
    """Square grid covering the requested extent at the given pitch."""
    if pitch <= 0:
        raise ValueError("pitch must be > 0")
    nx = int(math.floor((x_max - x_min) / pitch + 1e-9)) + 1
    nz = int(math.floor((z_max - z_min) / pitch + 1e-9)) + 1
    if nx < 2 or nz < 2:
        raise ValueError("grid extent too small for the pitch")
    return BeamGrid(x=x_min + np.arange(nx) * pitch, z=z_min + np.arange(nz) * pitch)


def refine_axial(grid: BeamGrid, factor: int) -> BeamGrid:
    """Insert factor-1 extra rows per axial step; fine_z[::factor] hits the coarse rows."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return grid
    nz = (grid.z.size - 1) * factor + 1
    fine_z = grid.z[0] + np.arange(nz) * (grid.pitch_z / factor)
    return BeamGrid(x=grid.x, z=fine_z)


@dataclass(frozen=True)
class Apodization:
    """Receive aperture weighting: rect or hann taper inside an f-number cone."""

    kind: str = "hann"
    f_number: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rect", "hann"):
            raise ValueError("apodization kind must be 'rect' or 'hann'")
        if self.f_number <= 0:
            raise ValueError("f_number must be > 0")

    def weights(self, dx: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Weight per (pixel, element) from lateral offset dx and pixel depth z."""
        half = z / (2.0 * self.f_number)
        u = np.abs(dx) / half
        if self.kind == "rect":
            w = (u <= 1.0).astype(np.float64)
        else:
            w = np.where(u <= 1.0, 0.5 * (1.0 + np.cos(math.pi * np.clip(u, 0.0, 1.0))), 0.0)
        return w


@dataclass(frozen=True)
class BfImage:
    """Beamformed raster: RF grid, envelope, log-compressed B-mode, SVD-filtered, or power."""

    values: np.ndarray  # [n_z, n_x]
    grid: BeamGrid
    kind: str
    beamformer: str = "DAS"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values))
        if self.kind not in KINDS:
            raise ValueError(f"unknown image kind {self.kind!r}")
        if self.beamformer not in BEAMFORMERS:
            raise ValueError(f"unknown beamformer {self.beamformer!r}")
        if self.values.shape != self.grid.shape:
            raise ValueError("values shape does not match grid")
        if self.kind == "envelope" and self.values.size and float(np.min(self.values)) < 0.0:
            raise ValueError("envelope values must be >= 0")
        if self.kind == "bmode_db" and self.values.size and float(np.max(self.values)) > 1e-9:
            raise ValueError("bmode_db values must be <= 0 dB")


@dataclass(frozen=True)
class BandpassSpec:
    """Linear-phase FIR bandpass around the DMAS product band."""

    center: float  # Hz; conventionally 2*fc
    fractional_bandwidth: float = 0.6
    n_taps: int = 63

    def __post_init__(self):
        if self.center <= 0:
            raise ValueError("center must be > 0")
        if not 0.0 < self.fractional_bandwidth < 2.0:
            raise ValueError("fractional_bandwidth out of range")
        if self.n_taps < 3 or self.n_taps % 2 == 0:
            raise ValueError("n_taps must be odd and >= 3")

    @property
    def band(self) -> tuple:
        half = 0.5 * self.fractional_bandwidth * self.center
        return (self.center - half, self.center + half)


def default_bandpass(probe: Probe) -> BandpassSpec:
    return BandpassSpec(center=2.0 * probe.fc)


def propagation_delay(pixel, element_x: float, c: float) -> float:
    """Two-way plane-wave delay: transmit leg z_p plus the receive path, over c."""
    x_p, z_p = pixel
    if z_p <= 0:
        raise ValueError("pixel depth must be > 0")
    return (z_p + math.hypot(element_x - x_p, z_p)) / c


def signed_sqrt(u):
    """Sign-preserving square root; accepts scalars or arrays."""
    a = np.asarray(u, dtype=np.float64)
    out = np.sign(a) * np.sqrt(np.abs(a))
    return float(out) if np.isscalar(u) or out.ndim == 0 else out


def dmas_pixel(delayed: np.ndarray) -> float:
    """Sum of products over all channel pairs, via ((sum v)^2 - sum v^2)/2."""
    v = np.asarray(delayed, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("need at least 2 delay-compensated samples")
    s = float(v.sum())
    q = float((v * v).sum())
    return 0.5 * (s * s - q)


@dataclass(frozen=True)
class BeamformPlan:
    """Precomputed gather indices, interpolation fractions, and apodization weights.

    Built once per (grid, probe, apodization, record length) and reused across
    frames; this is what makes many-frame acquisitions affordable.
    """

    grid: BeamGrid
    probe: Probe
    flat_idx: np.ndarray  # int32 [n_pix, n_ch] into the flattened [n_samples, n_ch] record
    frac: np.ndarray  # float32 [n_pix, n_ch]
    weights: np.ndarray  # float32 [n_pix, n_ch]; 0 where the delay is out of record
    n_samples: int

    @property
    def n_channels(self) -> int:
        return self.probe.n_elements


def build_plan(
    grid: BeamGrid,
    probe: Probe,
    apod: Apodization,
    n_samples: int,
    t0: float = 0.0,
) -> BeamformPlan:
    if grid.z[0] <= 0:
        raise ValueError("grid must lie at positive depth")
    if n_samples < 2:
        raise ValueError("record too short")
    nz, nx = grid.shape
    n_ch = probe.n_elements
    elem_x = probe.element_x()
    n_pix = nz * nx
    flat_idx = np.empty((n_pix, n_ch), dtype=np.int32)
    frac = np.empty((n_pix, n_ch), dtype=np.float32)
    weights = np.empty((n_pix, n_ch), dtype=np.float32)
    X = np.broadcast_to(grid.x[None, :], (nz, nx)).reshape(-1)
    Z = np.broadcast_to(grid.z[:, None], (nz, nx)).reshape(-1)
    for i in range(n_ch):
        dx = elem_x[i] - X
        t = (Z + np.sqrt(dx * dx + Z * Z)) / probe.c
        s = (t - t0) * probe.fs
        inside = (s >= 0.0) & (s <= n_samples - 2)
        idx = np.floor(np.where(inside, s, 0.0)).astype(np.int32)
        w = apod.weights(dx, Z)
        w[~inside] = 0.0
        flat_idx[:, i] = idx * n_ch + i
        frac[:, i] = (s - idx).astype(np.float32)
        weights[:, i] = w.astype(np.float32)
    return BeamformPlan(grid=grid, probe=probe, flat_idx=flat_idx, frac=frac, weights=weights, n_samples=n_samples)


def _gather(plan: BeamformPlan, samples: np.ndarray) -> np.ndarray:
    """Delay-compensated channel samples for every pixel, [n_pix, n_ch] float32."""
    if samples.shape != (plan.n_samples, plan.n_channels):
        raise ValueError("frame shape does not match plan")
    flat = np.ascontiguousarray(samples, dtype=np.float32).ravel()
    s0 = flat[plan.flat_idx]
    s1 = flat[plan.flat_idx + plan.n_channels]
    return s0 + plan.frac * (s1 - s0)


def das_from_plan(plan: BeamformPlan, frame: RfFrame) -> BfImage:
    """Delay-and-sum: weighted channel sum per pixel (fixed reduction order)."""
    samp = _gather(plan, frame.samples)
    y = np.sum(samp.astype(np.float64) * plan.weights, axis=1)
    return BfImage(values=y.reshape(plan.grid.shape), grid=plan.grid, kind="rf_grid", beamformer="DAS")


def dmas_from_plan(plan: BeamformPlan, frame: RfFrame) -> BfImage:
    """Unfiltered DMAS: pairwise products of signed-sqrt, apodized channel samples.

    Accumulation runs in float64; the factored form is numerically delicate when
    the pair sum nearly cancels.
    """
    samp = _gather(plan, frame.samples)
    a = samp.astype(np.float64) * plan.weights
    v = np.sign(a) * np.sqrt(np.abs(a))
    s = v.sum(axis=1)
    q = np.einsum("ij,ij->i", v, v)
    y = 0.5 * (s * s - q)
    return BfImage(values=y.reshape(plan.grid.shape), grid=plan.grid, kind="rf_grid", beamformer="FDMAS")


def axial_line_rate(grid: BeamGrid, c: float) -> float:
    """Equivalent temporal sampling rate of an axial line: dt = 2*dz/c."""
    return c / (2.0 * grid.pitch_z)


def das_image(frame: RfFrame, grid: BeamGrid, apod: Apodization) -> BfImage:
    """One-shot DAS of a single frame (builds a throwaway plan)."""
    if grid.x.size == 0 or grid.z.size == 0:
        raise ValueError("empty grid")
    plan = build_plan(grid, frame.probe, apod, frame.samples.shape[0], frame.t0)
    return das_from_plan(plan, frame)


def dmas_image(frame: RfFrame, grid: BeamGrid, apod: Apodization) -> BfImage:
    """One-shot unfiltered DMAS of a single frame (pre-bandpass stage)."""
    plan = build_plan(grid, frame.probe, apod, frame.samples.shape[0], frame.t0)
    return dmas_from_plan(plan, frame)


def fdmas_image(frame: RfFrame, grid: BeamGrid, apod: Apodization, bpf: BandpassSpec | None = None) -> BfImage:
    """Filtered DMAS: DMAS per pixel, then the 2*fc bandpass along each axial line."""
    if bpf is None:
        bpf = default_bandpass(frame.probe)
    plan = build_plan(grid, frame.probe, apod, frame.samples.shape[0], frame.t0)
    return fdmas_from_plan(plan, frame, bpf)


def fdmas_from_plan(plan: BeamformPlan, frame: RfFrame, bpf: BandpassSpec | None = None) -> BfImage:
    if bpf is None:
        bpf = default_bandpass(plan.probe)
    raw = dmas_from_plan(plan, frame)
    filtered = filter_axial(raw, bpf, plan.probe.c)
    return filtered


def filter_axial(img: BfImage, bpf: BandpassSpec, c: float) -> BfImage:
    """Apply the bandpass to every axial line of an rf_grid image, zero-phase."""
    if img.kind != "rf_grid":
        raise ValueError("bandpass expects an rf_grid image")
    fs_line = axial_line_rate(img.grid, c)
    lo, hi = bpf.band
    if hi >= fs_line / 2.0:
        raise ValueError(
            f"axial pitch too coarse for the bandpass: line rate {fs_line/1e6:.1f} MHz, band edge {hi/1e6:.1f} MHz"
        )
    taps = firwin(bpf.n_taps, [lo, hi], pass_zero=False, window="hamming", fs=fs_line)
    padlen = min(3 * (bpf.n_taps - 1), img.values.shape[0] - 1)
    values = filtfilt(taps, [1.0], img.values, axis=0, padtype="even", padlen=padlen)
    return BfImage(values=values, grid=img.grid, kind="rf_grid", beamformer=img.beamformer)


def envelope(img: BfImage) -> BfImage:
    """Magnitude of the analytic signal along each axial line."""
    if img.kind != "rf_grid":
        raise ValueError("envelope expects an rf_grid image")
    analytic = hilbert(img.values, axis=0)
    return BfImage(values=np.abs(analytic), grid=img.grid, kind="envelope", beamformer=img.beamformer)


def log_compress(img: BfImage, dynamic_range_db: float = 60.0) -> BfImage:
    """20*log10(v/max), floored at -dynamic_range_db."""
    if img.kind != "envelope":
        raise ValueError("log_compress expects an envelope image")
    peak = float(np.max(img.values))
    if peak <= 0.0:
        raise ValueError("cannot log-compress an all-zero image")
    floor = 10.0 ** (-dynamic_range_db / 20.0)
    db = 20.0 * np.log10(np.maximum(img.values / peak, floor))
    return BfImage(values=db, grid=img.grid, kind="bmode_db", beamformer=img.beamformer)


def decimate_axial(img: BfImage, factor: int) -> BfImage:
    """Keep every factor-th axial row (used to map the fine grid back to square pixels)."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return img
    grid = BeamGrid(x=img.grid.x, z=img.grid.z[::factor])
    return BfImage(values=img.values[::factor, :], grid=grid, kind=img.kind, beamformer=img.beamformer)
