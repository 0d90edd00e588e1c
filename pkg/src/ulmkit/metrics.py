"""Map quality metrics: local contrast score, lateral spread score, and FWHM.

The local contrast score is the mean (and spread) of a moving 2x2 local
standard deviation over the max-normalized map: sharp, well-separated ridges
produce high local variation, blurred maps do not. The lateral spread score is
the mean per-row FWHM across a vertical canal region, in wavelengths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FwhmResult:
    width: float  # meters (pitch units times pitch)
    censored: bool  # an edge stood in for a missing half-max crossing


@dataclass(frozen=True)
class SpreadResult:
    value: float  # mean FWHM over valid rows, in wavelengths
    n_rows: int  # rows measured
    n_censored: int  # rows dropped for hitting the region edge
    n_skipped: int  # all-zero rows


@dataclass(frozen=True)
class MetricReport:
    """One scored (beamformer, localizer) combination."""

    beamformer: str
    localizer: str
    local_contrast_mean: float
    local_contrast_std: float
    lateral_spread_lambda: float  # nan when no canal region was given

    def __post_init__(self):
        if self.local_contrast_mean < 0 or self.local_contrast_std < 0:
            raise ValueError("contrast statistics must be >= 0")


def local_std_image(values: np.ndarray) -> np.ndarray:
    """Population std of every 2x2 window of the max-normalized map.

    Output is (R-1) x (C-1): valid windows only, no padding.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 2:
        raise ValueError("map must be 2-D, at least 2x2")
    if np.any(v < 0):
        raise ValueError("map must be non-negative")
    peak = float(v.max())
    if peak <= 0.0:
        raise ValueError("all-zero map: normalization undefined")
    m = v / peak
    q = np.stack([m[:-1, :-1], m[:-1, 1:], m[1:, :-1], m[1:, 1:]])
    mean = q.mean(axis=0)
    return np.sqrt(np.mean((q - mean) ** 2, axis=0))


def local_contrast_score(values: np.ndarray, masked: bool = True) -> tuple:
    """Mean and population std of the local-std image.

    With masked=True (default) statistics run over windows touching nonzero map
    content only; a nearly empty map otherwise scores near zero regardless of
    ridge quality. masked=False uses every window.
    """
    std_img = local_std_image(values)
    if masked:
        v = np.asarray(values, dtype=np.float64)
        nz = v > 0
        touch = nz[:-1, :-1] | nz[:-1, 1:] | nz[1:, :-1] | nz[1:, 1:]
        sel = std_img[touch]
    else:
        sel = std_img.ravel()
    if sel.size == 0:
        return (0.0, 0.0)
    return (float(sel.mean()), float(sel.std()))


def fwhm(profile: np.ndarray, pitch: float) -> FwhmResult:
    """Width of the main lobe at half its maximum, sub-sample interpolated.

    Walks left and right from the global maximum to the first samples below
    max/2 and interpolates each crossing linearly; a missing crossing is
    replaced by the array edge and flagged censored.
    """
    p = np.asarray(profile, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("profile must be a non-empty 1-D array")
    if np.any(p < 0):
        raise ValueError("profile must be non-negative")
    peak = float(p.max())
    if peak <= 0.0:
        raise ValueError("all-zero profile")
    if pitch <= 0:
        raise ValueError("pitch must be > 0")
    imax = int(np.argmax(p))
    half = peak / 2.0
    censored = False
    left = 0.0
    for i in range(imax - 1, -1, -1):
        if p[i] < half:
            left = i + (half - p[i]) / (p[i + 1] - p[i])
            break
    else:
        censored = True
    right = float(p.size - 1)
    for i in range(imax + 1, p.size):
        if p[i] < half:
            right = (i - 1) + (p[i - 1] - half) / (p[i - 1] - p[i])
            break
    else:
        censored = True
    return FwhmResult(width=(right - left) * pitch, censored=censored)


def lateral_spread_score(
    values: np.ndarray,
    pitch_x: float,
    lam: float,
    region=None,
) -> SpreadResult:
    """Mean per-row FWHM across a vertical-canal region, in wavelengths.

    region is (row0, row1, col0, col1), half-open, in map bins; None means the
    whole map. All-zero rows are skipped; censored rows are excluded from the
    mean but counted.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError("map must be 2-D")
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    if region is None:
        region = (0, v.shape[0], 0, v.shape[1])
    r0, r1, c0, c1 = region
    if not (0 <= r0 < r1 <= v.shape[0] and 0 <= c0 < c1 <= v.shape[1]):
        raise ValueError("region outside the map")
    widths = []
    n_censored = 0
    n_skipped = 0
    for r in range(r0, r1):
        row = v[r, c0:c1]
        if float(row.max()) <= 0.0:
            n_skipped += 1
            continue
        res = fwhm(row, pitch_x)
        if res.censored:
            n_censored += 1
            continue
        widths.append(res.width)
    if not widths:
        raise ValueError("no measurable rows in the region")
    return SpreadResult(
        value=float(np.mean(widths)) / lam,
        n_rows=len(widths),
        n_censored=n_censored,
        n_skipped=n_skipped,
    )
