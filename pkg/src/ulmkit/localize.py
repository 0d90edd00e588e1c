"""Microbubble candidate detection and four subpixel localizers.

Candidates are greedy intensity maxima of an envelope frame; each yields a 5x5
patch at the image's (wavelength) pitch. The four refiners return a subpixel
position inside that patch: spline-interpolation argmax, isotropic Gaussian
fit, weighted average of the central lines, and radial-symmetry center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from ulmkit.beamform import BfImage

METHODS = ("spinterp", "gaussfit", "wa", "rs")

PATCH_HALF = 2  # 5x5 patches


class LocalizationFailure(ValueError):
    """Degenerate patch: the caller drops the detection."""


@dataclass(frozen=True)
class Detection:
    """One subpixel microbubble position."""

    x: float  # meters
    z: float  # meters
    intensity: float  # linear amplitude at the patch center
    frame_index: int
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.intensity > 0:
            raise ValueError("intensity must be > 0")


@dataclass(frozen=True)
class Patch:
    """5x5 intensity window centered on a detected peak."""

    values: np.ndarray  # 5x5, non-negative, linear scale
    center_pixel: tuple  # (row, col) in the source image
    pitch: float  # meters per pixel (wavelength-scale grid)
    x0: float = 0.0  # image-grid origin, meters
    z0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.shape != (5, 5):
            raise ValueError("patch must be 5x5")
        if float(self.values.min()) < 0.0:
            raise ValueError("patch values must be >= 0")
        if self.values[2, 2] < self.values.max() - 1e-12 * max(self.values.max(), 1.0):
            raise ValueError("patch center must hold the window maximum")
        if self.pitch <= 0:
            raise ValueError("pitch must be > 0")

    def position_of(self, col_offset: float, row_offset: float) -> tuple:
        """Map a (lateral, axial) offset in pixels to meters."""
        x = self.x0 + (self.center_pixel[1] + col_offset) * self.pitch
        z = self.z0 + (self.center_pixel[0] + row_offset) * self.pitch
        return x, z


def detect_candidates(
    img: BfImage,
    max_count: int = 30,
    min_separation_px: int = 3,
    threshold_rel: float = 0.3,
) -> list:
    """Greedy local-maxima selection, brightest first.

    Accepts envelope or SVD-filtered frames (negatives clamp to 0). Each accepted
    peak suppresses a min_separation_px neighborhood; peaks whose 5x5 patch would
    cross the border are discarded, as are peaks shadowed by a brighter earlier
    peak's skirt inside their window (the patch center must stay the window max).
    """
    if img.kind not in ("envelope", "filtered"):
        raise ValueError("detection expects an envelope or filtered image")
    if max_count < 1:
        raise ValueError("max_count must be >= 1")
    values = np.maximum(np.asarray(img.values, dtype=np.float64), 0.0)
    work = values.copy()
    n_z, n_x = values.shape
    global_max = float(values.max())
    if global_max <= 0.0:
        return []
    floor = threshold_rel * global_max
    patches = []
    m = min_separation_px
    for _ in range(max_count * 4):  # discarded peaks do not eat the budget
        if len(patches) >= max_count:
            break
        flat = int(np.argmax(work))  # first occurrence = smallest row, then col
        r, c = divmod(flat, n_x)
        peak = work[r, c]
        if peak < floor or peak <= 0.0:
            break
        work[max(r - m, 0) : r + m + 1, max(c - m, 0) : c + m + 1] = -1.0
        if r < PATCH_HALF or r >= n_z - PATCH_HALF or c < PATCH_HALF or c >= n_x - PATCH_HALF:
            continue  # clipped at the border
        window = values[r - PATCH_HALF : r + PATCH_HALF + 1, c - PATCH_HALF : c + PATCH_HALF + 1]
        if window.max() > values[r, c]:
            continue  # shadowed by a brighter neighbor's skirt
        patches.append(
            Patch(
                values=window.copy(),
                center_pixel=(r, c),
                pitch=img.grid.pitch_x,
                x0=float(img.grid.x[0]),
                z0=float(img.grid.z[0]),
            )
        )
    return patches


def _finish(patch: Patch, col_off: float, row_off: float, frame_index: int, method: str) -> Detection:
    x, z = patch.position_of(col_off, row_off)
    intensity = float(patch.values[2, 2])
    if intensity <= 0.0:
        raise LocalizationFailure("zero-intensity patch center")
    return Detection(x=x, z=z, intensity=intensity, frame_index=frame_index, method=method)


def localize_sp_interp(patch: Patch, frame_index: int = 0) -> Detection:
    """Argmax of a natural bicubic-spline interpolant on a 41x41 grid at 0.1-pixel pitch.

    Ties break toward the smallest row, then column (C-order argmax).
    """
    coarse = np.arange(-PATCH_HALF, PATCH_HALF + 1, dtype=np.float64)
    fine = np.linspace(-PATCH_HALF, PATCH_HALF, 41)
    along_cols = CubicSpline(coarse, patch.values, axis=1, bc_type="natural")(fine)
    dense = CubicSpline(coarse, along_cols, axis=0, bc_type="natural")(fine)
    if float(dense.max()) == float(dense.min()):
        return _finish(patch, 0.0, 0.0, frame_index, "spinterp")  # flat interpolant: stay centered
    flat = int(np.argmax(dense))
    r, c = divmod(flat, fine.size)
    return _finish(patch, float(fine[c]), float(fine[r]), frame_index, "spinterp")


def localize_gauss_fit(patch: Patch, frame_index: int = 0, max_iter: int = 100) -> Detection:
    """Least-squares isotropic Gaussian fit A*exp(-r^2/(2*sigma^2)) + b.

    Damped Gauss-Newton on (A, x0, z0, sigma, b); positions solved in pixel
    units. Non-convergence or sigma escaping (0.05, 5) pixels raises
    LocalizationFailure.
    """
    y = patch.values.ravel()
    if float(y.max() - y.min()) <= 0.0:
        raise LocalizationFailure("constant patch: degenerate fit")
    coarse = np.arange(-PATCH_HALF, PATCH_HALF + 1, dtype=np.float64)
    xs, zs = [g.ravel() for g in np.meshgrid(coarse, coarse, indexing="xy")]
    p = np.array([float(y.max() - y.min()), 0.0, 0.0, 0.5, float(y.min())])
    lam = 1e-3
    converged = False
    for _ in range(max_iter):
        a, x0, z0, sig, b = p
        e = np.exp(-((xs - x0) ** 2 + (zs - z0) ** 2) / (2.0 * sig * sig))
        r = y - (a * e + b)
        jac = np.empty((y.size, 5))
        jac[:, 0] = e
        jac[:, 1] = a * e * (xs - x0) / (sig * sig)
        jac[:, 2] = a * e * (zs - z0) / (sig * sig)
        jac[:, 3] = a * e * ((xs - x0) ** 2 + (zs - z0) ** 2) / (sig**3)
        jac[:, 4] = 1.0
        h = jac.T @ jac
        g = jac.T @ r
        try:
            step = np.linalg.solve(h + lam * np.diag(np.diag(h)), g)
        except np.linalg.LinAlgError as exc:
            raise LocalizationFailure("singular normal equations") from exc
        trial = p + step
        e2 = np.exp(-((xs - trial[1]) ** 2 + (zs - trial[2]) ** 2) / (2.0 * trial[3] ** 2 + 1e-300))
        if float(np.sum((y - (trial[0] * e2 + trial[4])) ** 2)) < float(np.sum(r**2)):
            p = trial
            lam = max(lam / 3.0, 1e-12)
        else:
            lam = min(lam * 10.0, 1e9)
        if not 0.05 < abs(p[3]) < 5.0:
            raise LocalizationFailure("fit width out of range")
        if float(np.hypot(step[1], step[2])) < 1e-6:
            converged = True
            break
    if not converged:
        raise LocalizationFailure("fit did not converge")
    if not (abs(p[1]) <= PATCH_HALF and abs(p[2]) <= PATCH_HALF):
        raise LocalizationFailure("fit center left the patch")
    return _finish(patch, float(p[1]), float(p[2]), frame_index, "gaussfit")


def localize_weighted_average(patch: Patch, frame_index: int = 0, literal_axial_row: bool = False) -> Detection:
    """Weighted average of the central row and column with weights [-2,-1,0,1,2].

    literal_axial_row swaps which line feeds which coordinate (the alternative
    reading where the axial line produces the lateral position).
    """
    w = np.arange(-PATCH_HALF, PATCH_HALF + 1, dtype=np.float64)
    row = patch.values[2, :]
    col = patch.values[:, 2]
    if float(row.sum()) <= 0.0 or float(col.sum()) <= 0.0:
        raise LocalizationFailure("zero-sum central line")
    off_row = float((w * row).sum() / row.sum())
    off_col = float((w * col).sum() / col.sum())
    lateral, axial = (off_col, off_row) if literal_axial_row else (off_row, off_col)
    lateral = min(max(lateral, -2.0), 2.0)
    axial = min(max(axial, -2.0), 2.0)
    return _finish(patch, lateral, axial, frame_index, "wa")


def localize_radial_symmetry(patch: Patch, frame_index: int = 0) -> Detection:
    """Radial-symmetry center: least-squares point nearest all gradient lines.

    Gradients live on the 4x4 midpoint lattice (diagonal differences of 2x2
    cells, rotated back to axis-aligned components and 3x3-smoothed); each
    midpoint casts a line along its gradient, weighted by |grad|^2 over the
    distance to the gradient-magnitude centroid. Solved as a 2x2 system in
    projection form.
    """
    I = patch.values
    dI_u = I[:-1, 1:] - I[1:, :-1]  # along (+x, -z) diagonal
    dI_v = I[:-1, :-1] - I[1:, 1:]  # along (-x, -z) diagonal
    dI_u = _box3(dI_u)
    dI_v = _box3(dI_v)
    gx = dI_u - dI_v
    gz = -(dI_u + dI_v)
    mag2 = gx * gx + gz * gz
    total = float(mag2.sum())
    if total <= 0.0:
        raise LocalizationFailure("zero gradient energy")
    mid = np.arange(4, dtype=np.float64) - 1.5  # midpoint lattice, pixel units
    mx, mz = np.meshgrid(mid, mid, indexing="xy")
    xc = float((mag2 * mx).sum() / total)
    zc = float((mag2 * mz).sum() / total)
    dist = np.sqrt((mx - xc) ** 2 + (mz - zc) ** 2)
    w = mag2 / np.maximum(dist, 1e-9)
    # project out the gradient direction: A p = b with A = sum w (I - g g^T/|g|^2)
    with np.errstate(invalid="ignore", divide="ignore"):
        gxx = np.where(mag2 > 0, gx * gx / mag2, 0.0)
        gzz = np.where(mag2 > 0, gz * gz / mag2, 0.0)
        gxz = np.where(mag2 > 0, gx * gz / mag2, 0.0)
    a11 = float((w * (1.0 - gxx)).sum())
    a12 = float((w * (-gxz)).sum())
    a22 = float((w * (1.0 - gzz)).sum())
    b1 = float((w * ((1.0 - gxx) * mx - gxz * mz)).sum())
    b2 = float((w * (-gxz * mx + (1.0 - gzz) * mz)).sum())
    det = a11 * a22 - a12 * a12
    if abs(det) < 1e-12 * max(a11 * a22, 1e-300):
        raise LocalizationFailure("degenerate gradient field")
    x = (a22 * b1 - a12 * b2) / det
    z = (a11 * b2 - a12 * b1) / det
    x = min(max(x, -2.0), 2.0)
    z = min(max(z, -2.0), 2.0)
    return _finish(patch, x, z, frame_index, "rs")


def _box3(a: np.ndarray) -> np.ndarray:
    """3x3 boxcar mean with zero padding (classic gradient pre-smoothing)."""
    p = np.pad(a, 1, mode="constant")
    return (
        p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
        + p[1:-1, :-2] + p[1:-1, 1:-1] + p[1:-1, 2:]
        + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:]
    ) / 9.0


_DISPATCH = {
    "spinterp": localize_sp_interp,
    "gaussfit": localize_gauss_fit,
    "wa": localize_weighted_average,
    "rs": localize_radial_symmetry,
}


def refine_patch(patch: Patch, method: str, frame_index: int = 0, wa_literal: bool = False) -> Detection:
    """Run one named refiner on a patch; raises LocalizationFailure on degenerate input."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method == "wa":
        return localize_weighted_average(patch, frame_index, literal_axial_row=wa_literal)
    return _DISPATCH[method](patch, frame_index)


def localize_frame(
    img: BfImage,
    method: str,
    frame_index: int = 0,
    max_count: int = 30,
    min_separation_px: int = 3,
    threshold_rel: float = 0.3,
    wa_literal: bool = False,
) -> list:
    """Detect candidates, refine each with one method; failed refinements are dropped."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    patches = detect_candidates(img, max_count, min_separation_px, threshold_rel)
    out = []
    for patch in patches:
        try:
            if method == "wa":
                det = localize_weighted_average(patch, frame_index, literal_axial_row=wa_literal)
            else:
                det = _DISPATCH[method](patch, frame_index)
        except LocalizationFailure:
            continue
        out.append(det)
    return out
