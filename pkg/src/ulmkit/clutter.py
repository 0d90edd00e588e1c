"""SVD clutter filtering of a beamformed image stack.

The stack is reshaped to a Casorati matrix (pixels x frames); zeroing the
largest singular components removes spatially coherent, slowly varying clutter
while moving scatterers survive in the mid ranks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ulmkit.beamform import BfImage


@dataclass(frozen=True)
class ImageStack:
    """Frames on a common grid, with a pixels-x-frames Casorati view."""

    frames: tuple  # tuple of BfImage, same grid and kind

    def __post_init__(self):
        if len(self.frames) < 2:
            raise ValueError("stack needs at least 2 frames")
        g0 = self.frames[0].grid
        k0 = self.frames[0].kind
        for f in self.frames[1:]:
            if f.grid.shape != g0.shape or not np.array_equal(f.grid.x, g0.x) or not np.array_equal(f.grid.z, g0.z):
                raise ValueError("frames must share one grid")
            if f.kind != k0:
                raise ValueError("frames must share one kind")

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def grid(self):
        return self.frames[0].grid

    @property
    def kind(self) -> str:
        return self.frames[0].kind

    def casorati(self) -> np.ndarray:
        """[n_pixels, n_frames] float64 view of the stack."""
        return np.stack([f.values.ravel() for f in self.frames], axis=1).astype(np.float64)


def svd_filter(stack: ImageStack, cut_low: int, cut_high: int = 0) -> ImageStack:
    """Zero the cut_low largest and cut_high smallest singular values, reconstruct.

    The decomposition runs on the frames-x-frames Gram matrix when the stack has
    fewer frames than pixels (the normal case), so cost scales with n_frames^2,
    not the pixel count. Output frames carry kind "filtered" (values may cross
    zero after removal of the dominant components).
    """
    if cut_low < 0 or cut_high < 0:
        raise ValueError("cuts must be >= 0")
    C = stack.casorati()
    n_pix, n_frames = C.shape
    rank_bound = min(n_pix, n_frames)
    if cut_low + cut_high >= rank_bound:
        raise ValueError("cut_low + cut_high must be below the stack rank bound")
    if n_frames <= n_pix:
        # Gram route: right-singular vectors from the small eigenproblem
        gram = C.T @ C
        eigvals, eigvecs = np.linalg.eigh(gram)  # ascending
        order = np.arange(n_frames)[::-1]  # descending eigenvalue index, stable for ties
        V = eigvecs[:, order]
        keep = V[:, cut_low : n_frames - cut_high]
        filtered = C @ (keep @ keep.T)
    else:
        U, s, Vt = np.linalg.svd(C, full_matrices=False)
        s = s.copy()
        s[:cut_low] = 0.0
        if cut_high > 0:
            s[len(s) - cut_high :] = 0.0
        filtered = (U * s) @ Vt
    shape = stack.grid.shape
    frames = tuple(
        BfImage(values=filtered[:, j].reshape(shape), grid=stack.grid, kind="filtered", beamformer=f.beamformer)
        for j, f in enumerate(stack.frames)
    )
    return ImageStack(frames=frames)
