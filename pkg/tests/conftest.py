"""Shared fixtures: pinned point scatterers and a beamformed point-spread pair.

A "pinned" canal is degenerate (picometer length and diameter), so the seeded
spawn/jitter draws cannot move the scatterer by more than ~1 pm; that turns the
flow phantom into an exact point-target generator without bypassing the public
simulation API.
"""

import numpy as np
import pytest

from ulmkit import beamform, rfsim

PIN = 1e-12  # meters; far below any tolerance used in the tests


def pinned_canal(x: float, z: float) -> rfsim.Canal:
    return rfsim.Canal(points=((x, z), (x, z + PIN)), diameter=PIN, speed=PIN)


def point_spec(*positions, noise_db=None, n_frames=1, seed=7) -> rfsim.PhantomSpec:
    """Phantom whose bubbles are pinned at the given (x, z) positions."""
    return rfsim.PhantomSpec(
        canals=tuple(pinned_canal(x, z) for x, z in positions),
        bubbles_per_frame=len(positions),
        n_frames=n_frames,
        noise_db=noise_db,
        rng_seed=seed,
    )


def point_frame(probe, *positions, n_samples=None, n_cycles=5) -> rfsim.RfFrame:
    spec = point_spec(*positions)
    if n_samples is None:
        n_samples = rfsim.record_length(spec, probe, n_cycles) + 300
    return rfsim.simulate_frame(spec, probe, 0, n_samples, n_cycles)


def gaussian_patch(dx, dz, sigma=1.0, amp=1.0, offset=0.0, pitch=1.0):
    """5x5 Patch sampled from an isotropic Gaussian peaked at (dx, dz) pixels
    from the patch center; patch coordinates put that center at the origin."""
    from ulmkit import localize

    i, j = np.mgrid[0:5, 0:5]
    vals = amp * np.exp(-(((j - 2 - dx) ** 2 + (i - 2 - dz) ** 2) / (2.0 * sigma**2))) + offset
    return localize.Patch(values=vals, center_pixel=(2, 2), pitch=pitch, x0=-2.0 * pitch, z0=-2.0 * pitch)


@pytest.fixture(scope="session")
def probe():
    return rfsim.Probe()


@pytest.fixture(scope="session")
def psf_pair(probe):
    """DAS and F-DMAS images of one scatterer at (0, 10 mm), Hann/f#1.

    Beamformed on the 13x axially refined grid (the 2fc product band needs the
    fine line rate); both fine envelopes and the raw DMAS grid are kept so the
    spectrum and resolution tests share one beamforming pass.
    """
    lam = probe.wavelength
    target = (0.0, 10e-3)
    frame = point_frame(probe, target)
    grid = beamform.make_grid(-10 * lam, 10 * lam, 10e-3 - 6 * lam, 10e-3 + 6 * lam, lam)
    fine = beamform.refine_axial(grid, 13)
    plan = beamform.build_plan(fine, probe, beamform.Apodization(), frame.samples.shape[0])
    dmas_raw = beamform.dmas_from_plan(plan, frame)
    return {
        "target": target,
        "frame": frame,
        "plan": plan,
        "grid": grid,
        "fine": fine,
        "dmas_raw": dmas_raw,
        "das_env": beamform.envelope(beamform.das_from_plan(plan, frame)),
        "fdmas_env": beamform.envelope(beamform.filter_axial(dmas_raw, beamform.default_bandpass(probe), probe.c)),
    }
