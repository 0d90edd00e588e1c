"""ulmkit: ultrasound localization microscopy at desk scale.

Plane-wave RF simulation, DAS / filtered-DMAS beamforming, SVD clutter
filtering, four subpixel localizers, tracking, super-resolved map rendering,
and map quality metrics.
"""

from ulmkit.rfsim import Probe, Canal, PhantomSpec, RfFrame, make_pulse, advance_bubbles, simulate_frame
from ulmkit.beamform import (
    BeamGrid,
    Apodization,
    BfImage,
    BandpassSpec,
    propagation_delay,
    signed_sqrt,
    dmas_pixel,
    das_image,
    fdmas_image,
    envelope,
    log_compress,
)
from ulmkit.clutter import ImageStack, svd_filter
from ulmkit.localize import (
    Detection,
    Patch,
    LocalizationFailure,
    detect_candidates,
    localize_sp_interp,
    localize_gauss_fit,
    localize_weighted_average,
    localize_radial_symmetry,
    localize_frame,
)
from ulmkit.track import Track, SuperResMap, link_detections, velocities, render_density, render_velocity, power_doppler
from ulmkit.metrics import MetricReport, local_std_image, local_contrast_score, fwhm, lateral_spread_score

__version__ = "0.1.0"
