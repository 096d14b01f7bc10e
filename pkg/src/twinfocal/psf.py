"""Lateral point spread functions, pupil transforms, and width metrics.

Three instrument responses share one pupil model (hard circular aperture
by default, tabulated radial profiles optionally):

* widefield:  airy_amp(2 pi a y / (lambda_o f))^2
* confocal:   airy_amp(2 pi a y / (lambda_o f))^4
* twin:       airy_amp(2 Omega_o a y/(s0 c))^2 * airy_amp(2 Omega_e a y/(s0 c))^2
              * exp(-y^2 / r0^2)

with Omega_j = 2 pi c / lambda_j and r0 the focused pump spot radius.
With degenerate wavelengths and s0 = f the twin arguments are exactly the
confocal argument at 2y, so removing the Gaussian envelope yields a
response that is the confocal one with halved width.

All three peak at exactly 1 for y = 0 by construction; no numerical
renormalization is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import ConfigError, ScanRangeError
from .optics import SPEED_OF_LIGHT, MicroscopeConfig, r0
from .specfun import airy_amp, bessel_j0

__all__ = [
    "HardCircularPupil",
    "TabulatedRadialPupil",
    "Pupil",
    "RadialProfile",
    "pupil_ft",
    "psf_widefield",
    "psf_confocal",
    "psf_twin",
    "fwhm",
    "width_reduction",
]

# Coarse grid used to bracket the half-max crossing before bisection.
_FWHM_GRID = 2048
_FWHM_REL_TOL = 1e-8


# ============================================================================
# pupils
# ============================================================================

@dataclass(frozen=True)
class HardCircularPupil:
    """Uniformly transmitting circular aperture of the given radius [m]."""

    radius: float

    def __post_init__(self) -> None:
        if not (self.radius > 0.0) or not math.isfinite(self.radius):
            raise ConfigError("pupil radius must be positive and finite")


@dataclass(frozen=True, eq=False)
class TabulatedRadialPupil:
    """Radially sampled pupil amplitude, interpolated by its sample grid.

    ``radii`` must increase strictly from 0 and carry at least 8 samples;
    amplitudes are clamped to the physical range [0, 1] by validation.
    """

    radii: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        radii = np.asarray(self.radii, dtype=float)
        amps = np.asarray(self.amplitudes, dtype=float)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "amplitudes", amps)
        if radii.ndim != 1 or radii.shape != amps.shape:
            raise ConfigError("pupil samples must be two equal-length 1D arrays")
        if radii.size < 8:
            raise ConfigError("tabulated pupil needs at least 8 samples")
        if radii[0] != 0.0 or np.any(np.diff(radii) <= 0.0):
            raise ConfigError("pupil radii must increase strictly from 0")
        if np.any(~np.isfinite(amps)) or np.any(amps < 0.0) or np.any(amps > 1.0):
            raise ConfigError("pupil amplitudes must lie in [0, 1]")


Pupil = Union[HardCircularPupil, TabulatedRadialPupil]


def pupil_ft(pupil: Pupil, q) -> float:
    """Normalized far-field amplitude of a pupil at spatial frequency q [1/m].

    For the hard circular aperture this is the Airy amplitude
    ``airy_amp(q * radius)``.  Tabulated pupils are transformed with a
    zeroth-order Hankel-type quadrature over their samples,
    ``integral p(r) J0(q r) r dr``, normalized to 1 at q = 0.
    """
    scalar = np.isscalar(q) or np.ndim(q) == 0
    qa = np.asarray(q, dtype=float)
    if np.any(~np.isfinite(qa)) or np.any(qa < 0.0):
        raise ValueError("spatial frequency must be finite and non-negative")
    if isinstance(pupil, HardCircularPupil):
        out = airy_amp(qa * pupil.radius)
    elif isinstance(pupil, TabulatedRadialPupil):
        radii = pupil.radii
        weights = pupil.amplitudes * radii
        norm = np.trapezoid(weights, radii)
        if norm <= 0.0:
            raise ConfigError("tabulated pupil has zero transmitted power")
        flat = np.atleast_1d(qa)
        vals = np.empty(flat.shape)
        for i, qi in enumerate(flat):
            vals[i] = np.trapezoid(weights * bessel_j0(qi * radii), radii) / norm
        out = vals.reshape(qa.shape)
    else:
        raise ConfigError(f"not a pupil: {pupil!r}")
    return float(out) if scalar else out


# ============================================================================
# point spread functions
# ============================================================================

def _check_offsets(y) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0):
        raise ValueError("scan offset must be finite and non-negative")
    return arr


def psf_widefield(y, cfg: MicroscopeConfig):
    """Widefield intensity response at radial offset y [m]; peak 1 at y = 0."""
    arr = _check_offsets(y)
    amp = airy_amp(2.0 * math.pi * cfg.a * arr / (cfg.lambda_o * cfg.f))
    out = amp * amp
    return float(out) if np.ndim(y) == 0 else out


def psf_confocal(y, cfg: MicroscopeConfig):
    """Confocal intensity response: the widefield amplitude to the fourth power."""
    arr = _check_offsets(y)
    amp = airy_amp(2.0 * math.pi * cfg.a * arr / (cfg.lambda_o * cfg.f))
    out = amp**4
    return float(out) if np.ndim(y) == 0 else out


def psf_twin(y, cfg: MicroscopeConfig):
    """Coincidence-detection intensity response of the twin-photon instrument.

    The product of the two single-photon Airy intensities evaluated with
    doubled arguments (signal and idler fold back through the objective)
    times the pump-spot Gaussian ``exp(-y^2/r0^2)``.  The Gaussian factor
    is dropped entirely when ``cfg.pump_gaussian`` is False (unfocused
    pump), which makes the argument-doubling identity against the
    confocal response exact.
    """
    arr = _check_offsets(y)
    scale = 2.0 * cfg.a / (cfg.s0 * SPEED_OF_LIGHT)
    amp_o = airy_amp(cfg.omega_o * scale * arr)
    amp_e = airy_amp(cfg.omega_e * scale * arr)
    out = (amp_o * amp_o) * (amp_e * amp_e)
    if cfg.pump_gaussian:
        spot = r0(cfg)
        out = out * np.exp(-(arr / spot) ** 2)
    return float(out) if np.ndim(y) == 0 else out


# ============================================================================
# width metrics
# ============================================================================

@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Peak-normalized intensity samples along non-negative scan offsets."""

    offsets: np.ndarray
    intensity: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        offs = np.asarray(self.offsets, dtype=float)
        vals = np.asarray(self.intensity, dtype=float)
        object.__setattr__(self, "offsets", offs)
        object.__setattr__(self, "intensity", vals)
        if offs.ndim != 1 or offs.shape != vals.shape:
            raise ConfigError("profile needs two equal-length 1D arrays")
        if offs[0] != 0.0 or np.any(np.diff(offs) <= 0.0):
            raise ConfigError("profile offsets must increase strictly from 0")
        if abs(vals[0] - 1.0) > 1e-12:
            raise ConfigError("profile must be peak-normalized: intensity[0] = 1")
        if np.any(~np.isfinite(vals)) or np.any(vals < 0.0) or np.any(vals > 1.0 + 1e-12):
            raise ConfigError("profile intensities must be finite and within [0, 1]")


def fwhm(profile: RadialProfile | Callable[[float], float], scan_range: float | None = None) -> float:
    """Full width at half maximum of a peak-normalized radial intensity.

    Returns ``2 * y_half`` where ``y_half`` is the smallest positive
    offset at which the intensity crosses 0.5, found by bracketing on a
    coarse grid (>= 2048 points over the range) and bisecting to 1e-8
    relative.  Re-crossings from sidelobes beyond the first crossing are
    ignored.

    Parameters
    ----------
    profile : RadialProfile or callable
        Either a sampled profile (its own offset range is used) or a
        callable intensity of a non-negative offset, in which case
        ``scan_range`` is required.
    scan_range : float, optional
        Upper end of the search interval [0, scan_range] for callables.

    Raises
    ------
    ScanRangeError
        If the intensity never reaches 0.5 inside the range; widen the
        scan range.
    """
    if isinstance(profile, RadialProfile):
        offsets, values = profile.offsets, profile.intensity
        span = float(offsets[-1])
        func = lambda t: float(np.interp(t, offsets, values))  # noqa: E731
        grid_n = max(_FWHM_GRID, 4 * offsets.size)
    elif callable(profile):
        if scan_range is None:
            raise ValueError("scan_range is required for callable intensities")
        if not (scan_range > 0.0) or not math.isfinite(scan_range):
            raise ValueError("scan_range must be positive and finite")
        span = float(scan_range)
        func = profile
        grid_n = _FWHM_GRID
    else:
        raise TypeError("profile must be a RadialProfile or a callable")

    if abs(func(0.0) - 1.0) > 1e-9:
        raise ValueError("intensity must be peak-normalized to 1 at y = 0")

    grid = np.linspace(0.0, span, grid_n)
    lo = 0.0
    hi = None
    for t in grid[1:]:
        value = func(float(t))
        if value < 0.5:
            hi = float(t)
            break
        lo = float(t)
    if hi is None:
        raise ScanRangeError(
            f"intensity never fell below half max within [0, {span:g}]; widen the scan range"
        )
    while (hi - lo) > _FWHM_REL_TOL * hi:
        mid = 0.5 * (lo + hi)
        if func(mid) < 0.5:
            hi = mid
        else:
            lo = mid
    return lo + hi  # 2 * y_half


def width_reduction(reference: float, narrower: float) -> float:
    """Percent width reduction, ``100 * (1 - narrower / reference)``."""
    if not (reference > 0.0) or not (narrower > 0.0):
        raise ValueError("widths must be positive")
    return 100.0 * (1.0 - narrower / reference)
