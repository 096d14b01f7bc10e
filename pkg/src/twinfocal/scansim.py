"""Scan simulation: trace samples past each instrument and score resolution.

A scan plan moves the sample relative to the optical axis along a line or
over a grid and records the detected rate at each offset.  The twin-photon
instrument squares the coherent coincidence amplitude (both photons cross
the sample at one point, so sample points interfere); the classical
widefield and confocal instruments image incoherently, integrating
``|t|^2`` against their intensity responses.  Images are peak-normalized,
with the raw peak kept for reference.

Parallelism: scan points are independent, so they are chunked across a
thread pool sized by the TWINFOCAL_THREADS environment variable (unset or
empty means 1; 0 means one thread per CPU).  Chunks are reassembled in
index order, so results are bit-identical for every thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Union

import numpy as np

from .errors import ConfigError, NumericalError, ScanRangeError
from .optics import MicroscopeConfig, airy_radius
from .psf import fwhm, psf_confocal, psf_twin, psf_widefield
from .coincidence import (
    Delta,
    DispersionModel,
    QuadratureSpec,
    SampleTransmittance,
    TwoPoint,
    coincidence_rate,
    gate,
    integrate_sample,
)

__all__ = [
    "Instrument",
    "Line",
    "Grid",
    "ScanPlan",
    "ScanImage",
    "scan",
    "dip_contrast",
    "min_resolvable_separation",
]


class Instrument(Enum):
    WIDEFIELD = "widefield"
    CONFOCAL = "confocal"
    TWIN_PHOTON = "twin"


@dataclass(frozen=True)
class Line:
    """Symmetric line scan: ``samples`` offsets from -half_range to
    +half_range along a unit direction in the sample plane."""

    direction: tuple[float, float] = (1.0, 0.0)
    half_range: float = 1e-6
    samples: int = 129

    def __post_init__(self) -> None:
        norm = math.hypot(*self.direction)
        if abs(norm - 1.0) > 1e-9:
            raise ConfigError("scan direction must be a unit 2-vector")
        if not (self.half_range > 0.0) or not math.isfinite(self.half_range):
            raise ConfigError("scan half range must be positive and finite")
        if self.samples < 16:
            raise ConfigError("line scans need at least 16 samples")

    def offsets(self) -> np.ndarray:
        t = np.linspace(-self.half_range, self.half_range, self.samples)
        d = np.asarray(self.direction, dtype=float)
        return t[:, None] * d[None, :]


@dataclass(frozen=True)
class Grid:
    """Rectangular raster of scan offsets, row-major with x varying fastest."""

    half_range_x: float = 1e-6
    half_range_y: float = 1e-6
    nx: int = 33
    ny: int = 33

    def __post_init__(self) -> None:
        for r in (self.half_range_x, self.half_range_y):
            if not (r > 0.0) or not math.isfinite(r):
                raise ConfigError("scan half ranges must be positive and finite")
        if self.nx < 16 or self.ny < 16:
            raise ConfigError("grid scans need at least 16 samples per axis")

    def offsets(self) -> np.ndarray:
        xs = np.linspace(-self.half_range_x, self.half_range_x, self.nx)
        ys = np.linspace(-self.half_range_y, self.half_range_y, self.ny)
        pts = np.empty((self.ny, self.nx, 2))
        pts[:, :, 0] = xs[None, :]
        pts[:, :, 1] = ys[:, None]
        return pts.reshape(-1, 2)


@dataclass(frozen=True)
class ScanPlan:
    geometry: Union[Line, Grid]
    instrument: Instrument = Instrument.TWIN_PHOTON

    def __post_init__(self) -> None:
        if not isinstance(self.geometry, (Line, Grid)):
            raise ConfigError("scan geometry must be a Line or a Grid")
        if not isinstance(self.instrument, Instrument):
            raise ConfigError("unknown instrument")


@dataclass(frozen=True, eq=False)
class ScanImage:
    """Normalized scan record: ``values`` peak at exactly 1 whenever the
    raw peak is positive (a fully gated-out scan stays all-zero).
    Line images are 1D; grid images have shape (ny, nx)."""

    plan: ScanPlan
    values: np.ndarray
    peak_value_raw: float

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if np.any(~np.isfinite(vals)) or np.any(vals < 0.0):
            raise NumericalError("scan values must be finite and non-negative")
        if self.peak_value_raw > 0.0 and abs(vals.max() - 1.0) > 1e-12:
            raise NumericalError("scan values must be peak-normalized")


def _thread_count() -> int:
    raw = os.environ.get("TWINFOCAL_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError("TWINFOCAL_THREADS must be an integer") from exc
    if n < 0:
        raise ConfigError("TWINFOCAL_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _map_chunked(func: Callable[[np.ndarray], np.ndarray], offsets: np.ndarray) -> np.ndarray:
    """Apply ``func`` to index-ordered chunks of scan offsets and rejoin."""
    workers = _thread_count()
    if workers == 1 or offsets.shape[0] < 2 * workers:
        return func(offsets)
    chunks = np.array_split(offsets, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(func, chunks))
    return np.concatenate(parts)


def _instrument_psf(instrument: Instrument):
    if instrument is Instrument.WIDEFIELD:
        return psf_widefield
    if instrument is Instrument.CONFOCAL:
        return psf_confocal
    return psf_twin


def scan(plan: ScanPlan, cfg: MicroscopeConfig, sample: SampleTransmittance,
         quad: QuadratureSpec | None = None, t12: float | None = None,
         disp: DispersionModel | None = None) -> ScanImage:
    """Run a scan plan over a sample and return the normalized image.

    The coincidence gate (when a dispersion model is given) applies to the
    twin-photon instrument only; classical instruments have no pair
    timing.  A gated-out twin scan returns an all-zero image with
    ``peak_value_raw = 0``.
    """
    quad = quad if quad is not None else QuadratureSpec()
    offsets = plan.geometry.offsets()
    instrument = plan.instrument

    if instrument is Instrument.TWIN_PHOTON:
        def evaluate(chunk: np.ndarray) -> np.ndarray:
            return np.array([
                coincidence_rate(pt, cfg, sample, quad, t12=t12, disp=disp)
                for pt in chunk
            ])
    else:
        response = _instrument_psf(instrument)
        if isinstance(sample, Delta):
            def evaluate(chunk: np.ndarray) -> np.ndarray:
                return response(np.hypot(chunk[:, 0], chunk[:, 1]), cfg)
        elif isinstance(sample, TwoPoint):
            half = 0.5 * sample.separation
            def evaluate(chunk: np.ndarray) -> np.ndarray:
                left = response(np.hypot(chunk[:, 0] + half, chunk[:, 1]), cfg)
                right = response(np.hypot(chunk[:, 0] - half, chunk[:, 1]), cfg)
                return left + right
        else:
            def kern(vx, vy):
                return response(np.hypot(vx, vy), cfg)

            def evaluate(chunk: np.ndarray) -> np.ndarray:
                return np.array([
                    abs(integrate_sample(sample, (float(pt[0]), float(pt[1])),
                                         cfg, quad, kern, coherent=False))
                    for pt in chunk
                ])

    values = _map_chunked(evaluate, offsets)
    peak = float(values.max()) if values.size else 0.0
    if peak > 0.0:
        values = values / peak
    if isinstance(plan.geometry, Grid):
        values = values.reshape(plan.geometry.ny, plan.geometry.nx)
    return ScanImage(plan=plan, values=values, peak_value_raw=peak)


def dip_contrast(image: ScanImage) -> float:
    """Depth of the central dip of a symmetric line scan.

    ``1 - I_center / I_peak`` where ``I_center`` is the value at zero
    offset (mean of the two middle samples for even counts) and
    ``I_peak`` the image maximum.  0 means no dip.
    """
    if not isinstance(image.plan.geometry, Line):
        raise ConfigError("dip contrast is defined for line scans only")
    vals = image.values
    peak = float(vals.max())
    if peak <= 0.0:
        return 0.0
    n = vals.size
    if n % 2:
        center = float(vals[n // 2])
    else:
        center = 0.5 * float(vals[n // 2 - 1] + vals[n // 2])
    return max(0.0, 1.0 - center / peak)


def min_resolvable_separation(cfg: MicroscopeConfig, instrument: Instrument,
                              threshold: float = 0.05,
                              quad: QuadratureSpec | None = None) -> float:
    """Smallest two-point separation whose scan dips by at least ``threshold``.

    Brackets the dip threshold between FWHM/10 and 4 FWHM of the
    instrument response and bisects the separation to 1e-3 relative.
    Raises ``ScanRangeError`` if the dip does not straddle the threshold
    across that bracket.
    """
    if not (0.0 < threshold < 1.0):
        raise ConfigError("threshold must lie in (0, 1)")
    response = _instrument_psf(instrument)
    width = fwhm(lambda y: response(y, cfg), scan_range=4.0 * airy_radius(cfg))

    def dip_at(separation: float) -> float:
        plan = ScanPlan(
            geometry=Line(direction=(1.0, 0.0),
                          half_range=0.5 * separation + 1.5 * width,
                          samples=257),
            instrument=instrument,
        )
        return dip_contrast(scan(plan, cfg, TwoPoint(separation), quad))

    lo, hi = width / 10.0, 4.0 * width
    if dip_at(lo) >= threshold:
        raise ScanRangeError(
            "two-point dip already exceeds the threshold at the lower bracket "
            f"({lo:.3e} m); the minimum lies below FWHM/10")
    if dip_at(hi) < threshold:
        raise ScanRangeError(
            "two-point dip stays below the threshold at the upper bracket "
            f"({hi:.3e} m); no resolvable separation within 4 FWHM")
    while (hi - lo) > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if dip_at(mid) >= threshold:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
