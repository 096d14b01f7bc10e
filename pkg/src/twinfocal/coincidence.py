"""Coincidence amplitude of the twin-photon microscope over structured samples.

The detected coincidence rate for a thin sample ``t`` scanned by an offset
``y`` is ``gate * |A(y)|^2`` with the coherent amplitude

    A(y) = integral d^2 u  t(u) * K(u - y),
    K(v) = exp(-(|v|^2 / 2) * eta0_inv_sq)
           * airy_amp(2 Omega_o a |v| / (s0 c))
           * airy_amp(2 Omega_e a |v| / (s0 c)),

where ``eta0_inv_sq`` combines the pump focal spot with the free
propagation to the crystal.  Both down-converted photons traverse the
sample at the same transverse point, so distinct sample points add
coherently in ``A`` before squaring.  For a point-like sample this
reduces exactly to the twin-photon point spread function.

The gate factor models the coincidence electronics: it is 1 only when the
signal/idler arrival-time offset falls inside the group-delay window
``D * L`` opened by the crystal dispersion, and 0 otherwise.

Integration strategy: the integrand is smooth on the transmitting region
of every schematic sample shipped here, so each region is covered by
tensor-product Gauss-Legendre panels placed on the sample support (single
square for a slit, one panel per stripe for a grating, one per pixel for
a raster).  Every amplitude evaluation is repeated with doubled node
counts; the coarse/fine disagreement is the convergence estimate and a
``QuadratureError`` reports it when it exceeds the requested tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .errors import ConfigError, QuadratureError
from .optics import SPEED_OF_LIGHT, MicroscopeConfig, eta0_inv_sq, r0
from .psf import psf_twin
from .specfun import airy_amp

__all__ = [
    "Delta",
    "TwoPoint",
    "Slit",
    "Grating",
    "Raster",
    "SampleTransmittance",
    "DispersionModel",
    "QuadratureSpec",
    "wavenumber_K",
    "inv_group_velocity",
    "walkoff_Ne",
    "longitudinal_k",
    "gate",
    "amplitude",
    "coincidence_rate",
]

# Third zero of the Airy amplitude (third nonzero root of J1); used to cut
# off the oscillatory kernel tail when no Gaussian envelope is present.
_AIRY_ZERO_3 = 10.173468135062722


# ============================================================================
# sample transmittances
# ============================================================================

@dataclass(frozen=True)
class Delta:
    """Idealized point sample; scanning it traces the instrument response."""


@dataclass(frozen=True)
class TwoPoint:
    """Two point transmitters at x = +-separation/2 on the scan axis."""

    separation: float

    def __post_init__(self) -> None:
        if not (self.separation > 0.0) or not math.isfinite(self.separation):
            raise ConfigError("two-point separation must be positive and finite")


@dataclass(frozen=True)
class Slit:
    """Fully transmitting square aperture of the given side length [m]."""

    width: float

    def __post_init__(self) -> None:
        if not (self.width > 0.0) or not math.isfinite(self.width):
            raise ConfigError("slit width must be positive and finite")


@dataclass(frozen=True)
class Grating:
    """Periodic stripes transmitting across x: |t| = 1 on stripes of width
    duty * period centered at integer multiples of the period, 0 between."""

    period: float
    duty: float = 0.5

    def __post_init__(self) -> None:
        if not (self.period > 0.0) or not math.isfinite(self.period):
            raise ConfigError("grating period must be positive and finite")
        if not (0.0 < self.duty < 1.0):
            raise ConfigError("grating duty cycle must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class Raster:
    """Pixelated complex transmittance on a square grid of the given pitch.

    ``grid[i, j]`` is the (constant) transmittance of the pixel centered at
    ``x = (j - (ncols-1)/2) * pitch``, ``y = (i - (nrows-1)/2) * pitch``,
    so the pattern is centered on the origin.  Magnitudes must not exceed 1.
    """

    pitch: float
    grid: np.ndarray

    def __post_init__(self) -> None:
        if not (self.pitch > 0.0) or not math.isfinite(self.pitch):
            raise ConfigError("raster pitch must be positive and finite")
        grid = np.asarray(self.grid, dtype=complex)
        object.__setattr__(self, "grid", grid)
        if grid.ndim != 2 or grid.size == 0:
            raise ConfigError("raster grid must be a non-empty 2D array")
        if np.any(~np.isfinite(grid)) or np.any(np.abs(grid) > 1.0 + 1e-12):
            raise ConfigError("raster transmittances must be finite with |t| <= 1")


SampleTransmittance = Union[Delta, TwoPoint, Slit, Grating, Raster]


# ============================================================================
# crystal dispersion
# ============================================================================

@dataclass(frozen=True)
class DispersionModel:
    """Refractive indices and geometry of the down-conversion crystal.

    ``n_o(omega)`` is the ordinary index; ``n_e(omega, psi)`` the
    extraordinary index at propagation angle ``psi`` [rad] from the optic
    axis.  ``theta_o``/``theta_e`` are the internal emission angles of the
    ordinary/extraordinary beams from the pump axis and ``L`` the crystal
    length [m].  No material coefficients ship with the package; callers
    supply the index functions (e.g. Sellmeier fits).
    """

    n_o: Callable[[float], float]
    n_e: Callable[[float, float], float]
    psi: float
    theta_o: float = 0.0
    theta_e: float = 0.0
    L: float = 1e-3

    def __post_init__(self) -> None:
        if not callable(self.n_o) or not callable(self.n_e):
            raise ConfigError("n_o and n_e must be callables")
        if not (0.0 < self.psi < 0.5 * math.pi):
            raise ConfigError("phase-matching angle psi must lie in (0, pi/2)")
        if not (self.L > 0.0) or not math.isfinite(self.L):
            raise ConfigError("crystal length must be positive and finite")


def _index_value(func, label: str, *args) -> float:
    try:
        val = float(func(*args))
    except Exception as exc:
        raise ValueError(f"index function {label} not evaluable at {args!r}") from exc
    if not math.isfinite(val):
        raise ValueError(f"index function {label} returned a non-finite value at {args!r}")
    return val


def wavenumber_K(n: Callable[[float], float], omega: float) -> float:
    """Medium wavenumber ``omega * n(omega) / c`` [1/m]."""
    if not (omega > 0.0) or not math.isfinite(omega):
        raise ConfigError("carrier frequency must be positive and finite")
    return omega * _index_value(n, "n", omega) / SPEED_OF_LIGHT


def inv_group_velocity(n: Callable[[float], float], omega: float) -> float:
    """Inverse group velocity ``d(omega n/c)/domega`` [s/m].

    Central finite difference with relative step 1e-6, sharpened by one
    Richardson extrapolation pass (halved step).  For a frequency
    independent index this returns ``n / c`` to ~1e-9 relative.
    """
    if not (omega > 0.0) or not math.isfinite(omega):
        raise ConfigError("carrier frequency must be positive and finite")
    h = 1e-6 * omega

    def phase_k(w: float) -> float:
        return w * _index_value(n, "n", w) / SPEED_OF_LIGHT

    coarse = (phase_k(omega + h) - phase_k(omega - h)) / (2.0 * h)
    fine = (phase_k(omega + 0.5 * h) - phase_k(omega - 0.5 * h)) / h
    return (4.0 * fine - coarse) / 3.0


def walkoff_Ne(n_e: Callable[[float, float], float], omega: float, psi: float) -> float:
    """Angular walk-off coefficient ``(1/n_e) d(n_e)/d(psi)`` [1/rad].

    Central finite difference in the propagation angle with step 1e-6 rad;
    ``psi`` must sit at least one step inside (0, pi/2).
    """
    h = 1e-6
    if not (h < psi < 0.5 * math.pi - h):
        raise ConfigError("psi must lie strictly inside (0, pi/2)")
    upper = _index_value(n_e, "n_e", omega, psi + h)
    lower = _index_value(n_e, "n_e", omega, psi - h)
    center = _index_value(n_e, "n_e", omega, psi)
    return (upper - lower) / (2.0 * h) / center


def longitudinal_k(branch: str, disp: DispersionModel, omega: float,
                   nu: float, k_perp: float) -> float:
    """Longitudinal wavevector component, expanded to second order.

    ``omega`` is the carrier frequency of the branch, ``nu`` the detuning
    from it, and ``k_perp`` the transverse wavevector magnitude [1/m].

    ordinary branch:
        K + nu/u - k_perp^2 / (2 K)
    extraordinary branch:
        K + nu/u - N_e k_perp cos(theta_e)
          + (k_perp^2 / (2 K)) * (N_e cot(psi) - 1)

    with ``K`` the carrier wavenumber, ``1/u`` the inverse group velocity
    and ``N_e`` the walk-off coefficient.
    """
    if branch == "ordinary":
        K = wavenumber_K(disp.n_o, omega)
        u_inv = inv_group_velocity(disp.n_o, omega)
        return K + nu * u_inv - k_perp * k_perp / (2.0 * K)
    if branch == "extraordinary":
        n_along = lambda w: disp.n_e(w, disp.psi)  # noqa: E731
        K = wavenumber_K(n_along, omega)
        u_inv = inv_group_velocity(n_along, omega)
        walkoff = walkoff_Ne(disp.n_e, omega, disp.psi)
        quad = (k_perp * k_perp / (2.0 * K)) * (walkoff / math.tan(disp.psi) - 1.0)
        return K + nu * u_inv - walkoff * k_perp * math.cos(disp.theta_e) + quad
    raise ConfigError(f"branch must be 'ordinary' or 'extraordinary', got {branch!r}")


def gate(t12: float, disp: DispersionModel, omega_o: float, omega_e: float) -> float:
    """Coincidence gate: 1.0 iff ``0 < t12 < D L`` with the group-delay
    mismatch ``D = 1/u_o - 1/u_e`` at the two carriers, else 0.0.

    A non-positive ``D`` closes the window entirely (the gate is 0 for
    every offset); the indices must be physical (>= 1) at the carriers.
    """
    if not math.isfinite(t12):
        raise ConfigError("arrival-time offset t12 must be finite")
    if _index_value(disp.n_o, "n_o", omega_o) < 1.0:
        raise ConfigError("n_o must be >= 1 at the ordinary carrier")
    n_along = lambda w: disp.n_e(w, disp.psi)  # noqa: E731
    if _index_value(n_along, "n_e", omega_e) < 1.0:
        raise ConfigError("n_e must be >= 1 at the extraordinary carrier")
    mismatch = inv_group_velocity(disp.n_o, omega_o) - inv_group_velocity(n_along, omega_e)
    window = mismatch * disp.L
    if window <= 0.0:
        return 0.0
    return 1.0 if 0.0 < t12 < window else 0.0


def delay_window(disp: DispersionModel, omega_o: float, omega_e: float) -> float:
    """Width ``D * L`` [s] of the coincidence gate; <= 0 means it never opens."""
    n_along = lambda w: disp.n_e(w, disp.psi)  # noqa: E731
    mismatch = inv_group_velocity(disp.n_o, omega_o) - inv_group_velocity(n_along, omega_e)
    return mismatch * disp.L


# ============================================================================
# quadrature
# ============================================================================

@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts and domain controls for the amplitude integral.

    ``radial_nodes`` Gauss-Legendre nodes resolve each compact support
    dimension (slit side, stripe width, pixel side); ``angular_nodes``
    cover the extended dimension of stripe panels.  ``truncation_radius``
    bounds how far the kernel envelope is followed on extended samples
    (None picks the default described in :func:`default_truncation_radius`).
    """

    radial_nodes: int = 48
    angular_nodes: int = 384
    truncation_radius: float | None = None
    target_rel_tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.radial_nodes < 8 or self.angular_nodes < 8:
            raise ConfigError("quadrature node counts must be at least 8")
        if self.truncation_radius is not None and not (self.truncation_radius > 0.0):
            raise ConfigError("truncation radius must be positive")
        if not (self.target_rel_tol > 0.0):
            raise ConfigError("target relative tolerance must be positive")


@lru_cache(maxsize=64)
def _gl_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(n)


def _gl_on(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    base, weights = _gl_nodes(n)
    half = 0.5 * (b - a)
    return a + half * (base + 1.0), half * weights


def _twin_alphas(cfg: MicroscopeConfig) -> tuple[float, float]:
    scale = 2.0 * cfg.a / (cfg.s0 * SPEED_OF_LIGHT)
    return cfg.omega_o * scale, cfg.omega_e * scale


def kernel_field(v_x, v_y, cfg: MicroscopeConfig) -> np.ndarray:
    """Complex coincidence kernel ``K`` at displacement components [m]."""
    vx = np.asarray(v_x, dtype=float)
    vy = np.asarray(v_y, dtype=float)
    r_sq = vx * vx + vy * vy
    radius = np.sqrt(r_sq)
    alpha_o, alpha_e = _twin_alphas(cfg)
    amp = airy_amp(alpha_o * radius) * airy_amp(alpha_e * radius)
    if cfg.pump_gaussian:
        return amp * np.exp(-0.5 * r_sq * eta0_inv_sq(cfg))
    return amp.astype(complex)


def default_truncation_radius(cfg: MicroscopeConfig, target_rel_tol: float = 1e-8) -> float:
    """Kernel support radius for extended samples.

    The smaller of ``6 r0`` (Gaussian envelope down to exp(-36)) and the
    third Airy zero of the wider airy_amp factor, provided the Gaussian
    mass left outside stays below the target tolerance; otherwise the
    Gaussian radius wins.  Without a pump Gaussian only the Airy cut
    applies.
    """
    alpha_o, alpha_e = _twin_alphas(cfg)
    airy_cut = _AIRY_ZERO_3 / min(alpha_o, alpha_e)
    if not cfg.pump_gaussian:
        return airy_cut
    spot = r0(cfg)
    radius = min(6.0 * spot, airy_cut)
    if math.exp(-((radius / spot) ** 2)) > target_rel_tol:
        radius = 6.0 * spot
    return radius


def _panel_sum(centers_x: np.ndarray, centers_y: np.ndarray, weights_t: np.ndarray,
               half_x: float, half_y: float, n_x: int, n_y: int,
               offset: tuple[float, float], kern) -> complex:
    """Sum of integrals of ``t * kern`` over same-size rectangles.

    Each panel k is ``[cx_k - half_x, cx_k + half_x] x [cy_k - half_y,
    cy_k + half_y]`` with constant transmittance ``weights_t[k]``; the
    kernel is evaluated at panel coordinates shifted by ``-offset``.
    """
    gx, gwx = _gl_on(-half_x, half_x, n_x)
    gy, gwy = _gl_on(-half_y, half_y, n_y)
    sample_x = centers_x[:, None, None] + gx[None, :, None] - offset[0]
    sample_y = centers_y[:, None, None] + gy[None, None, :] - offset[1]
    values = kern(sample_x, sample_y)
    per_panel = np.einsum("i,j,kij->k", gwx, gwy, values)
    return complex(np.dot(weights_t, per_panel))


def _panel_abs_mass(centers_x: np.ndarray, centers_y: np.ndarray, weights_t: np.ndarray,
                    half_x: float, half_y: float, n_x: int, n_y: int,
                    offset: tuple[float, float], kern) -> float:
    gx, gwx = _gl_on(-half_x, half_x, n_x)
    gy, gwy = _gl_on(-half_y, half_y, n_y)
    sample_x = centers_x[:, None, None] + gx[None, :, None] - offset[0]
    sample_y = centers_y[:, None, None] + gy[None, None, :] - offset[1]
    values = np.abs(kern(sample_x, sample_y))
    per_panel = np.einsum("i,j,kij->k", gwx, gwy, values)
    return float(np.dot(np.abs(weights_t), per_panel))


def _sample_panels(sample: SampleTransmittance, offset: tuple[float, float],
                   cfg: MicroscopeConfig, quad: QuadratureSpec,
                   coherent: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray, float, float]:
    """Panel centers, transmittance weights and half sizes for one sample.

    Coherent integrals weight raster pixels by ``t``; incoherent ones
    (classical instruments) by ``|t|^2``.
    """
    if isinstance(sample, Slit):
        half = 0.5 * sample.width
        return (np.zeros(1), np.zeros(1), np.ones(1), half, half)
    if isinstance(sample, Grating):
        radius = quad.truncation_radius or default_truncation_radius(cfg, quad.target_rel_tol)
        lo = math.floor((offset[0] - radius) / sample.period)
        hi = math.ceil((offset[0] + radius) / sample.period)
        orders = np.arange(lo, hi + 1, dtype=float)
        centers_x = orders * sample.period
        centers_y = np.full_like(centers_x, offset[1])
        weights = np.ones_like(centers_x)
        return (centers_x, centers_y, weights, 0.5 * sample.duty * sample.period, radius)
    if isinstance(sample, Raster):
        grid = sample.grid
        rows, cols = grid.shape
        jj, ii = np.meshgrid(np.arange(cols), np.arange(rows))
        centers_x = (jj.ravel() - 0.5 * (cols - 1)) * sample.pitch
        centers_y = (ii.ravel() - 0.5 * (rows - 1)) * sample.pitch
        weights = grid.ravel() if coherent else np.abs(grid.ravel()) ** 2
        keep = weights != 0.0
        if not np.any(keep):
            return (np.zeros(0), np.zeros(0), np.zeros(0), 0.5 * sample.pitch, 0.5 * sample.pitch)
        half = 0.5 * sample.pitch
        return (centers_x[keep], centers_y[keep], weights[keep], half, half)
    raise ConfigError(f"unsupported sample for panel integration: {sample!r}")


def integrate_sample(sample: SampleTransmittance, offset: tuple[float, float],
                     cfg: MicroscopeConfig, quad: QuadratureSpec, kern,
                     coherent: bool = True) -> complex:
    """Integral of ``t(u) * kern(u - offset)`` over the sample plane.

    Evaluated once with the requested node counts and once with both
    counts doubled; the doubled result is returned and the disagreement
    between the passes must stay within ``10 * target_rel_tol`` of the
    result scale or a ``QuadratureError`` is raised.  The scale guards
    against spurious failures near response zeros by never dropping below
    1% of the integrated absolute mass.
    """
    centers_x, centers_y, weights, half_x, half_y = _sample_panels(
        sample, offset, cfg, quad, coherent)
    if centers_x.size == 0:
        return 0.0 + 0.0j
    extended = isinstance(sample, Grating)
    n_x = quad.radial_nodes
    n_y = quad.angular_nodes if extended else quad.radial_nodes
    coarse = _panel_sum(centers_x, centers_y, weights, half_x, half_y,
                        n_x, n_y, offset, kern)
    fine = _panel_sum(centers_x, centers_y, weights, half_x, half_y,
                      2 * n_x, 2 * n_y, offset, kern)
    mass = _panel_abs_mass(centers_x, centers_y, weights, half_x, half_y,
                           n_x, n_y, offset, kern)
    scale = max(abs(coarse), abs(fine), 0.01 * mass)
    if scale > 0.0 and abs(fine - coarse) > 10.0 * quad.target_rel_tol * scale:
        raise QuadratureError(
            "amplitude quadrature did not converge: node doubling moved the "
            f"result by {abs(fine - coarse) / scale:.3e} relative "
            f"(target {quad.target_rel_tol:.1e}); raise the node counts"
        )
    return fine


# ============================================================================
# amplitude and rate
# ============================================================================

def _offset_pair(y) -> tuple[float, float]:
    arr = np.asarray(y, dtype=float).reshape(-1)
    if arr.size == 1:
        pair = (float(arr[0]), 0.0)
    elif arr.size == 2:
        pair = (float(arr[0]), float(arr[1]))
    else:
        raise ValueError("scan offset must be a scalar or a 2-vector")
    if not all(math.isfinite(c) for c in pair):
        raise ValueError("scan offset must be finite")
    return pair


def amplitude(y, cfg: MicroscopeConfig, sample: SampleTransmittance,
              quad: QuadratureSpec | None = None) -> complex:
    """Coherent coincidence amplitude ``A(y)`` for a structured sample.

    ``y`` is the scan offset, either a scalar (displacement along x) or a
    2-vector [m].  The result is the raw, unnormalized integral; scanning
    code normalizes per scan.  Point-pair samples are evaluated in closed
    form (the integral collapses onto the two points); everything else
    goes through panel quadrature with an internal node-doubling check.
    """
    if isinstance(sample, Delta):
        raise ConfigError("amplitude is for structured samples; "
                          "use coincidence_rate for a point sample")
    quad = quad if quad is not None else QuadratureSpec()
    offset = _offset_pair(y)
    if isinstance(sample, TwoPoint):
        half = 0.5 * sample.separation
        vals = kernel_field(np.array([half - offset[0], -half - offset[0]]),
                            np.array([-offset[1], -offset[1]]), cfg)
        return complex(vals[0] + vals[1])
    kern = lambda vx, vy: kernel_field(vx, vy, cfg)  # noqa: E731
    return integrate_sample(sample, offset, cfg, quad, kern, coherent=True)


def coincidence_rate(y, cfg: MicroscopeConfig, sample: SampleTransmittance,
                     quad: QuadratureSpec | None = None,
                     t12: float | None = None,
                     disp: DispersionModel | None = None) -> float:
    """Gated coincidence rate at scan offset ``y`` (unnormalized).

    Without a dispersion model the gate factor is 1 (ungated counting).
    With one, ``t12`` is required and the rate is multiplied by the 0/1
    gate.  A point sample bypasses quadrature and returns the twin-photon
    response directly.
    """
    if disp is not None:
        if t12 is None:
            raise ConfigError("t12 is required when a dispersion model is supplied")
        factor = gate(t12, disp, cfg.omega_o, cfg.omega_e)
    else:
        factor = 1.0
    if factor == 0.0:
        return 0.0
    offset = _offset_pair(y)
    if isinstance(sample, Delta):
        return factor * psf_twin(math.hypot(*offset), cfg)
    value = amplitude(offset, cfg, sample, quad)
    return factor * (value.real * value.real + value.imag * value.imag)
