"""Coincidence amplitude quadrature, dispersion quantities, and the gate.

The independent oracles here are midpoint Cartesian Riemann sums against
a kernel rebuilt in-test from its definition, plus analytic derivatives
of toy index models.  Riemann grids are chosen so transmittance edges
land exactly on cell boundaries (otherwise the oracle's own edge error
exceeds the tolerances being certified).
"""

import math

import numpy as np
import pytest

from conftest import riemann_amplitude

from twinfocal.errors import ConfigError, QuadratureError
from twinfocal.optics import SPEED_OF_LIGHT, MicroscopeConfig, airy_radius, eta0_inv_sq, r0
from twinfocal.psf import psf_twin
from twinfocal.specfun import airy_amp
from twinfocal.coincidence import (
    Delta,
    DispersionModel,
    Grating,
    QuadratureSpec,
    Raster,
    Slit,
    TwoPoint,
    amplitude,
    coincidence_rate,
    default_truncation_radius,
    delay_window,
    gate,
    inv_group_velocity,
    kernel_field,
    longitudinal_k,
    walkoff_Ne,
    wavenumber_K,
)

CFG8 = MicroscopeConfig(w0=8e-3)
R_AIRY = airy_radius(CFG8)

# toy crystal: ordinary index with group-velocity dispersion, slower
# extraordinary index constant -> positive group-delay mismatch D
N_O_SLOPE = 2.0e-17


def toy_n_o(omega: float) -> float:
    return 1.60 + N_O_SLOPE * omega


def toy_n_e(omega: float, psi: float) -> float:
    return 1.55


TOY_DISP = DispersionModel(n_o=toy_n_o, n_e=toy_n_e, psi=math.radians(49.0),
                           theta_e=math.radians(3.0), L=1e-3)


def kernel_formula(vx, vy, cfg):
    """The coincidence kernel rebuilt from its definition."""
    vx = np.asarray(vx, dtype=float)
    vy = np.asarray(vy, dtype=float)
    r_sq = vx * vx + vy * vy
    radius = np.sqrt(r_sq)
    scale = 2.0 * cfg.a / (cfg.s0 * SPEED_OF_LIGHT)
    envelope = np.exp(-0.5 * r_sq * eta0_inv_sq(cfg)) if cfg.pump_gaussian else 1.0
    return envelope * airy_amp(cfg.omega_o * scale * radius) \
        * airy_amp(cfg.omega_e * scale * radius)


# ----------------------------------------------------------------------------
# type validation
# ----------------------------------------------------------------------------

def test_sample_validation():
    with pytest.raises(ConfigError):
        TwoPoint(separation=0.0)
    with pytest.raises(ConfigError):
        Slit(width=-1e-7)
    with pytest.raises(ConfigError):
        Grating(period=1e-6, duty=1.0)
    with pytest.raises(ConfigError):
        Grating(period=0.0)
    with pytest.raises(ConfigError):
        Raster(pitch=1e-7, grid=np.array([[2.0]]))
    with pytest.raises(ConfigError):
        Raster(pitch=1e-7, grid=np.zeros((0, 3)))
    Raster(pitch=1e-7, grid=np.array([[0.5 + 0.5j]]))  # |t| < 1 allowed


def test_dispersion_model_validation():
    with pytest.raises(ConfigError):
        DispersionModel(n_o=toy_n_o, n_e=toy_n_e, psi=0.0)
    with pytest.raises(ConfigError):
        DispersionModel(n_o=toy_n_o, n_e=toy_n_e, psi=math.pi / 2)
    with pytest.raises(ConfigError):
        DispersionModel(n_o=toy_n_o, n_e=toy_n_e, psi=0.5, L=0.0)
    with pytest.raises(ConfigError):
        DispersionModel(n_o=1.6, n_e=toy_n_e, psi=0.5)


def test_quadrature_spec_validation():
    with pytest.raises(ConfigError):
        QuadratureSpec(radial_nodes=4)
    with pytest.raises(ConfigError):
        QuadratureSpec(angular_nodes=0)
    with pytest.raises(ConfigError):
        QuadratureSpec(truncation_radius=-1e-6)
    with pytest.raises(ConfigError):
        QuadratureSpec(target_rel_tol=0.0)


# ----------------------------------------------------------------------------
# dispersion quantities
# ----------------------------------------------------------------------------

def test_wavenumber():
    omega = CFG8.omega_o
    assert wavenumber_K(toy_n_o, omega) == pytest.approx(
        omega * (1.60 + N_O_SLOPE * omega) / SPEED_OF_LIGHT, rel=1e-14)
    with pytest.raises(ConfigError):
        wavenumber_K(toy_n_o, 0.0)
    with pytest.raises(ValueError):
        wavenumber_K(lambda w: 1.0 / 0.0, omega)


def test_inv_group_velocity_linear_and_quadratic_toys():
    omega = CFG8.omega_o
    # constant index: 1/u = n/c
    assert inv_group_velocity(lambda w: 1.55, omega) == pytest.approx(
        1.55 / SPEED_OF_LIGHT, rel=1e-9)
    # linear: d(w n)/dw = 1.60 + 2 b w
    expected = (1.60 + 2.0 * N_O_SLOPE * omega) / SPEED_OF_LIGHT
    assert inv_group_velocity(toy_n_o, omega) == pytest.approx(expected, rel=1e-9)
    # quadratic: d(w (a + b w + c w^2))/dw = a + 2 b w + 3 c w^2
    b, c2 = 1.0e-17, 2.0e-33
    quad_n = lambda w: 1.5 + b * w + c2 * w * w  # noqa: E731
    expected = (1.5 + 2.0 * b * omega + 3.0 * c2 * omega * omega) / SPEED_OF_LIGHT
    assert inv_group_velocity(quad_n, omega) == pytest.approx(expected, rel=1e-9)


def test_walkoff_against_analytic_derivative():
    omega = CFG8.omega_e
    k = 0.12
    n_e = lambda w, psi: 1.55 + k * math.sin(psi) ** 2  # noqa: E731
    psi = math.radians(49.0)
    expected = k * math.sin(2.0 * psi) / (1.55 + k * math.sin(psi) ** 2)
    assert walkoff_Ne(n_e, omega, psi) == pytest.approx(expected, rel=1e-8)
    with pytest.raises(ConfigError):
        walkoff_Ne(n_e, omega, 0.0)


def test_longitudinal_k_ordinary_assembly():
    omega = CFG8.omega_o
    nu = 3.0e12
    q = 1.0e5
    K = omega * toy_n_o(omega) / SPEED_OF_LIGHT
    u_inv = (1.60 + 2.0 * N_O_SLOPE * omega) / SPEED_OF_LIGHT
    expected = K + nu * u_inv - q * q / (2.0 * K)
    value = longitudinal_k("ordinary", TOY_DISP, omega, nu, q)
    assert value == pytest.approx(expected, rel=1e-9)


def test_longitudinal_k_extraordinary_assembly():
    omega = CFG8.omega_e
    nu = -2.0e12
    q = 1.0e5
    k = 0.12
    n_e = lambda w, psi: 1.50 + k * math.sin(psi) ** 2  # noqa: E731
    psi = math.radians(49.0)
    theta_e = math.radians(3.0)
    disp = DispersionModel(n_o=toy_n_o, n_e=n_e, psi=psi, theta_e=theta_e, L=1e-3)
    n_along = 1.50 + k * math.sin(psi) ** 2
    K = omega * n_along / SPEED_OF_LIGHT
    u_inv = n_along / SPEED_OF_LIGHT  # omega-independent index
    walkoff = k * math.sin(2.0 * psi) / n_along
    expected = (K + nu * u_inv - walkoff * q * math.cos(theta_e)
                + (q * q / (2.0 * K)) * (walkoff / math.tan(psi) - 1.0))
    value = longitudinal_k("extraordinary", disp, omega, nu, q)
    assert value == pytest.approx(expected, rel=1e-9)


def test_longitudinal_k_carrier_reduction():
    """nu = 0, k_perp = 0 collapses both branches to the carrier wavenumber."""
    omega = CFG8.omega_o
    assert longitudinal_k("ordinary", TOY_DISP, omega, 0.0, 0.0) == pytest.approx(
        wavenumber_K(toy_n_o, omega), rel=1e-12)
    n_along = lambda w: toy_n_e(w, TOY_DISP.psi)  # noqa: E731
    assert longitudinal_k("extraordinary", TOY_DISP, omega, 0.0, 0.0) == pytest.approx(
        wavenumber_K(n_along, omega), rel=1e-12)
    with pytest.raises(ConfigError):
        longitudinal_k("sideways", TOY_DISP, omega, 0.0, 0.0)


def test_gate_window_constant_indices():
    """With constant indices D L = (n_o - n_e) L / c analytically."""
    disp = DispersionModel(n_o=lambda w: 1.60, n_e=lambda w, psi: 1.55,
                           psi=0.5, L=1e-3)
    window = delay_window(disp, CFG8.omega_o, CFG8.omega_e)
    assert window == pytest.approx((1.60 - 1.55) * 1e-3 / SPEED_OF_LIGHT, rel=1e-9)
    inside = 0.5 * window
    assert gate(inside, disp, CFG8.omega_o, CFG8.omega_e) == 1.0
    assert gate(0.0, disp, CFG8.omega_o, CFG8.omega_e) == 0.0
    assert gate(window, disp, CFG8.omega_o, CFG8.omega_e) == 0.0
    assert gate(2.0 * window, disp, CFG8.omega_o, CFG8.omega_e) == 0.0
    assert gate(-inside, disp, CFG8.omega_o, CFG8.omega_e) == 0.0


def test_gate_closed_when_mismatch_non_positive():
    slow_e = DispersionModel(n_o=lambda w: 1.55, n_e=lambda w, psi: 1.60,
                             psi=0.5, L=1e-3)
    assert delay_window(slow_e, CFG8.omega_o, CFG8.omega_e) < 0.0
    for t12 in (-1e-13, 0.0, 1e-13, 1e-12):
        assert gate(t12, slow_e, CFG8.omega_o, CFG8.omega_e) == 0.0


def test_gate_rejects_unphysical_index():
    thin = DispersionModel(n_o=lambda w: 0.9, n_e=toy_n_e, psi=0.5, L=1e-3)
    with pytest.raises(ConfigError):
        gate(1e-13, thin, CFG8.omega_o, CFG8.omega_e)
    with pytest.raises(ConfigError):
        gate(math.nan, TOY_DISP, CFG8.omega_o, CFG8.omega_e)


# ----------------------------------------------------------------------------
# kernel and amplitude
# ----------------------------------------------------------------------------

def test_kernel_matches_formula():
    xs = np.linspace(-5e-7, 5e-7, 11)
    ys = np.linspace(-3e-7, 3e-7, 11)
    X, Y = np.meshgrid(xs, ys)
    assert np.allclose(kernel_field(X, Y, CFG8), kernel_formula(X, Y, CFG8),
                       rtol=1e-13, atol=0)
    cfg_open = MicroscopeConfig(w0=8e-3, pump_gaussian=False)
    vals = kernel_field(X, Y, cfg_open)
    assert np.allclose(vals.imag, 0.0, atol=0)
    assert np.allclose(vals, kernel_formula(X, Y, cfg_open), rtol=1e-13, atol=0)


def test_two_point_closed_form():
    sep = 1e-6
    sample = TwoPoint(sep)
    for y in (0.0, 1.7e-7, 4.2e-7):
        value = amplitude((y, 0.0), CFG8, sample)
        expected = (complex(kernel_formula(0.5 * sep - y, 0.0, CFG8))
                    + complex(kernel_formula(-0.5 * sep - y, 0.0, CFG8)))
        assert value == pytest.approx(expected, rel=1e-12)


def test_two_point_matches_two_narrow_slits():
    """The closed form is the narrow-slit limit of two separate apertures."""
    sep = 6e-7
    width = 2e-9
    y = 1.3e-7
    pair = amplitude((y, 0.0), CFG8, TwoPoint(sep))
    left = amplitude((y + 0.5 * sep, 0.0), CFG8, Slit(width))
    right = amplitude((y - 0.5 * sep, 0.0), CFG8, Slit(width))
    # the residual is the kernel's curvature averaged over the finite
    # width, which scales as width^2
    assert (left + right) / width**2 == pytest.approx(pair, rel=1e-3)


def test_near_delta_scan_reproduces_psf():
    """A slit 50x smaller than the Airy radius scans out psf_twin."""
    sample = Slit(R_AIRY / 50.0)
    ys = np.linspace(0.0, 2.0 * R_AIRY, 81)
    raw = np.array([abs(amplitude((y, 0.0), CFG8, sample)) ** 2 for y in ys])
    profile = raw / raw[0]
    expected = psf_twin(ys, CFG8)
    assert np.max(np.abs(profile - expected)) <= 1e-3


def test_slit_amplitude_matches_riemann_oracle():
    sample = Slit(1e-7)
    kern = lambda vx, vy: kernel_formula(vx, vy, CFG8)  # noqa: E731
    t_all = lambda X, Y: 1.0  # noqa: E731
    for y in (0.0, 2e-7, 0.25 * R_AIRY, 0.7 * R_AIRY, 1.1 * R_AIRY):
        value = amplitude((y, 0.0), CFG8, sample)
        oracle = riemann_amplitude(kern, t_all, (y, 0.0), span=1e-7, n=2048)
        assert abs(value - oracle) / abs(oracle) <= 1e-3


def test_raster_amplitude_matches_riemann_oracle():
    rng = np.random.default_rng(7)
    grid = (rng.random((8, 8)) > 0.5).astype(float)
    pitch = 1e-7
    sample = Raster(pitch=pitch, grid=grid)
    span = 8 * pitch

    def transmittance(X, Y):
        jj = np.clip(np.floor((X + 0.5 * span) / pitch).astype(int), 0, 7)
        ii = np.clip(np.floor((Y + 0.5 * span) / pitch).astype(int), 0, 7)
        return grid[ii, jj]

    kern = lambda vx, vy: kernel_formula(vx, vy, CFG8)  # noqa: E731
    for offset in ((0.0, 0.0), (1e-7, 5e-8)):
        value = amplitude(offset, CFG8, sample)
        oracle = riemann_amplitude(kern, transmittance, offset, span=span, n=2048)
        assert abs(value - oracle) / abs(oracle) <= 1e-3


def test_grating_amplitude_matches_riemann_oracle():
    # duty 0.5, period 0.5 um, span 4 um, n = 2048: stripe edges land on
    # cell boundaries (0.125 um = 64 cells), so the oracle is clean
    period = 5e-7
    sample = Grating(period=period, duty=0.5)

    def transmittance(X, Y):
        frac = np.abs(X / period - np.round(X / period))
        return (frac < 0.25).astype(float)

    kern = lambda vx, vy: kernel_formula(vx, vy, CFG8)  # noqa: E731
    for y in (0.0, 1.3e-7, 2.5e-7):
        value = amplitude((y, 0.0), CFG8, sample)
        oracle = riemann_amplitude(kern, transmittance, (y, 0.0), span=4e-6, n=2048)
        assert abs(value - oracle) / abs(oracle) <= 1e-3


def test_translation_covariance():
    """Shifting a zero-bordered raster by one pixel equals shifting the scan."""
    grid = np.zeros((8, 8))
    grid[2:5, 2:6] = 1.0
    pitch = 8e-8
    base = Raster(pitch=pitch, grid=grid)
    shifted = Raster(pitch=pitch, grid=np.roll(grid, 1, axis=1))
    for y in (0.0, 1.5e-7):
        lhs = amplitude((y, 0.0), CFG8, shifted)
        rhs = amplitude((y - pitch, 0.0), CFG8, base)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_amplitude_edge_cases():
    with pytest.raises(ConfigError):
        amplitude((0.0, 0.0), CFG8, Delta())
    assert amplitude((0.0, 0.0), CFG8, Raster(pitch=1e-7, grid=np.zeros((4, 4)))) == 0.0


def test_amplitude_stable_under_node_counts():
    sample = Slit(2e-7)
    dense = QuadratureSpec(radial_nodes=96, angular_nodes=768)
    for y in (0.0, 2e-7):
        a_default = amplitude((y, 0.0), CFG8, sample)
        a_dense = amplitude((y, 0.0), CFG8, sample, dense)
        assert abs(a_default - a_dense) / abs(a_dense) <= 1e-10


def test_grating_coarse_nodes_raise_quadrature_error():
    spec = QuadratureSpec(radial_nodes=8, angular_nodes=8)
    with pytest.raises(QuadratureError, match="node"):
        amplitude((0.0, 0.0), CFG8, Grating(period=5e-7, duty=0.5), spec)


def test_default_truncation_radius_paths():
    # large pump spot (1 mm waist): Airy cut would leave Gaussian mass
    # outside, so the 6 r0 radius wins
    cfg1 = MicroscopeConfig()
    assert default_truncation_radius(cfg1) == pytest.approx(6.0 * r0(cfg1), rel=1e-12)
    # tight spot (2 cm waist): 6 r0 is inside the third Airy zero
    cfg20 = MicroscopeConfig(w0=2e-2)
    value = default_truncation_radius(cfg20)
    assert value == pytest.approx(6.0 * r0(cfg20), rel=1e-12)
    airy_cut = 10.173468135062722 * 702e-9 / (4.0 * math.pi)
    assert value < airy_cut
    # no envelope: only the Airy cut applies
    cfg_open = MicroscopeConfig(pump_gaussian=False)
    assert default_truncation_radius(cfg_open) == pytest.approx(airy_cut, rel=1e-12)


# ----------------------------------------------------------------------------
# coincidence rate
# ----------------------------------------------------------------------------

def test_rate_delta_bypass_matches_psf():
    ys = np.linspace(0.0, 2.0 * R_AIRY, 25)
    rates = np.array([coincidence_rate((y, 0.0), CFG8, Delta()) for y in ys])
    assert np.allclose(rates, psf_twin(ys, CFG8), rtol=1e-13, atol=0)
    # off-axis offsets use the radial distance
    assert coincidence_rate((3e-7, 4e-7), CFG8, Delta()) == pytest.approx(
        psf_twin(5e-7, CFG8), rel=1e-13)


def test_rate_is_squared_amplitude():
    sample = Slit(2e-7)
    y = (1.1e-7, 0.0)
    assert coincidence_rate(y, CFG8, sample) == pytest.approx(
        abs(amplitude(y, CFG8, sample)) ** 2, rel=1e-13)


def test_rate_gating():
    disp = DispersionModel(n_o=lambda w: 1.60, n_e=lambda w, psi: 1.55,
                           psi=0.5, L=1e-3)
    window = delay_window(disp, CFG8.omega_o, CFG8.omega_e)
    sample = Slit(2e-7)
    open_rate = coincidence_rate((1e-7, 0.0), CFG8, sample,
                                 t12=0.5 * window, disp=disp)
    plain_rate = coincidence_rate((1e-7, 0.0), CFG8, sample)
    assert open_rate == plain_rate  # gate = 1 leaves the rate unchanged
    assert coincidence_rate((1e-7, 0.0), CFG8, sample,
                            t12=2.0 * window, disp=disp) == 0.0
    assert coincidence_rate((1e-7, 0.0), CFG8, Delta(),
                            t12=-1e-15, disp=disp) == 0.0
    with pytest.raises(ConfigError):
        coincidence_rate((0.0, 0.0), CFG8, sample, disp=disp)  # t12 missing
