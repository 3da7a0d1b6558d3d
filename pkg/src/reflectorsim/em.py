"""Electromagnetic primitives.

Amplitudes are normalised so that received power in dBm equals
``tx_power_dbm + 20*log10(|a|)``.  Time convention is exp(+j w t), so a path of
length d carries phase ``-2 pi d / lambda``.

Fresnel sign convention: TE coefficients are ratios of E perpendicular to the
plane of incidence; TM coefficients use in-plane basis vectors ``p = s x k``
for both incident and reflected waves.  A perfect conductor then gives
``Gamma_TE = -1`` and ``Gamma_TM = +1`` at every angle.
"""

from __future__ import annotations

import math
import warnings
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .scene import AntennaSpec, Cylinder, FlatPlate, Material, Reflector, Sphere

# Back-lobe floor of the Gaussian pattern, dB relative to boresight.
BACKLOBE_FLOOR_DB = -40.0
# Optical-regime threshold: reflector features must exceed this many wavelengths.
OPTICAL_REGIME_WAVELENGTHS = 5.0


class Polarization(Enum):
    TE = "TE"
    TM = "TM"


class OpticalRegimeWarning(UserWarning):
    """Reflector too small (relative to the wavelength) for the RCS formulas."""


def _fresnel_coeffs(cos_i, eps):
    """(Gamma_TE, Gamma_TM) for complex relative permittivity ``eps``."""
    cos_i = np.asarray(cos_i, dtype=float)
    sin2 = 1.0 - cos_i**2
    root = np.sqrt(eps - sin2 + 0j)
    g_te = (cos_i - root) / (cos_i + root)
    g_tm = (eps * cos_i - root) / (eps * cos_i + root)
    return g_te, g_tm


def fresnel_coeffs(cos_i, material: Material, frequency: float):
    """Vectorised (Gamma_TE, Gamma_TM) from the cosine of the incidence angle."""
    cos_i = np.asarray(cos_i, dtype=float)
    if material.perfect_conductor:
        return (np.full(cos_i.shape, -1.0 + 0j), np.full(cos_i.shape, 1.0 + 0j))
    return _fresnel_coeffs(cos_i, material.complex_permittivity(frequency))


def fresnel(theta_i, material: Material, pol: Polarization, frequency: float = 28e9):
    """Reflection coefficient at incidence angle ``theta_i`` (radians from the normal)."""
    theta = np.asarray(theta_i, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(theta < 0) or np.any(theta >= math.pi / 2):
        raise ValueError("incidence angle must lie in [0, pi/2)")
    g_te, g_tm = fresnel_coeffs(np.cos(theta), material, frequency)
    g = g_te if Polarization(pol) is Polarization.TE else g_tm
    return complex(g) if g.ndim == 0 else g


def antenna_gain(spec: AntennaSpec, direction) -> np.ndarray | float:
    """Linear power gain of the Gaussian-beam pattern toward ``direction``.

    Offsets from boresight are measured as elevation (E-plane, toward
    ``spec.up``) and azimuth (H-plane).  The pattern is floored at
    ``BACKLOBE_FLOOR_DB`` below boresight.
    """
    d = np.asarray(direction, dtype=float)
    scalar = d.ndim == 1
    d = np.atleast_2d(d)
    b = spec.boresight
    up = spec.up - (spec.up @ b) * b
    up = up / np.linalg.norm(up)
    side = np.cross(up, b)
    x, y, z = d @ b, d @ side, d @ up
    delta_e = np.degrees(np.arctan2(z, np.hypot(x, y)))
    delta_h = np.degrees(np.arctan2(y, x))
    rel_db = -10.0 * np.log10(np.e) * 4.0 * math.log(2.0) * (
        (delta_e / spec.hpbw_e_deg) ** 2 + (delta_h / spec.hpbw_h_deg) ** 2)
    rel_db = np.maximum(rel_db, BACKLOBE_FLOOR_DB)
    g = 10.0 ** ((spec.gain_dbi + rel_db) / 10.0)
    return float(g[0]) if scalar else g


def spreading_and_phase(d, wavelength: float):
    """Free-space amplitude ``lambda/(4 pi d) * exp(-j 2 pi d / lambda)``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path length must be > 0")
    a = wavelength / (4 * np.pi * d) * np.exp(-2j * np.pi * d / wavelength)
    return complex(a) if a.ndim == 0 else a


def fspl_db(d: float, wavelength: float) -> float:
    return 20.0 * math.log10(4 * math.pi * d / wavelength)


def _check_regime(reflector: Reflector, wavelength: float) -> bool:
    small = reflector.min_dimension < OPTICAL_REGIME_WAVELENGTHS * wavelength
    if small:
        warnings.warn(
            f"{reflector.kind} dimension {reflector.min_dimension:.4g} m is below "
            f"{OPTICAL_REGIME_WAVELENGTHS:g} wavelengths; optical RCS formulas are unreliable",
            OpticalRegimeWarning, stacklevel=3)
    return small


def rcs(reflector: Reflector, incident_dir, scattered_dir, wavelength: float) -> float:
    """Bistatic radar cross section in m^2 (optical regime).

    ``incident_dir`` is the propagation direction of the incoming wave,
    ``scattered_dir`` points from the reflector toward the observer.
    """
    _check_regime(reflector, wavelength)
    i = np.asarray(incident_dir, dtype=float)
    s = np.asarray(scattered_dir, dtype=float)
    k = 2 * np.pi / wavelength

    if isinstance(reflector, Sphere):
        return math.pi * reflector.radius**2

    if isinstance(reflector, Cylinder):
        ax = reflector.axis
        ip, sp = i - (i @ ax) * ax, s - (s @ ax) * ax
        ni, ns = np.linalg.norm(ip), np.linalg.norm(sp)
        if ni < 1e-12 or ns < 1e-12:
            return 0.0
        # Bistatic angle between "toward source" and "toward observer".
        cos_beta = float(np.clip((-ip / ni) @ (sp / ns), -1.0, 1.0))
        half = math.sqrt((1.0 + cos_beta) / 2.0)
        q_axial = k * float((s - i) @ ax)
        obliquity = ni
        sinc = np.sinc(q_axial * reflector.height / 2 / np.pi)
        return 2 * math.pi * reflector.radius * reflector.height**2 / wavelength * half \
            * obliquity * float(sinc) ** 2

    if isinstance(reflector, FlatPlate):
        surf = reflector.as_surface()
        n = reflector.normal
        # Scattering must stay on the illuminated side.
        if float(i @ n) * float(s @ n) >= 0:
            return 0.0
        cos_i = abs(float(i @ n))
        q = k * (s - i)
        ua = surf.edge1 / surf.width
        ub = surf.edge2 / surf.height
        fa = np.sinc(float(q @ ua) * reflector.width / 2 / np.pi)
        fb = np.sinc(float(q @ ub) * reflector.height / 2 / np.pi)
        area = reflector.width * reflector.height
        return 4 * math.pi * area**2 / wavelength**2 * cos_i**2 * float(fa * fb) ** 2

    raise TypeError(f"unsupported reflector {type(reflector).__name__}")


def lobe(cos_psi, alpha: int):
    """Directive scattering lobe ((1 + cos psi)/2)^alpha."""
    return ((1.0 + np.asarray(cos_psi, dtype=float)) / 2.0) ** alpha


def _hemisphere_lobe_integral(alpha: int, theta_i: np.ndarray, n_mu: int = 64, n_phi: int = 128):
    # After integrating over phi the integrand is a polynomial of degree alpha
    # in cos(theta), so Gauss-Legendre in mu plus uniform phi sampling is exact
    # for alpha < min(2 * n_mu, n_phi).
    mu, w = np.polynomial.legendre.leggauss(n_mu)
    mu = 0.5 * (mu + 1.0)
    w = 0.5 * w
    phi = np.arange(n_phi) * (2 * np.pi / n_phi)
    st = np.sqrt(1.0 - mu**2)
    ti = np.asarray(theta_i, dtype=float)[:, None, None]
    cos_psi = np.sin(ti) * st[None, :, None] * np.cos(phi)[None, None, :] \
        + np.cos(ti) * mu[None, :, None]
    vals = lobe(cos_psi, alpha).sum(axis=2) * (2 * np.pi / n_phi)
    return vals @ w


@lru_cache(maxsize=None)
def _lobe_spline(alpha: int) -> CubicSpline:
    if alpha >= 64:
        raise ValueError("scatter exponent too large for the tabulated normalisation")
    grid = np.linspace(0.0, np.pi / 2, 1025)
    return CubicSpline(grid, _hemisphere_lobe_integral(alpha, grid))


def lobe_normalization(alpha: int, theta_i):
    """Solid-angle integral of the lobe over the scattering hemisphere (sr).

    Tabulated once per exponent by quadrature, then interpolated.
    """
    v = _lobe_spline(int(alpha))(np.asarray(theta_i, dtype=float))
    return float(v) if np.ndim(v) == 0 else v


def directive_power(S, tile_area, cos_i, lobe_value, norm, r_i, r_s, wavelength):
    """Power transfer |a|^2 of one tile for isotropic unit-gain antennas."""
    return (np.asarray(S) ** 2 * (wavelength / (4 * np.pi)) ** 2 * tile_area * cos_i
            * lobe_value / norm / (np.asarray(r_i) ** 2 * np.asarray(r_s) ** 2))


def directive_scatter(tile_area: float, theta_i: float, psi_r: float, material: Material,
                      r_i: float, r_s: float, wavelength: float, phase: float = 0.0) -> complex:
    """Field scattered by one surface tile under the directive model.

    The power follows ``S^2 (lambda/4pi)^2 dA cos(theta_i) / (r_i r_s)^2`` times
    the lobe divided by its hemisphere integral, so that a tile re-radiates
    ``S^2`` of the power it intercepts.  ``phase`` is the tile's random phase.
    """
    if r_i <= 0 or r_s <= 0:
        raise ValueError("distances must be > 0")
    S = material.scatter_coeff
    if S == 0.0:
        return 0j
    alpha = material.scatter_exponent
    p = directive_power(S, tile_area, math.cos(theta_i), lobe(math.cos(psi_r), alpha),
                        lobe_normalization(alpha, theta_i), r_i, r_s, wavelength)
    return complex(math.sqrt(float(p)) * np.exp(1j * (phase - 2 * np.pi * (r_i + r_s) / wavelength)))
