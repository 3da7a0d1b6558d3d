import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from reflectorsim import em
from reflectorsim.em import OpticalRegimeWarning, Polarization
from reflectorsim.scene import (PERFECT_CONDUCTOR, AntennaSpec, Cylinder, FlatPlate, Material,
                                Sphere, C0)
from oracles import lobe_integral_closed_form, lobe_integral_quadrature

WAVELENGTH = C0 / 28e9
angles = st.floats(0.0, math.pi / 2, exclude_max=True)


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.0, 1.5])
def test_conductor_coefficients(theta):
    assert em.fresnel(theta, PERFECT_CONDUCTOR, Polarization.TE) == -1
    assert em.fresnel(theta, PERFECT_CONDUCTOR, Polarization.TM) == 1


def test_brewster_angle_lossless():
    glass = Material("lossless", rel_permittivity=4.0)
    assert abs(em.fresnel(math.atan(2.0), glass, Polarization.TM)) < 1e-12


def test_normal_incidence_closed_form():
    eps = 4.0
    m = Material("lossless", rel_permittivity=eps)
    expected = (1 - math.sqrt(eps)) / (1 + math.sqrt(eps))
    assert em.fresnel(0.0, m, "TE") == pytest.approx(expected)
    # TM uses p = s x k on both sides, which makes it equal and opposite at normal incidence.
    assert em.fresnel(0.0, m, "TM") == pytest.approx(-expected)


@pytest.mark.parametrize("pol", list(Polarization))
def test_grazing_limit(pol):
    from reflectorsim.scene import CONCRETE, DRYWALL
    for m in (CONCRETE, DRYWALL):
        assert abs(em.fresnel(math.pi / 2 - 1e-7, m, pol)) > 0.9999


@pytest.mark.parametrize("theta", [-0.01, math.pi / 2, 2.0, float("nan")])
def test_fresnel_rejects_bad_angle(theta):
    with pytest.raises(ValueError):
        em.fresnel(theta, PERFECT_CONDUCTOR, "TE")


@given(theta=angles, eps_r=st.floats(1.0, 100.0), sigma=st.floats(0.0, 50.0),
       pol=st.sampled_from(list(Polarization)))
def test_fresnel_bounded(theta, eps_r, sigma, pol):
    m = Material("m", rel_permittivity=eps_r, conductivity=sigma)
    assert abs(em.fresnel(theta, m, pol)) <= 1 + 1e-12


@given(theta=st.floats(0.0, 1.5), eps_r=st.floats(1.0, 20.0), sigma=st.floats(0.0, 5.0))
def test_fresnel_continuity(theta, eps_r, sigma):
    m = Material("m", rel_permittivity=eps_r, conductivity=sigma)
    for pol in Polarization:
        a = em.fresnel(theta, m, pol)
        b = em.fresnel(theta + 1e-9, m, pol)
        assert abs(a - b) < 1e-6


def test_fresnel_vectorised_matches_scalar():
    from reflectorsim.scene import CONCRETE
    thetas = np.linspace(0, 1.5, 7)
    vec = em.fresnel(thetas, CONCRETE, "TE")
    assert_allclose(vec, [em.fresnel(t, CONCRETE, "TE") for t in thetas], rtol=1e-15)


def direction_from_offsets(e_deg=0.0, h_deg=0.0):
    """Unit vector for boresight +x, up +z."""
    e, h = math.radians(e_deg), math.radians(h_deg)
    return np.array([math.cos(e) * math.cos(h), math.cos(e) * math.sin(h), math.sin(e)])


def gain_dbi(direction, spec=AntennaSpec()):
    return 10 * math.log10(em.antenna_gain(spec, direction))


def test_boresight_gain():
    assert gain_dbi([1, 0, 0]) == pytest.approx(17.0, abs=1e-12)


def test_half_power_points():
    assert gain_dbi(direction_from_offsets(e_deg=13)) == pytest.approx(14.0, abs=0.02)
    assert gain_dbi(direction_from_offsets(h_deg=12)) == pytest.approx(14.0, abs=0.02)
    # Exactly half the power at the half-beamwidth angles.
    assert em.antenna_gain(AntennaSpec(), direction_from_offsets(e_deg=13)) == pytest.approx(
        10 ** 1.7 / 2, rel=1e-12)


def test_e_plane_at_full_beamwidth():
    assert gain_dbi(direction_from_offsets(e_deg=26)) == pytest.approx(17 - 12.04, abs=0.01)


def test_back_lobe_floor():
    assert gain_dbi([-1, 0, 0]) == pytest.approx(17 - 40, abs=1e-9)


unit_dirs = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


@given(d=unit_dirs)
def test_gain_peak_at_boresight_and_plane_symmetry(d):
    d = np.array(d) / np.linalg.norm(d)
    g = em.antenna_gain(AntennaSpec(), d)
    assert g <= em.antenna_gain(AntennaSpec(), [1, 0, 0])
    assert em.antenna_gain(AntennaSpec(), d * [1, -1, 1]) == pytest.approx(g, rel=1e-12)
    assert em.antenna_gain(AntennaSpec(), d * [1, 1, -1]) == pytest.approx(g, rel=1e-12)


def test_fspl_at_10m():
    a = em.spreading_and_phase(10.0, WAVELENGTH)
    assert -20 * math.log10(abs(a)) == pytest.approx(81.39, abs=0.01)
    assert em.fspl_db(10.0, WAVELENGTH) == pytest.approx(-20 * math.log10(abs(a)), abs=1e-12)


def test_spreading_normalisation_and_phase():
    d = WAVELENGTH / (4 * math.pi)
    assert abs(em.spreading_and_phase(d, WAVELENGTH)) == pytest.approx(1.0)
    a = em.spreading_and_phase(3.0, WAVELENGTH)
    assert np.angle(a) == pytest.approx(np.angle(np.exp(-2j * np.pi * 3.0 / WAVELENGTH)), abs=1e-9)


def test_doubling_distance():
    a1, a2 = em.spreading_and_phase(4.0, WAVELENGTH), em.spreading_and_phase(8.0, WAVELENGTH)
    assert 20 * math.log10(abs(a2) / abs(a1)) == pytest.approx(-6.0206, abs=1e-4)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_spreading_rejects_nonpositive(d):
    with pytest.raises(ValueError):
        em.spreading_and_phase(d, WAVELENGTH)


def db(x):
    return 10 * math.log10(x)


def test_sphere_rcs():
    s = em.rcs(Sphere(0.3302, np.zeros(3)), [1, 0, 0], [0, 1, 0], 0.010707)
    assert db(s) == pytest.approx(db(0.3425), abs=0.1)


def test_plate_boresight_rcs():
    plate = FlatPlate(0.6096, 0.6096, np.zeros(3), np.array([1.0, 0, 0]))
    s = em.rcs(plate, [-1, 0, 0], [1, 0, 0], 0.010707)
    assert s == pytest.approx(1.514e4, rel=1e-3)
    assert db(s) == pytest.approx(41.8, abs=0.1)


def test_cylinder_broadside_rcs():
    cyl = Cylinder(0.1143, 0.4572, np.zeros(3))
    s = em.rcs(cyl, [-1, 0, 0], [1, 0, 0], 0.010707)
    assert db(s) == pytest.approx(db(14.02), abs=0.1)


def test_small_reflector_warns():
    with pytest.warns(OpticalRegimeWarning):
        em.rcs(Sphere(0.02, np.zeros(3)), [1, 0, 0], [-1, 0, 0], WAVELENGTH)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        em.rcs(Sphere(0.3302, np.zeros(3)), [1, 0, 0], [-1, 0, 0], WAVELENGTH)


@given(i=unit_dirs, s=unit_dirs, kind=st.sampled_from(["plate", "cylinder", "sphere"]))
def test_rcs_nonnegative(i, s, kind):
    i = np.array(i) / np.linalg.norm(i)
    s = np.array(s) / np.linalg.norm(s)
    refl = {"plate": FlatPlate(0.3, 0.3, np.zeros(3), np.array([0.0, 1, 0])),
            "cylinder": Cylinder(0.1143, 0.4572, np.zeros(3)),
            "sphere": Sphere(0.3302, np.zeros(3))}[kind]
    assert em.rcs(refl, i, s, WAVELENGTH) >= 0


@given(theta=st.floats(0.0, 1.3))
def test_plate_rcs_peaks_at_specular(theta):
    plate = FlatPlate(0.3, 0.3, np.zeros(3), np.array([1.0, 0, 0]))
    inc = np.array([-math.cos(theta), math.sin(theta), 0.0])
    spec = inc - 2 * (inc @ plate.normal) * plate.normal
    peak = em.rcs(plate, inc, spec, WAVELENGTH)
    for off in np.linspace(-0.3, 0.3, 13):
        c, s = math.cos(off), math.sin(off)
        other = np.array([c * spec[0] - s * spec[1], s * spec[0] + c * spec[1], 0.0])
        assert em.rcs(plate, inc, other, WAVELENGTH) <= peak * (1 + 1e-12)


def test_lobe_extremes():
    assert em.lobe(1.0, 4) == 1.0
    assert em.lobe(-1.0, 4) == 0.0


@pytest.mark.parametrize("alpha", [1, 2, 3, 4, 8, 20])
@pytest.mark.parametrize("theta_i", [0.0, 0.4, 0.9, 1.3, 1.55])
def test_lobe_normalisation_closed_form(alpha, theta_i):
    assert em.lobe_normalization(alpha, theta_i) == pytest.approx(
        lobe_integral_closed_form(alpha, theta_i), rel=1e-9)


@pytest.mark.parametrize("alpha,theta_i", [(4, 0.0), (4, 0.77), (2, 1.2), (7, 0.3)])
def test_normalised_lobe_integrates_to_one(alpha, theta_i):
    ratio = lobe_integral_quadrature(alpha, theta_i) / em.lobe_normalization(alpha, theta_i)
    assert abs(ratio - 1) < 1e-3


def test_directive_scatter_zero_when_no_scattering():
    smooth = Material("smooth", rel_permittivity=3.0, scatter_coeff=0.0)
    assert em.directive_scatter(0.0625, 0.3, 0.0, smooth, 2.0, 3.0, WAVELENGTH) == 0


def test_directive_scatter_magnitude_and_phase():
    m = Material("rough", rel_permittivity=3.0, scatter_coeff=0.3, scatter_exponent=4)
    a = em.directive_scatter(0.0625, 0.5, 0.0, m, 2.0, 3.0, WAVELENGTH, phase=0.7)
    expected = (0.3**2 * (WAVELENGTH / (4 * math.pi)) ** 2 * 0.0625 * math.cos(0.5)
                / lobe_integral_closed_form(4, 0.5) / (2.0**2 * 3.0**2))
    assert abs(a) ** 2 == pytest.approx(expected, rel=1e-9)
    phase = 0.7 - 2 * math.pi * 5.0 / WAVELENGTH
    assert np.angle(a * np.exp(-1j * phase)) == pytest.approx(0.0, abs=1e-6)
    back = em.directive_scatter(0.0625, 0.5, math.pi, m, 2.0, 3.0, WAVELENGTH)
    assert abs(back) == 0
