import cmath
import math

import numpy as np
import pytest
from scipy.special import jv, jn_zeros

from ductpinn.errors import BesselRangeError, ConfigurationError, SingularityError
from ductpinn.media import (SERIES_RADIUS, MediumProperties, air_ntp, bessel_ratio,
                            complex_bessel_j, validity_check, visco_thermal)

AIR = air_ntp()


def test_air_defaults():
    assert (AIR.rho, AIR.mu, AIR.cp, AIR.K, AIR.gamma, AIR.c) == (1.225, 1.8e-5, 1007.0, 0.02476, 1.4, 340.0)
    assert AIR.impedance == 1.225 * 340.0
    assert air_ntp(c=343.0).c == 343.0


@pytest.mark.parametrize("field,value", [("rho", 0.0), ("c", -1.0), ("gamma", 1.0), ("mu", float("nan"))])
def test_invalid_medium(field, value):
    with pytest.raises(ConfigurationError):
        MediumProperties(**{field: value})


def test_bessel_at_zero():
    assert complex_bessel_j(0, 0) == 1.0
    assert complex_bessel_j(2, 0) == 0.0


def test_bessel_known_values():
    assert abs(complex_bessel_j(0, 1.0) - 0.7651976866) < 1e-10
    # J0(i) = I0(1)
    assert abs(complex_bessel_j(0, 1j) - 1.2660658778) < 1e-10


@pytest.mark.parametrize("z", [0.3 + 0.1j, 3.0 - 2.0j, 7.3 * cmath.exp(-0.25j * math.pi),
                               40.0 + 0.0j, 25.0 - 25.0j, 731.0 * cmath.exp(-0.25j * math.pi)])
@pytest.mark.parametrize("order", [0, 1, 2])
def test_bessel_against_scipy(order, z):
    ref = jv(order, z)
    assert abs(complex_bessel_j(order, z) - ref) <= 1e-10 * abs(ref)


@pytest.mark.parametrize("z", [0.7 - 0.2j, 5.0 + 1.0j, 12.0 * cmath.exp(-0.25j * math.pi), 30.0 - 4.0j])
def test_bessel_recurrence(z):
    j0, j1, j2 = (complex_bessel_j(n, z) for n in (0, 1, 2))
    assert abs(j2 - (2.0 / z * j1 - j0)) <= 1e-9 * max(abs(j2), abs(j0))


def test_bessel_range_and_order():
    with pytest.raises(BesselRangeError, match="reduce"):
        complex_bessel_j(0, SERIES_RADIUS + 1.0)
    with pytest.raises(ConfigurationError):
        complex_bessel_j(3, 1.0)


def test_ratio_singular_at_bessel_zero():
    with pytest.raises(SingularityError):
        bessel_ratio(jn_zeros(0, 1)[0])


def test_ratio_large_imaginary_argument_stays_finite():
    z = 2924.0 * cmath.exp(-0.25j * math.pi)
    r = bessel_ratio(z)
    assert cmath.isfinite(r) and abs(r - 1.0) < 1e-2


def test_viscous_wavenumber_and_layer():
    s = visco_thermal(AIR, 500.0, 0.5e-3)
    assert abs(s.k_v - 1.0339e4 * (1 - 1j)) / abs(s.k_v) < 1e-4
    assert abs(s.delta_v - 9.67e-5) / 9.67e-5 < 1e-3
    for kv in (s.k_v, s.k_h):
        assert abs(cmath.phase(kv) + math.pi / 4) < 1e-12
    assert s.delta_v > 0 and s.delta_h > 0


def test_narrow_values_against_independent_formula():
    f, a = 500.0, 0.5e-3
    s = visco_thermal(AIR, f, a)
    w = 2 * math.pi * f
    kv = np.sqrt(-1j * w * AIR.rho / AIR.mu)
    kh = np.sqrt(-1j * w * AIR.rho * AIR.cp / AIR.K)
    phv = -jv(2, kv * a) / jv(0, kv * a)
    phh = -jv(2, kh * a) / jv(0, kh * a)
    k = w / AIR.c
    kw = k * np.sqrt((AIR.gamma - (AIR.gamma - 1) * phh) / phv)
    zw = AIR.rho * AIR.c / np.sqrt(phv * (AIR.gamma - (AIR.gamma - 1) * phh))
    assert abs(s.k_w - kw) <= 1e-10 * abs(kw)
    assert abs(s.z_w - zw) <= 1e-10 * abs(zw)
    # dissipative: decaying wave for exp(+j w t)
    assert s.k_w.imag < 0


def test_literal_pairing_swaps_functions():
    std = visco_thermal(AIR, 500.0, 0.5e-3)
    lit = visco_thermal(AIR, 500.0, 0.5e-3, paper_literal_phi=True)
    assert lit.phi_v == std.phi_h and lit.phi_h == std.phi_v
    assert lit.k_w != std.k_w


def test_wide_duct_limit():
    s = visco_thermal(AIR, 500.0, 0.05)
    assert abs(s.k_w / s.k - 1) < 1e-2


def test_monotone_approach_to_free_field():
    k = AIR.wavenumber(500.0)
    radii = [1e-3, 5e-3, 50e-3]
    dk = [abs(visco_thermal(AIR, 500.0, a).k_w / k - 1) for a in radii]
    dz = [abs(visco_thermal(AIR, 500.0, a).z_w / AIR.impedance - 1) for a in radii]
    assert dk[0] > dk[1] > dk[2] and dz[0] > dz[1] > dz[2]


def test_invalid_inputs():
    with pytest.raises(ConfigurationError):
        visco_thermal(AIR, 0.0, 1e-3)
    with pytest.raises(ConfigurationError):
        visco_thermal(AIR, 500.0, -1e-3)


def test_validity_narrow_case_passes():
    s = visco_thermal(AIR, 500.0, 0.5e-3)
    report = validity_check(s, s.k, 0.5e-3, 1.0)
    assert report.passed and report.failures() == []


def test_validity_plane_wave_fails_for_large_radius():
    s = visco_thermal(AIR, 500.0, 0.2)
    report = validity_check(s, s.k, 0.2, 1.0)
    assert report.failures() == ["plane_wave"]
    assert abs(report.as_dict()["plane_wave"]["ratio"] - s.k * 0.2) < 1e-15


def test_validity_layer_length_fails():
    s = visco_thermal(AIR, 500.0, 0.5e-3)
    report = validity_check(s, s.k, 0.5e-3, s.delta_v)
    assert "viscous_layer_length" in report.failures()


def test_derived_speed_and_density():
    s = visco_thermal(AIR, 500.0, 0.5e-3)
    assert abs(s.c_w * s.k_w - 2 * math.pi * 500.0) < 1e-9
    assert abs(s.rho_w * s.c_w - s.z_w) < 1e-9
