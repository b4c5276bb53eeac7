"""Air properties, visco-thermal narrow-tube model and its validity checks."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import mpmath
import numpy as np

from .errors import BesselRangeError, ConfigurationError, SingularityError

#: Largest |z| accepted by :func:`complex_bessel_j`.
SERIES_RADIUS = 5000.0


@dataclass(frozen=True)
class MediumProperties:
    rho: float = 1.225        # kg/m^3
    mu: float = 1.8e-5        # Pa s
    cp: float = 1007.0        # J/(kg K)
    K: float = 0.02476        # W/(m K)
    gamma: float = 1.4
    c: float = 340.0          # m/s

    def __post_init__(self):
        for name in ("rho", "mu", "cp", "K", "gamma", "c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"medium property {name} must be positive, got {v}")
        if self.gamma <= 1:
            raise ConfigurationError("specific-heat ratio must exceed 1")

    @property
    def impedance(self) -> float:
        return self.rho * self.c

    def wavenumber(self, f: float) -> float:
        return 2.0 * math.pi * f / self.c

    def with_overrides(self, **overrides) -> "MediumProperties":
        return replace(self, **overrides)


def air_ntp(**overrides) -> MediumProperties:
    """Air at 20 C and 1 atm; c defaults to 340 m/s."""
    return MediumProperties(**overrides)


def _check_series_args(order, z):
    if order not in (0, 1, 2):
        raise ConfigurationError(f"Bessel order {order} not supported")
    if abs(z) > SERIES_RADIUS:
        raise BesselRangeError(
            f"|z|={abs(z):.3g} exceeds the series radius {SERIES_RADIUS}; "
            "reduce the radius-frequency product")


def _working_digits(z: complex) -> int:
    # alternating terms reach ~e^|z| while the sum can be O(1)
    return 27 + int(abs(z) / math.log(10))


def _series(order: int, z: complex):
    """Ascending series of J_order at the current mpmath precision."""
    half = mpmath.mpc(z.real, z.imag) / 2
    term = half ** order / mpmath.factorial(order)
    q = -half * half
    total = term
    m = 0
    while True:
        m += 1
        term = term * q / (m * (m + order))
        new = total + term
        if m > abs(z) and new == total:
            return total
        total = new


def complex_bessel_j(order: int, z: complex) -> complex:
    """J_order(z) for order in {0, 1, 2} from the ascending series.

    Terms are accumulated in extended precision so that the cancellation
    between large alternating terms does not eat the 53-bit result;
    summation stops once further terms no longer change the sum.
    """
    z = complex(z)
    _check_series_args(order, z)
    with mpmath.workdps(_working_digits(z)):
        value = complex(_series(order, z))
    if not cmath.isfinite(value):
        raise BesselRangeError(f"J{order}({z}) overflows double precision")
    return value


@dataclass(frozen=True)
class ViscoThermalState:
    frequency: float
    radius: float
    k: float
    k_v: complex
    k_h: complex
    phi_v: complex
    phi_h: complex
    k_w: complex
    z_w: complex
    delta_v: float
    delta_h: float

    @property
    def c_w(self) -> complex:
        return 2.0 * math.pi * self.frequency / self.k_w

    @property
    def rho_w(self) -> complex:
        return self.z_w / self.c_w


def bessel_ratio(z: complex) -> complex:
    """-J2(z)/J0(z), formed before rounding so large |Im z| cannot overflow."""
    z = complex(z)
    _check_series_args(0, z)
    with mpmath.workdps(_working_digits(z)):
        j0 = _series(0, z)
        if abs(j0) < 1e-12:
            raise SingularityError(f"J0({z}) vanishes; Bessel ratio undefined")
        return complex(-_series(2, z) / j0)


def visco_thermal(medium: MediumProperties, f: float, a: float,
                  paper_literal_phi: bool = False) -> ViscoThermalState:
    """Complex wavenumber and impedance of a narrow circular duct of radius ``a``.

    With ``paper_literal_phi`` the viscous function is built from the thermal
    wavenumber and vice versa, reproducing the pairing as printed in the
    source text; the default pairs each function with its own wavenumber.
    """
    if not f > 0 or not a > 0:
        raise ConfigurationError("frequency and radius must be positive")
    omega = 2.0 * math.pi * f
    k = omega / medium.c
    k_v = np.sqrt(complex(0.0, -omega * medium.rho / medium.mu))
    k_h = np.sqrt(complex(0.0, -omega * medium.rho * medium.cp / medium.K))
    if paper_literal_phi:
        phi_v, phi_h = bessel_ratio(k_h * a), bessel_ratio(k_v * a)
    else:
        phi_v, phi_h = bessel_ratio(k_v * a), bessel_ratio(k_h * a)
    g = medium.gamma
    thermal = g - (g - 1.0) * phi_h
    k_w = k * np.sqrt(thermal / phi_v)
    z_w = medium.impedance * np.sqrt(1.0 / (phi_v * thermal))
    return ViscoThermalState(
        frequency=f, radius=a, k=k, k_v=complex(k_v), k_h=complex(k_h),
        phi_v=phi_v, phi_h=phi_h, k_w=complex(k_w), z_w=complex(z_w),
        delta_v=math.sqrt(2.0 * medium.mu / (omega * medium.rho)),
        delta_h=math.sqrt(2.0 * medium.K / (omega * medium.rho * medium.cp)),
    )


@dataclass(frozen=True)
class ValidityItem:
    name: str
    ratio: float
    threshold: float
    passed: bool
    relation: str = ">="


@dataclass
class ValidityReport:
    items: list[ValidityItem] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def failures(self) -> list[str]:
        return [item.name for item in self.items if not item.passed]

    def as_dict(self) -> dict:
        return {item.name: {"ratio": item.ratio, "threshold": item.threshold,
                            "relation": item.relation, "passed": item.passed}
                for item in self.items}


def validity_check(state: ViscoThermalState, k: float, a: float, L: float,
                   wavenumber_ratio: float = 10.0, length_ratio: float = 100.0) -> ValidityReport:
    """Check the narrow-tube model assumptions; reporting only, never raises."""
    ka = k * a
    items = [
        ValidityItem("viscous_wavenumber", abs(state.k_v) / k, wavenumber_ratio,
                     abs(state.k_v) / k >= wavenumber_ratio),
        ValidityItem("thermal_wavenumber", abs(state.k_h) / k, wavenumber_ratio,
                     abs(state.k_h) / k >= wavenumber_ratio),
        ValidityItem("plane_wave", ka, 1.0, ka < 1.0, "<"),
        ValidityItem("viscous_layer_length", L / state.delta_v, length_ratio,
                     L / state.delta_v >= length_ratio),
        ValidityItem("thermal_layer_length", L / state.delta_h, length_ratio,
                     L / state.delta_h >= length_ratio),
    ]
    return ValidityReport(items)
