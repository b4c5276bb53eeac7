"""Reference solutions: closed forms for uniform ducts (with and without mean
flow or visco-thermal losses) and a shooting solver for horn ducts."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import ConfigurationError, DomainError, ResonanceError
from .media import ViscoThermalState
from .physics import AreaProfile
from .trial import BoundaryConditions, DuctGeometry

#: Characteristic denominators below this magnitude are treated as resonant.
SINGULAR_THRESHOLD = 1e-8
#: Relative distance to the nearest resonance that triggers a warning.
NEAR_RESONANCE = 0.01


class NearResonanceWarning(RuntimeWarning):
    pass


# ---------------------------------------------------------------------------
# Resonances
# ---------------------------------------------------------------------------

def resonance_frequencies(geometry: DuctGeometry, c: float, n_max: int) -> list[float]:
    """Frequencies where sin(kL) = 0 for a duct with pressure data at both ends."""
    if n_max < 1:
        raise ConfigurationError("n_max must be at least 1")
    return [n * c / (2.0 * geometry.length) for n in range(1, n_max + 1)]


def printed_resonance_frequencies(geometry: DuctGeometry, c: float, n_max: int) -> list[float]:
    """The n c / L sequence; a subsequence of :func:`resonance_frequencies`."""
    if n_max < 1:
        raise ConfigurationError("n_max must be at least 1")
    return [n * c / geometry.length for n in range(1, n_max + 1)]


def resonance_report(geometry: DuctGeometry, c: float, n_max: int) -> dict:
    return {
        "sin_kL_zero": resonance_frequencies(geometry, c, n_max),
        "n_c_over_L": printed_resonance_frequencies(geometry, c, n_max),
    }


def nearest_resonance(geometry: DuctGeometry, c: float, f: float) -> float:
    step = c / (2.0 * geometry.length)
    return max(1, round(f / step)) * step


def warn_if_near_resonance(geometry: DuctGeometry, c: float, f: float) -> float | None:
    fn = nearest_resonance(geometry, c, f)
    if abs(f - fn) <= NEAR_RESONANCE * fn:
        warnings.warn(f"{f} Hz lies within {NEAR_RESONANCE:.0%} of the resonance at {fn:g} Hz",
                      NearResonanceWarning, stacklevel=2)
        return fn
    return None


def _resonance(msg, geometry, k, c):
    if c is None:
        raise ResonanceError(f"{msg} (k={k})")
    f = float(np.real(k)) * c / (2.0 * math.pi)
    fn = nearest_resonance(geometry, c, f)
    raise ResonanceError(f"{msg}: {f:g} Hz is at the resonance f_n = {fn:g} Hz",
                         nearest_frequency=fn)


# ---------------------------------------------------------------------------
# Uniform duct (real or complex wavenumber)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformSolution:
    """p(x) = C1 cos(kx) + C2 sin(kx); u from the no-flow momentum equation."""

    k: complex
    C1: complex
    C2: complex
    rho_c: complex = 1.0

    def p(self, x):
        x = np.asarray(x, dtype=float)
        return self.C1 * np.cos(self.k * x) + self.C2 * np.sin(self.k * x)

    def dp(self, x):
        x = np.asarray(x, dtype=float)
        return self.k * (-self.C1 * np.sin(self.k * x) + self.C2 * np.cos(self.k * x))

    def d2p(self, x):
        return -(self.k * self.k) * self.p(x)

    def u(self, x):
        x = np.asarray(x, dtype=float)
        return -1j / self.rho_c * (self.C1 * np.sin(self.k * x) - self.C2 * np.cos(self.k * x))

    def du(self, x):
        x = np.asarray(x, dtype=float)
        return -1j * self.k / self.rho_c * (self.C1 * np.cos(self.k * x) + self.C2 * np.sin(self.k * x))

    __call__ = p


def uniform_analytic(geometry: DuctGeometry, bc: BoundaryConditions, k, rho_c=1.0,
                     c: float | None = None) -> UniformSolution:
    """Closed form for p'' + k^2 p = 0 with pressure data at both ends.

    ``k`` and ``rho_c`` may be complex (narrow-tube medium).  ``c`` is only
    used to name the nearest resonance frequency in errors.
    """
    x1, x2 = geometry.x1, geometry.x2
    p1, p2 = complex(bc.p1), complex(bc.p2)
    den = np.sin(k * (x2 - x1))
    if abs(den) <= SINGULAR_THRESHOLD:
        _resonance("uniform duct is resonant", geometry, k, c)
    C1 = (p1 * np.sin(k * x2) - p2 * np.sin(k * x1)) / den
    C2 = (p1 * np.cos(k * x2) - p2 * np.cos(k * x1)) / np.sin(k * (x1 - x2))
    if bc.is_real and np.isrealobj(k):
        C1, C2 = C1.real, C2.real
    return UniformSolution(k, C1, C2, rho_c)


def narrow_analytic(geometry: DuctGeometry, bc: BoundaryConditions,
                    state: ViscoThermalState, c: float | None = None) -> UniformSolution:
    """Uniform-duct closed form with k -> k_w and rho c -> z_w."""
    return uniform_analytic(geometry, bc, complex(state.k_w), complex(state.z_w), c)


# ---------------------------------------------------------------------------
# Uniform duct with mean flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeanFlowSolution:
    """p = C1 exp(-j k+ x) + C2 exp(j k- x), u = D1 exp(-j k+ x) + D2 exp(j k- x)."""

    k: float
    mach: float
    k_plus: float
    k_minus: float
    C1: complex
    C2: complex
    D1: complex
    D2: complex

    def _waves(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-1j * self.k_plus * x), np.exp(1j * self.k_minus * x)

    def p(self, x):
        a, b = self._waves(x)
        return self.C1 * a + self.C2 * b

    def dp(self, x):
        a, b = self._waves(x)
        return -1j * self.k_plus * self.C1 * a + 1j * self.k_minus * self.C2 * b

    def d2p(self, x):
        a, b = self._waves(x)
        return -(self.k_plus ** 2) * self.C1 * a - (self.k_minus ** 2) * self.C2 * b

    def u(self, x):
        a, b = self._waves(x)
        return self.D1 * a + self.D2 * b

    def du(self, x):
        a, b = self._waves(x)
        return -1j * self.k_plus * self.D1 * a + 1j * self.k_minus * self.D2 * b

    __call__ = p


def meanflow_analytic(geometry: DuctGeometry, bc: BoundaryConditions, k: float, M: float,
                      rho_c: float, c: float | None = None) -> MeanFlowSolution:
    if not 0.0 <= M < 1.0:
        raise ConfigurationError(f"Mach number must lie in [0, 1), got {M}")
    x1, x2 = geometry.x1, geometry.x2
    p1, p2 = complex(bc.p1), complex(bc.p2)
    kp, km = k / (1.0 + M), k / (1.0 - M)
    den = np.exp(1j * (km * x2 - kp * x1)) - np.exp(1j * (km * x1 - kp * x2))
    if abs(den) <= SINGULAR_THRESHOLD:
        _resonance("mean-flow duct is resonant", geometry, k, c)
    C1 = (p1 * np.exp(1j * km * x2) - p2 * np.exp(1j * km * x1)) / den
    C2 = (p1 * np.exp(-1j * kp * x2) - p2 * np.exp(-1j * kp * x1)) / -den
    return MeanFlowSolution(k, M, kp, km, C1, C2, C1 / rho_c, -C2 / rho_c)


# ---------------------------------------------------------------------------
# Horn duct: superposition of two RK4 initial-value solutions
# ---------------------------------------------------------------------------

def rk4_fundamental(system, x):
    """Fundamental matrix Y(x_i) of y' = A(x) y with Y(x_0) = I.

    ``system(x)`` returns the (n, n) coefficient matrix; classical RK4 with
    the step set by the grid.
    """
    x = np.asarray(x, dtype=float)
    A0 = np.asarray(system(x[0]))
    n = A0.shape[0]
    Y = np.empty((x.size, n, n), dtype=np.result_type(A0, float))
    Y[0] = np.eye(n)
    for i in range(x.size - 1):
        h = x[i + 1] - x[i]
        xm = x[i] + 0.5 * h
        Ai, Am, Ae = system(x[i]), system(xm), system(x[i + 1])
        y = Y[i]
        k1 = Ai @ y
        k2 = Am @ (y + 0.5 * h * k1)
        k3 = Am @ (y + 0.5 * h * k2)
        k4 = Ae @ (y + h * k3)
        Y[i + 1] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Y


@dataclass
class BVPSolution:
    x: np.ndarray
    p_grid: np.ndarray
    dp_grid: np.ndarray
    d2p_grid: np.ndarray

    def __post_init__(self):
        self._p = CubicHermiteSpline(self.x, self.p_grid, self.dp_grid)
        self._dp = CubicHermiteSpline(self.x, self.dp_grid, self.d2p_grid)

    def p(self, x):
        return self._p(np.asarray(x, dtype=float))

    def dp(self, x):
        return self._dp(np.asarray(x, dtype=float))

    def d2p(self, x):
        return self._dp(np.asarray(x, dtype=float), 1)

    __call__ = p


def shoot_linear(geometry: DuctGeometry, bc: BoundaryConditions, damping, stiffness,
                 n_grid: int) -> BVPSolution:
    """Solve p'' + damping(x) p' + stiffness(x) p = 0 with p(x1)=p1, p(x2)=p2.

    Two initial-value solutions started from (p, p') = (1, 0) and (0, 1) are
    combined to meet the far-end condition.  Complex coefficients are allowed.
    """
    if n_grid < 64:
        raise ConfigurationError("the shooting grid needs at least 64 points")
    x = np.linspace(geometry.x1, geometry.x2, n_grid)

    def system(s):
        return np.array([[0.0, 1.0], [-stiffness(s), -damping(s)]])

    Y = rk4_fundamental(system, x)
    ya, yb = Y[:, :, 0], Y[:, :, 1]   # columns: p, p' of each start vector
    scale = np.max(np.abs(yb[:, 0]))
    if abs(yb[-1, 0]) <= SINGULAR_THRESHOLD * scale:
        raise ResonanceError("shooting matrix is singular (duct resonance)")
    p1, p2 = complex(bc.p1), complex(bc.p2)
    beta = (p2 - p1 * ya[-1, 0]) / yb[-1, 0]
    sol = p1 * ya + beta * yb
    p, dp = sol[:, 0], sol[:, 1]
    if np.isrealobj(Y) and bc.is_real:
        p, dp = p.real, dp.real
    d2p = -np.array([damping(s) for s in x]) * dp - np.array([stiffness(s) for s in x]) * p
    return BVPSolution(x, p, dp, d2p)


def webster_bvp(geometry: DuctGeometry, bc: BoundaryConditions, area: AreaProfile, k,
                n_grid: int = 1024) -> BVPSolution:
    """Sampled solution of the horn equation p'' + (S'/S) p' + k^2 p = 0."""
    xs = np.linspace(geometry.x1, geometry.x2, n_grid)
    if np.any(area.area(xs) <= 0) or area.min_on(geometry) <= 0:
        raise DomainError("cross-sectional area must stay positive on the duct")
    return shoot_linear(geometry, bc, lambda s: area.slope(s) / area.area(s),
                        lambda s: k * k, n_grid)
