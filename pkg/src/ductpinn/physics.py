"""Governing-equation residuals and the losses built from them.

Every residual takes ``Jet2`` objects whose components may be plain arrays
or tape ``Var`` nodes, so the same code serves evaluation and training.
Residuals carry the units of the governing equation (no k^2 normalisation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .autodiff import Jet2, value_of
from .errors import ConfigurationError, DomainError, NumericalFailure
from .media import MediumProperties, ViscoThermalState, air_ntp, visco_thermal
from .network import Architecture, jet_outputs
from .trial import BoundaryConditions, DuctGeometry, TrialField

KINDS = ("uniform", "webster", "narrow", "meanflow")


@dataclass(frozen=True)
class AreaProfile:
    """Cross-section S(x) = S0 + S1 x + S2 x^2 (m^2)."""

    S0: float
    S1: float = 0.0
    S2: float = 0.0

    @classmethod
    def rectangular(cls, h1, w1, h2, w2, geometry: DuctGeometry) -> "AreaProfile":
        """Rectangular duct whose half-height and half-width vary linearly."""
        m_h = (h2 - h1) / geometry.length
        m_w = (w2 - w1) / geometry.length
        return cls(4.0 * h1 * w1, 4.0 * (h1 * m_w + w1 * m_h), 4.0 * m_h * m_w)

    def area(self, x):
        return self.S0 + self.S1 * x + self.S2 * x * x

    def slope(self, x):
        return self.S1 + 2.0 * self.S2 * x

    def min_on(self, geometry: DuctGeometry) -> float:
        candidates = [geometry.x1, geometry.x2]
        if self.S2 != 0.0:
            xv = -self.S1 / (2.0 * self.S2)
            if geometry.x1 < xv < geometry.x2:
                candidates.append(xv)
        return min(self.area(c) for c in candidates)


@dataclass(frozen=True)
class DuctProblem:
    kind: str
    frequency: float
    geometry: DuctGeometry = DuctGeometry()
    bc: BoundaryConditions = BoundaryConditions()
    medium: MediumProperties = air_ntp()
    area: AreaProfile | None = None
    radius: float | None = None
    mach: float | None = None
    paper_literal_phi: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown problem kind {self.kind!r}")
        if not (math.isfinite(self.frequency) and self.frequency > 0):
            raise ConfigurationError("frequency must be positive")
        need = {"webster": "area", "narrow": "radius", "meanflow": "mach"}
        for kind, name in need.items():
            present = getattr(self, name) is not None
            if present != (self.kind == kind):
                raise ConfigurationError(
                    f"{name!r} must be given exactly for {kind!r} problems (kind={self.kind!r})")
        if self.kind in ("uniform", "webster") and not self.bc.is_real:
            raise ConfigurationError(f"{self.kind} problems take real boundary values")
        if self.kind == "meanflow" and not 0.0 <= self.mach < 1.0:
            raise ConfigurationError(f"Mach number must lie in [0, 1), got {self.mach}")
        if self.kind == "narrow" and not self.radius > 0:
            raise ConfigurationError("duct radius must be positive")
        if self.kind == "webster" and self.area.min_on(self.geometry) <= 0:
            raise DomainError("cross-sectional area must stay positive on the duct")

    @property
    def k(self) -> float:
        return self.medium.wavenumber(self.frequency)

    @property
    def outputs(self) -> int:
        """Network outputs needed: one for real-valued problems, two otherwise."""
        return 1 if self.kind in ("uniform", "webster") else 2

    def visco_thermal(self) -> ViscoThermalState:
        if self.kind != "narrow":
            raise ConfigurationError("visco-thermal state only exists for narrow ducts")
        return _cached_state(self.medium, self.frequency, self.radius, self.paper_literal_phi)


@lru_cache(maxsize=64)
def _cached_state(medium, f, a, paper_literal_phi):
    return visco_thermal(medium, f, a, paper_literal_phi)


@dataclass
class ResidualBatch:
    points: np.ndarray
    residuals: list  # one array per part

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        for r in self.residuals:
            if np.shape(value_of(r)) != self.points.shape:
                raise ConfigurationError("residual and point counts differ")


# ---------------------------------------------------------------------------
# Jet-level residuals
# ---------------------------------------------------------------------------

def helmholtz(p: Jet2, k):
    return p.d2 + (k * k) * p.value


def webster(p: Jet2, area: AreaProfile, k, x):
    S = area.area(x)
    if np.any(np.asarray(S) <= 0):
        raise DomainError("cross-sectional area must be positive at every point")
    return p.d2 + (area.slope(x) / S) * p.d1 + (k * k) * p.value


def narrow(pR: Jet2, pI: Jet2, k_w: complex):
    kR, kI = complex(k_w).real, complex(k_w).imag
    a, b = kR * kR - kI * kI, 2.0 * kR * kI
    return pR.d2 + a * pR.value - b * pI.value, pI.d2 + a * pI.value + b * pR.value


def _check_mach(M):
    if not 0.0 <= M < 1.0:
        raise ConfigurationError(f"Mach number must lie in [0, 1), got {M}")


def meanflow(pR: Jet2, pI: Jet2, k, M):
    _check_mach(M)
    s = 1.0 - M * M
    t = 2.0 * M * k
    kk = k * k
    return s * pR.d2 + t * pI.d1 + kk * pR.value, s * pI.d2 - t * pR.d1 + kk * pI.value


def momentum(uR: Jet2, uI: Jet2, dpR, dpI, k, M, rho_c):
    """Split momentum balance j k u + M u' + p'/(rho c) = 0.

    ``dpR``/``dpI`` are the (frozen) pressure gradients at the same points.
    """
    _check_mach(M)
    g = 1.0 / rho_c
    return (M * uR.d1 - k * uI.value + g * dpR,
            M * uI.d1 + k * uR.value + g * dpI)


# ---------------------------------------------------------------------------
# Field-level wrappers
# ---------------------------------------------------------------------------

def _single(field: TrialField, x):
    jets = field.jets(x)
    if len(jets) != 1:
        raise ConfigurationError("expected a one-part (real) field")
    return jets[0]


def _pair(fieldR, fieldI, x):
    if fieldI is None:
        jets = fieldR.jets(x)
        if len(jets) != 2:
            raise ConfigurationError("expected a two-part field")
        return jets
    return _single(fieldR, x), _single(fieldI, x)


def residual_helmholtz(field: TrialField, k, x):
    return helmholtz(_single(field, x), k)


def residual_webster(field: TrialField, area: AreaProfile, k, x):
    return webster(_single(field, x), area, k, x)


def residual_narrow(fieldR, fieldI, k_w, x):
    """``fieldI`` may be ``None`` when ``fieldR`` is a two-output field."""
    return narrow(*_pair(fieldR, fieldI, x), k_w)


def residual_meanflow(fieldR, fieldI, k, M, x):
    return meanflow(*_pair(fieldR, fieldI, x), k, M)


def residual_momentum(velocity, pressure: TrialField, k, M, rho_c, x):
    """Momentum residual of a velocity evaluator against a trained pressure field.

    ``velocity`` is anything with a ``jets(x)`` method returning the real
    and imaginary velocity jets.
    """
    uR, uI = velocity.jets(x)
    dp = pressure.gradient(x)
    return momentum(uR, uI, dp.real, dp.imag, k, M, rho_c)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def mean_square(residuals: Sequence):
    """Sum over parts of the mean squared residual (equal part weights)."""
    if not residuals:
        raise ConfigurationError("no residuals to reduce")
    total = None
    for r in residuals:
        if np.size(value_of(r)) == 0:
            raise ConfigurationError("empty residual batch")
        term = r.square().mean() if hasattr(r, "square") else np.mean(np.square(r))
        total = term if total is None else total + term
    return total


def loss_mean_square(batch: ResidualBatch) -> float:
    """Mean-square loss of a batch, reduced in ascending order of the points."""
    if batch.points.size == 0:
        raise ConfigurationError("empty residual batch")
    order = np.argsort(batch.points, kind="stable")
    return float(mean_square([np.asarray(value_of(r))[order] for r in batch.residuals]))


def pressure_residuals(problem: DuctProblem, trial_jets: list[Jet2], x):
    """Residual arrays of ``problem`` evaluated on its trial jets."""
    k = problem.k
    if problem.kind == "uniform":
        return [helmholtz(trial_jets[0], k)]
    if problem.kind == "webster":
        return [webster(trial_jets[0], problem.area, k, x)]
    if problem.kind == "narrow":
        return list(narrow(trial_jets[0], trial_jets[1], problem.visco_thermal().k_w))
    return list(meanflow(trial_jets[0], trial_jets[1], k, problem.mach))


@dataclass
class LagrangeTerms:
    L_d: object
    L_b: object
    total: object
    boundary_terms: tuple


def lagrange_loss(theta, arch: Architecture, problem: DuctProblem, lam: Sequence[float],
                  interior, boundary=None) -> LagrangeTerms:
    """Residual loss plus multiplier-weighted boundary losses of an untrialed network.

    ``L_b = (1/N_b) sum_j (p(x_j) - p_j)^2`` and each boundary contributes
    ``L_b,j = (p(x_j) - p_j)^2 / N_b`` so that unit multipliers recover
    ``L_d + L_b``.
    """
    if problem.kind not in ("uniform", "webster"):
        raise ConfigurationError("the multiplier baseline is defined for real one-part problems")
    g = problem.geometry
    interior = np.asarray(interior, dtype=float)
    boundary = np.array([g.x1, g.x2] if boundary is None else boundary, dtype=float)
    targets = np.array([complex(problem.bc.p1).real, complex(problem.bc.p2).real])
    if len(lam) != boundary.size:
        raise ConfigurationError("one multiplier per boundary point is required")
    (p,) = jet_outputs(arch, theta, interior)
    if problem.kind == "uniform":
        r = helmholtz(p, problem.k)
    else:
        r = webster(p, problem.area, problem.k, interior)
    L_d = mean_square([r])
    (pb,) = jet_outputs(arch, theta, boundary)
    err = pb.value - targets
    sq = err.square() if hasattr(err, "square") else np.square(err)
    n_b = boundary.size
    terms = tuple(sq[j] * (1.0 / n_b) for j in range(n_b))
    L_b = sq.mean() if hasattr(sq, "mean") else float(np.mean(sq))
    total = L_d
    for lj, term in zip(lam, terms):
        if lj != 0.0:
            total = total + float(lj) * term
    return LagrangeTerms(L_d, L_b, total, terms)


def lambda_hat(grad_d, grad_b) -> float:
    """max |grad L_d| / mean |grad L_b,j| over the parameters."""
    grad_d, grad_b = np.asarray(grad_d), np.asarray(grad_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.max(np.abs(grad_d)) / np.mean(np.abs(grad_b)))


def lambda_update(lam: float, lam_hat: float, alpha: float) -> float:
    """Exponential moving update of one boundary multiplier."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError("alpha must lie in [0, 1]")
    if not math.isfinite(lam_hat):
        raise NumericalFailure(f"multiplier estimate is {lam_hat}; keep the previous value")
    return alpha * lam + (1.0 - alpha) * lam_hat
