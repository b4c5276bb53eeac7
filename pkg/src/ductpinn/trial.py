"""Trial fields that meet Dirichlet data at both duct ends for any network.

    p_t(x) = phi2(x) p1 + phi1(x) p2 + phi1(x) phi2(x) p_net(x)

with the linear blending pair phi1 = (x - x1)/L, phi2 = (x2 - x)/L.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .autodiff import Jet2
from .errors import ConfigurationError
from .network import NetworkParams, flatten, jet_outputs


@dataclass(frozen=True)
class DuctGeometry:
    x1: float = 0.0
    x2: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.x1) and np.isfinite(self.x2)):
            raise ConfigurationError("duct end positions must be finite")
        if not self.x2 > self.x1:
            raise ConfigurationError(f"degenerate duct: x2={self.x2} must exceed x1={self.x1}")

    @property
    def length(self) -> float:
        return self.x2 - self.x1


@dataclass(frozen=True)
class BoundaryConditions:
    p1: complex = 1.0
    p2: complex = -1.0

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = complex(getattr(self, name))
            if not cmath.isfinite(v):
                raise ConfigurationError(f"boundary value {name} must be finite")

    @property
    def is_real(self) -> bool:
        return complex(self.p1).imag == 0.0 and complex(self.p2).imag == 0.0

    def part(self, index: int) -> tuple[float, float]:
        """Boundary values of the real (0) or imaginary (1) part."""
        p1, p2 = complex(self.p1), complex(self.p2)
        if index == 0:
            return p1.real, p2.real
        return p1.imag, p2.imag


def phi_pair(geometry: DuctGeometry, x):
    L = geometry.length
    return (x - geometry.x1) / L, (geometry.x2 - x) / L


def blend(geometry: DuctGeometry, p1: float, p2: float, net: Jet2, x) -> Jet2:
    """Trial jet for one real part given the network jet at the same points."""
    L = geometry.length
    phi1, phi2 = phi_pair(geometry, x)
    ones = np.ones_like(x) if np.ndim(x) else 1.0
    # boundary interpolant: linear, so d2 vanishes identically
    base = Jet2(phi2 * p1 + phi1 * p2, (p2 - p1) / L * ones, 0.0 * ones)
    bubble = Jet2(phi1, ones / L, 0.0 * ones) * Jet2(phi2, -ones / L, 0.0 * ones)
    return base + bubble * net


def trial_parts(geometry: DuctGeometry, bc: BoundaryConditions, net_jets, x) -> list[Jet2]:
    """Wrap each network output jet with the boundary data of its part."""
    return [blend(geometry, *bc.part(i), jet, x) for i, jet in enumerate(net_jets)]


@dataclass
class TrialField:
    net: NetworkParams
    geometry: DuctGeometry
    bc: BoundaryConditions

    def __post_init__(self):
        if self.net.arch.outputs == 1 and not self.bc.is_real:
            raise ConfigurationError("complex boundary values need a two-output network")

    @property
    def parts(self) -> str:
        return "real" if self.net.arch.outputs == 1 else "complex"

    def jets(self, x) -> list[Jet2]:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        jets = trial_parts(self.geometry, self.bc, jet_outputs(self.net.arch, flatten(self.net), xs), xs)
        if np.ndim(x) == 0:
            return [Jet2(float(j.value[0]), float(j.d1[0]), float(j.d2[0])) for j in jets]
        return jets

    def pressure(self, x) -> np.ndarray:
        """Complex field values (imaginary part zero for one-part fields)."""
        jets = self.jets(np.atleast_1d(np.asarray(x, dtype=float)))
        out = np.asarray(jets[0].value, dtype=complex)
        if len(jets) == 2:
            out = out + 1j * jets[1].value
        return out

    def gradient(self, x) -> np.ndarray:
        jets = self.jets(np.atleast_1d(np.asarray(x, dtype=float)))
        out = np.asarray(jets[0].d1, dtype=complex)
        if len(jets) == 2:
            out = out + 1j * jets[1].d1
        return out


def eval_trial(field: TrialField, x) -> list[Jet2]:
    """Per-part trial jets at ``x`` (scalar or array)."""
    return field.jets(x)
