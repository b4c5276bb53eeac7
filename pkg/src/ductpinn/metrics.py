"""Relative-error metric and gradient-distribution diagnostics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError, NumericalFailure
from .network import Architecture
from .trial import DuctGeometry

DEFAULT_TEST_POINTS = 500


def evaluation_grid(geometry: DuctGeometry, n_t: int = DEFAULT_TEST_POINTS) -> np.ndarray:
    """``n_t`` linearly spaced points covering [x1, x2], both ends included."""
    if n_t < 2:
        raise ConfigurationError("at least two test points are required")
    return np.linspace(geometry.x1, geometry.x2, n_t)


def relative_error_values(predicted, truth) -> float:
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    den = np.sqrt(np.sum(np.abs(truth) ** 2))
    if den == 0.0:
        raise NumericalFailure("relative error undefined: reference field vanishes on the grid")
    return float(np.sqrt(np.sum(np.abs(predicted - truth) ** 2)) / den)


def relative_error(predicted, truth, geometry: DuctGeometry, n_t: int = DEFAULT_TEST_POINTS) -> float:
    """Root-sum-square error of ``predicted`` against ``truth`` on the test grid.

    Both arguments are callables mapping an array of positions to field
    values (real or complex).
    """
    x = evaluation_grid(geometry, n_t)
    return relative_error_values(predicted(x), truth(x))


@dataclass
class ErrorReport:
    n_t: int
    x1: float
    x2: float
    delta: float
    delta_real: float | None = None
    delta_imag: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def error_report(predicted, truth, geometry: DuctGeometry, n_t: int = DEFAULT_TEST_POINTS,
                 split_parts: bool = False) -> ErrorReport:
    """Overall error plus, for complex fields, separate real/imaginary errors.

    A part whose reference vanishes on the grid reports ``None``.
    """
    x = evaluation_grid(geometry, n_t)
    pv, tv = np.asarray(predicted(x)), np.asarray(truth(x))
    report = ErrorReport(n_t, geometry.x1, geometry.x2, relative_error_values(pv, tv))
    if split_parts:
        for name, part in (("delta_real", np.real), ("delta_imag", np.imag)):
            try:
                setattr(report, name, relative_error_values(part(pv), part(tv)))
            except NumericalFailure:
                setattr(report, name, None)
    return report


@dataclass
class GradHistogram:
    edges: np.ndarray
    counts: np.ndarray
    fraction_small: float
    threshold: float
    size: int

    def as_rows(self):
        return [(float(lo), float(hi), int(c))
                for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts)]


def symmetric_log_edges(lo_exp: int = -12, hi_exp: int = 2, per_decade: int = 2) -> np.ndarray:
    """Bin edges -10^hi ... -10^lo, 10^lo ... 10^hi; (-10^lo, 10^lo) is the zero bin."""
    pos = np.logspace(lo_exp, hi_exp, (hi_exp - lo_exp) * per_decade + 1)
    return np.concatenate([-pos[::-1], pos])


def histogram_of(values, threshold: float = 1e-6, edges=None) -> GradHistogram:
    values = np.asarray(values, dtype=float).ravel()
    edges = symmetric_log_edges() if edges is None else np.asarray(edges)
    clipped = np.clip(values, edges[0], edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    frac = float(np.mean(np.abs(values) < threshold)) if values.size else 0.0
    return GradHistogram(edges, counts, frac, threshold, int(values.size))


def gradient_histogram(gradients: dict, arch: Architecture, layer: int = -2,
                       threshold: float = 1e-6, edges=None) -> dict:
    """Histogram each loss term's gradient restricted to one layer's parameters.

    ``layer`` indexes the weight layers (output layer = -1), so the default
    -2 selects the last hidden layer.
    """
    sl = arch.layer_slice(layer)
    out = {}
    for name, grad in gradients.items():
        grad = np.asarray(grad, dtype=float)
        if grad.size != arch.param_count:
            raise ConfigurationError(f"gradient {name!r} does not match the architecture")
        out[name] = histogram_of(grad[sl], threshold, edges)
    return out
