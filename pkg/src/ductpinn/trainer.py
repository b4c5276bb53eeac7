"""Collocation sampling, pressure training, velocity transfer and the
multiplier-penalty baseline."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .autodiff import loss_gradient, value_of
from .errors import ConfigurationError, NumericalFailure
from .network import Architecture, NetworkParams, flatten, init_params, jet_outputs, unflatten
from .optim import HistoryRow, TrainReport, lbfgs_minimize
from .oracle import warn_if_near_resonance
from .physics import DuctProblem, lagrange_loss, lambda_hat, lambda_update, momentum, pressure_residuals
from .trial import DuctGeometry, TrialField, trial_parts

SAMPLING_MODES = ("equispaced", "uniform-random")


@dataclass(frozen=True)
class TrainingConfig:
    """Network and optimiser settings.  Defaults are the full-scale values."""

    N_d: int = 14000
    N_b: int = 2
    iterations: int = 14000
    tolerance: float = 1e-3
    history_size: int = 20
    seed: int = 0
    sampling: str = "equispaced"
    activation: str = "sin"
    hidden_layers: int = 6
    width: int = 90

    def __post_init__(self):
        if self.N_d < 2:
            raise ConfigurationError("N_d must be at least 2")
        if self.N_b != 2:
            raise ConfigurationError("a 1-D duct has exactly two boundary points")
        if self.iterations < 1 or self.history_size < 1:
            raise ConfigurationError("iterations and history size must be at least 1")
        if not (math.isfinite(self.tolerance) and self.tolerance >= 0):
            raise ConfigurationError("tolerance must be a non-negative number")
        if self.sampling not in SAMPLING_MODES:
            raise ConfigurationError(f"sampling must be one of {SAMPLING_MODES}")
        if self.hidden_layers < 1 or self.width < 1:
            raise ConfigurationError("the network needs at least one hidden neuron")

    @classmethod
    def desk(cls, **overrides) -> "TrainingConfig":
        """Reduced scale: 5 hidden layers of 64, 2000 points, 3000 iterations."""
        base = dict(N_d=2000, iterations=3000, hidden_layers=5, width=64)
        base.update(overrides)
        return cls(**base)

    def architecture(self, outputs: int) -> Architecture:
        return Architecture.mlp(self.hidden_layers, self.width, outputs, self.activation)

    def with_overrides(self, **overrides) -> "TrainingConfig":
        return replace(self, **overrides)

    def as_dict(self) -> dict:
        return asdict(self)


def sample_collocation(geometry: DuctGeometry, N: int, mode: str = "equispaced",
                       seed: int = 0) -> np.ndarray:
    """``N`` interior points, sorted; end points are never included."""
    if N < 2:
        raise ConfigurationError("at least two collocation points are required")
    if mode == "equispaced":
        return np.linspace(geometry.x1, geometry.x2, N + 2)[1:-1]
    if mode == "uniform-random":
        rng = np.random.default_rng(seed)
        pts = rng.uniform(geometry.x1, geometry.x2, N)
        # uniform() samples [x1, x2); redraw the measure-zero end hit
        while np.any(pts <= geometry.x1):
            bad = pts <= geometry.x1
            pts[bad] = rng.uniform(geometry.x1, geometry.x2, int(bad.sum()))
        return np.sort(pts)
    raise ConfigurationError(f"unknown sampling mode {mode!r}")


def _points(problem: DuctProblem, config: TrainingConfig) -> np.ndarray:
    return sample_collocation(problem.geometry, config.N_d, config.sampling, config.seed)


def _part_names(n: int) -> tuple:
    return ("R",) if n == 1 else ("R", "I")


# ---------------------------------------------------------------------------
# Pressure
# ---------------------------------------------------------------------------

def pressure_objective(problem: DuctProblem, arch: Architecture, x: np.ndarray):
    """``theta -> (loss, grad, per-part losses)`` for the trial-wrapped network."""
    if problem.kind == "narrow":
        problem.visco_thermal()  # computed once, reused from cache

    def fun(theta):
        parts = []

        def loss(node):
            trial = trial_parts(problem.geometry, problem.bc, jet_outputs(arch, node, x), x)
            total = None
            for r in pressure_residuals(problem, trial, x):
                term = r.square().mean()
                parts.append(float(term.value))
                total = term if total is None else total + term
            return total

        value, grad = loss_gradient(loss, theta)
        return value, grad, tuple(parts)

    return fun


def train_pressure(problem: DuctProblem, config: TrainingConfig, theta0=None):
    """Train the trial-wrapped pressure network; returns ``(TrialField, TrainReport)``."""
    warn_if_near_resonance(problem.geometry, problem.medium.c, problem.frequency)
    arch = config.architecture(problem.outputs)
    theta0 = flatten(init_params(arch, config.seed)) if theta0 is None else np.asarray(theta0, float)
    x = _points(problem, config)
    theta, report = lbfgs_minimize(pressure_objective(problem, arch, x), theta0, config=config,
                                   part_names=_part_names(problem.outputs))
    field = TrialField(unflatten(theta, arch, config.seed), problem.geometry, problem.bc)
    return field, report


# ---------------------------------------------------------------------------
# Velocity by transfer from a frozen pressure field
# ---------------------------------------------------------------------------

@dataclass
class VelocityField:
    """Unconstrained two-output network predicting rho c times the velocity."""

    net: NetworkParams
    rho_c: float

    def jets(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        s = 1.0 / self.rho_c
        return [s * j for j in jet_outputs(self.net.arch, flatten(self.net), xs)]

    def velocity(self, x) -> np.ndarray:
        uR, uI = self.jets(x)
        return np.asarray(uR.value) + 1j * np.asarray(uI.value)


def _velocity_mach(problem: DuctProblem) -> float:
    if problem.kind == "meanflow":
        return problem.mach
    if problem.kind == "uniform":
        return 0.0
    raise ConfigurationError("velocity transfer is defined for uniform and mean-flow ducts")


def velocity_objective(pressure: TrialField, problem: DuctProblem, arch: Architecture, x):
    """Momentum residual multiplied through by rho c, so the unknown is rho c u."""
    M, k = _velocity_mach(problem), problem.k
    dp = pressure.gradient(x)
    dpR, dpI = np.ascontiguousarray(dp.real), np.ascontiguousarray(dp.imag)

    def fun(theta):
        parts = []

        def loss(node):
            vR, vI = jet_outputs(arch, node, x)
            total = None
            for r in momentum(vR, vI, dpR, dpI, k, M, 1.0):
                term = r.square().mean()
                parts.append(float(term.value))
                total = term if total is None else total + term
            return total

        value, grad = loss_gradient(loss, theta)
        return value, grad, tuple(parts)

    return fun


def train_velocity_transfer(pressure: TrialField, problem: DuctProblem, config: TrainingConfig):
    """Fit a fresh velocity network against the frozen pressure field.

    Returns ``(VelocityField, TrainReport)``.  The pressure parameters are
    compared bitwise before and after; any change is an internal error.
    """
    _velocity_mach(problem)
    if pressure.geometry != problem.geometry or pressure.bc != problem.bc:
        raise ConfigurationError("pressure field was trained for a different duct")
    frozen = flatten(pressure.net).tobytes()
    arch = config.architecture(2)
    # distinct stream from the pressure initialisation
    theta0 = flatten(init_params(arch, config.seed + 1))
    x = _points(problem, config)
    theta, report = lbfgs_minimize(velocity_objective(pressure, problem, arch, x), theta0,
                                   config=config, part_names=("R", "I"))
    if flatten(pressure.net).tobytes() != frozen:
        raise NumericalFailure("pressure parameters changed during velocity training")
    return VelocityField(unflatten(theta, arch, config.seed + 1), problem.medium.impedance), report


# ---------------------------------------------------------------------------
# Multiplier-penalty baseline (no trial wrapping)
# ---------------------------------------------------------------------------

@dataclass
class LagrangeResult:
    arch: Architecture
    theta: np.ndarray
    report: TrainReport
    lambdas: list          # (iteration, lambda_1, lambda_2) at every update
    gradients: dict        # final per-term gradients: "L_d", "L_b"

    def pressure(self, x) -> np.ndarray:
        (p,) = jet_outputs(self.arch, self.theta, np.atleast_1d(np.asarray(x, float)))
        return np.asarray(p.value, dtype=complex)


def lagrange_gradients(theta, arch, problem, x) -> dict:
    """Gradients of L_d, L_b and each L_b,j at ``theta``."""
    out = {}
    out["L_d"] = loss_gradient(lambda t: lagrange_loss(t, arch, problem, (0.0, 0.0), x).L_d, theta)[1]
    out["L_b"] = loss_gradient(lambda t: lagrange_loss(t, arch, problem, (0.0, 0.0), x).L_b, theta)[1]
    for j in range(2):
        out[f"L_b{j + 1}"] = loss_gradient(
            lambda t, j=j: lagrange_loss(t, arch, problem, (0.0, 0.0), x).boundary_terms[j], theta)[1]
    return out


def train_lagrange(problem: DuctProblem, config: TrainingConfig, lam=(1.0, 1.0),
                   alpha: float | None = None, update_every: int = 100):
    """Minimise ``L_d + sum lambda_j L_b,j`` over a raw network.

    With ``alpha`` set, the multipliers follow the moving update every
    ``update_every`` iterations and the optimiser memory restarts after each
    update; otherwise ``lam`` stays fixed for one continuous run.
    """
    if problem.kind not in ("uniform", "webster"):
        raise ConfigurationError("the multiplier baseline is defined for real one-part problems")
    if update_every < 1:
        raise ConfigurationError("update_every must be at least 1")
    arch = config.architecture(1)
    x = _points(problem, config)
    theta = flatten(init_params(arch, config.seed))
    lam = [float(v) for v in lam]
    lambdas = [(0, *lam)]

    def objective(lam_now):
        def fun(t):
            store = {}

            def loss(node):
                terms = lagrange_loss(node, arch, problem, lam_now, x)
                store["parts"] = (float(value_of(terms.L_d)), float(value_of(terms.L_b)))
                return terms.total

            value, grad = loss_gradient(loss, t)
            return value, grad, store["parts"]
        return fun

    history: list[HistoryRow] = []
    evaluations, wall, done = 0, 0.0, 0
    reason = "max-iterations"
    while done < config.iterations:
        chunk = config.iterations - done if alpha is None else min(update_every, config.iterations - done)
        theta, rep = lbfgs_minimize(objective(tuple(lam)), theta, max_iter=chunk,
                                    tolerance=config.tolerance, history_size=config.history_size,
                                    part_names=("d", "b"))
        rows = rep.history if not history else rep.history[1:]
        history.extend(replace(r, iteration=r.iteration + done) for r in rows)
        evaluations += rep.evaluations
        wall += rep.wall_time
        done += rep.iterations
        reason = rep.reason
        if alpha is None or rep.reason != "max-iterations" or done >= config.iterations:
            break
        grads = lagrange_gradients(theta, arch, problem, x)
        for j in range(2):
            try:
                lam[j] = lambda_update(lam[j], lambda_hat(grads["L_d"], grads[f"L_b{j + 1}"]), alpha)
            except NumericalFailure:
                pass  # keep the previous multiplier
        lambdas.append((done, *lam))
    report = TrainReport(history, theta, reason, wall, evaluations, ("d", "b"))
    return LagrangeResult(arch, theta, report, lambdas, lagrange_gradients(theta, arch, problem, x))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

LOSS_COLUMNS = ("iter", "loss_total", "loss_R", "loss_I", "grad_inf_norm")


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_loss_history(report: TrainReport, path) -> None:
    """CSV of the loss history; floats are written as shortest round-trip decimals.

    Pressure and velocity runs use ``loss_R``/``loss_I`` (empty for one-part
    problems); the multiplier baseline writes ``loss_d``/``loss_b``.
    """
    names = report.part_names
    cols = ("loss_d", "loss_b") if names == ("d", "b") else ("loss_R", "loss_I")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iter", "loss_total", *cols, "grad_inf_norm"))
        for row in report.history:
            parts = list(row.parts) + [None] * (2 - len(row.parts))
            w.writerow((row.iteration, _fmt(row.loss), _fmt(parts[0]), _fmt(parts[1]),
                        _fmt(row.grad_inf)))
