"""Limited-memory BFGS with a strong-Wolfe line search."""
from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalFailure

TERMINATION_REASONS = ("tolerance", "max-iterations", "line-search-failure")


@dataclass(frozen=True)
class HistoryRow:
    iteration: int
    loss: float
    parts: tuple
    grad_inf: float


@dataclass
class TrainReport:
    """Loss history and outcome of one minimisation run.

    Row 0 of ``history`` is the starting point; row i the state after the
    i-th accepted step.
    """

    history: list[HistoryRow] = field(default_factory=list)
    theta: np.ndarray | None = None
    reason: str = "max-iterations"
    wall_time: float = 0.0
    evaluations: int = 0
    part_names: tuple = ("R", "I")

    @property
    def final_loss(self) -> float:
        return self.history[-1].loss

    @property
    def final_grad_inf(self) -> float:
        return self.history[-1].grad_inf

    @property
    def iterations(self) -> int:
        return self.history[-1].iteration

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "initial_loss": self.history[0].loss,
            "final_loss": self.final_loss,
            "final_parts": dict(zip(self.part_names, self.history[-1].parts)),
            "final_grad_inf_norm": self.final_grad_inf,
            "termination": self.reason,
            "wall_time_s": self.wall_time,
        }


def _cubic_minimizer(a, fa, ga, b, fb, gb, lo, hi):
    """Minimiser of the cubic through two points with slopes, clamped to [lo, hi]."""
    if lo > hi:
        lo, hi = hi, lo
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc >= 0.0:
        d2 = math.copysign(math.sqrt(disc), b - a)
        den = gb - ga + 2.0 * d2
        if den != 0.0:
            t = b - (b - a) * (gb + d2 - d1) / den
            if math.isfinite(t):
                return min(max(t, lo), hi)
    return 0.5 * (lo + hi)


def strong_wolfe(phi, f0, d0, alpha, c1=1e-4, c2=0.9, max_evals=25, xtol=1e-14):
    """Bracketing + zoom search along a descent direction.

    ``phi(alpha)`` returns ``(f, slope)`` and may cache whatever else the
    caller needs.  Returns ``(alpha, wolfe)``: the accepted step (``None``
    when no point decreased the function) and whether the curvature
    condition also holds.
    """
    a_prev, f_prev, d_prev = 0.0, f0, d0
    evals = 0
    bracket = None
    while evals < max_evals:
        f, d = phi(alpha)
        evals += 1
        if not math.isfinite(f) or f > f0 + c1 * alpha * d0 or (evals > 1 and f >= f_prev):
            bracket = (a_prev, f_prev, d_prev, alpha, f, d)
            break
        if abs(d) <= -c2 * d0:
            return alpha, True
        if d >= 0.0:
            bracket = (alpha, f, d, a_prev, f_prev, d_prev)
            break
        a_next = _cubic_minimizer(a_prev, f_prev, d_prev, alpha, f, d,
                                  alpha + 0.01 * (alpha - a_prev), 10.0 * alpha)
        a_prev, f_prev, d_prev = alpha, f, d
        alpha = a_next
    if bracket is None:
        return (a_prev if a_prev > 0.0 else None), False

    lo, flo, dlo, hi, fhi, dhi = bracket
    while evals < max_evals and abs(hi - lo) > xtol * max(1.0, abs(lo)):
        width = hi - lo
        if math.isfinite(fhi) and math.isfinite(dhi):
            a = _cubic_minimizer(lo, flo, dlo, hi, fhi, dhi,
                                 lo + 0.1 * width, hi - 0.1 * width)
        else:
            a = lo + 0.5 * width
        f, d = phi(a)
        evals += 1
        if not math.isfinite(f) or f > f0 + c1 * a * d0 or f >= flo:
            hi, fhi, dhi = a, f, d
        else:
            if abs(d) <= -c2 * d0:
                return a, True
            if d * (hi - lo) >= 0.0:
                hi, fhi, dhi = lo, flo, dlo
            lo, flo, dlo = a, f, d
    return (lo if lo > 0.0 else None), False


def _two_loop(g, memory):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(memory):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = memory[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(memory, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _split(result):
    if len(result) == 3:
        return float(result[0]), np.asarray(result[1], dtype=float), tuple(result[2])
    return float(result[0]), np.asarray(result[1], dtype=float), ()


def lbfgs_minimize(fun, theta0, max_iter: int = 14000, tolerance: float = 1e-3,
                   history_size: int = 20, c1: float = 1e-4, c2: float = 0.9,
                   max_line_search: int = 25, part_names=("R", "I"), config=None):
    """Minimise ``fun`` from ``theta0``.

    ``fun(theta)`` returns ``(loss, grad)`` or ``(loss, grad, parts)`` where
    ``parts`` are per-term losses recorded in the history.  ``config`` (a
    ``TrainingConfig``) overrides the iteration budget, tolerance and memory.
    Terminates when the gradient infinity-norm drops to ``tolerance``, when
    ``max_iter`` steps are taken, or when no decreasing step can be found.
    """
    if config is not None:
        max_iter, tolerance, history_size = config.iterations, config.tolerance, config.history_size
    if max_iter < 1 or history_size < 1:
        raise ConfigurationError("iterations and history size must be at least 1")
    start = time.perf_counter()
    theta = np.array(theta0, dtype=float)
    if not np.all(np.isfinite(theta)):
        bad = int(np.flatnonzero(~np.isfinite(theta))[0])
        raise NumericalFailure("non-finite starting parameters", index=bad)
    f, g, parts = _split(fun(theta))
    if not (math.isfinite(f) and np.all(np.isfinite(g))):
        raise NumericalFailure(f"non-finite loss {f} at the starting point")
    report = TrainReport(part_names=tuple(part_names), evaluations=1)
    report.history.append(HistoryRow(0, f, parts, float(np.max(np.abs(g)))))
    memory: deque = deque(maxlen=history_size)
    reason = "max-iterations"

    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) <= tolerance:
            reason = "tolerance"
            break
        accepted = None
        for restart in (False, True):
            if memory and not restart:
                d = _two_loop(g, memory)
                alpha0 = 1.0
            else:
                memory.clear()
                d = -g
                alpha0 = min(1.0, 1.0 / float(np.sum(np.abs(g))))
            d0 = float(g @ d)
            if not d0 < 0.0:
                continue
            cache = {}

            def phi(a, d=d, cache=cache):
                try:
                    fa, ga, pa = _split(fun(theta + a * d))
                except NumericalFailure:
                    return math.inf, math.nan
                report.evaluations += 1
                cache[a] = (fa, ga, pa)
                return fa, float(ga @ d) if math.isfinite(fa) else math.nan

            alpha, _ = strong_wolfe(phi, f, d0, alpha0, c1, c2, max_line_search)
            if alpha is not None and cache[alpha][0] < f:
                accepted = (alpha, d, cache[alpha])
                break
            if not memory:
                break
        if accepted is None:
            reason = "line-search-failure"
            break
        alpha, d, (f_new, g_new, parts) = accepted
        s = alpha * d
        y = g_new - g
        ys = float(y @ s)
        if ys > 1e-10 * float(y @ y):
            memory.append((s, y, 1.0 / ys))
        theta = theta + s
        f, g = f_new, g_new
        report.history.append(HistoryRow(it, f, parts, float(np.max(np.abs(g)))))
    else:
        if np.max(np.abs(g)) <= tolerance:
            reason = "tolerance"

    report.theta = theta
    report.reason = reason
    report.wall_time = time.perf_counter() - start
    return theta, report
