"""Second-order forward jets in x and a small reverse-mode tape over arrays.

Residuals need the field and its first two x-derivatives, which ``Jet2``
carries through ordinary arithmetic.  Training additionally needs the exact
gradient of a scalar loss with respect to every network parameter; ``Var``
records array operations and replays them backwards.  A ``Jet2`` whose
components are ``Var`` objects therefore gives both at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import ConfigurationError, NumericalFailure


# ---------------------------------------------------------------------------
# Activations: f, f', f'', f''' (the third derivative is needed when
# back-propagating through the second-derivative jet component).
# ---------------------------------------------------------------------------

def _tanh_derivs(z):
    t = np.tanh(z)
    s = 1.0 - t * t
    return t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)


def _sin_derivs(z):
    s, c = np.sin(z), np.cos(z)
    return s, c, -s, -c


def _cos_derivs(z):
    s, c = np.sin(z), np.cos(z)
    return c, -s, -c, s


def _identity_derivs(z):
    z = np.asarray(z, dtype=float)
    return z, np.ones_like(z), np.zeros_like(z), np.zeros_like(z)


ACTIVATIONS: dict[str, Callable] = {
    "sin": _sin_derivs,
    "cos": _cos_derivs,
    "tanh": _tanh_derivs,
    "identity": _identity_derivs,
}


def activation_derivatives(name: str, z):
    """Return ``(f, f', f'', f''')`` of activation ``name`` evaluated at ``z``."""
    try:
        fn = ACTIVATIONS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}"
        ) from None
    out = fn(z)
    if np.isscalar(z) or np.ndim(z) == 0:
        return tuple(float(v) for v in out)
    return out


# ---------------------------------------------------------------------------
# Jet2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Jet2:
    """A value together with its first and second derivative in x.

    Components may be floats, numpy arrays (one entry per collocation
    point) or ``Var`` nodes; arithmetic only relies on ``+``, ``-`` and ``*``.
    """

    value: Any
    d1: Any = 0.0
    d2: Any = 0.0

    @classmethod
    def constant(cls, c) -> "Jet2":
        zero = 0.0 * np.asarray(c, dtype=float) if np.ndim(c) else 0.0
        return cls(c, zero, zero)

    @classmethod
    def identity(cls, x) -> "Jet2":
        if np.ndim(x):
            x = np.asarray(x, dtype=float)
            return cls(x, np.ones_like(x), np.zeros_like(x))
        return cls(x, 1.0, 0.0)

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value + other, self.d1, self.d2)
        return Jet2(self.value + other.value, self.d1 + other.d1, self.d2 + other.d2)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.value, -self.d1, -self.d2)

    def __sub__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value - other, self.d1, self.d2)
        return Jet2(self.value - other.value, self.d1 - other.d1, self.d2 - other.d2)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value * other, self.d1 * other, self.d2 * other)
        a, b = self, other
        return Jet2(
            a.value * b.value,
            a.d1 * b.value + a.value * b.d1,
            a.d2 * b.value + 2.0 * (a.d1 * b.d1) + a.value * b.d2,
        )

    def __rmul__(self, other):
        # scalar * jet; jet * jet always dispatches to __mul__
        return Jet2(other * self.value, other * self.d1, other * self.d2)


def jet_compose(a: Jet2, b: Jet2, op: str) -> Jet2:
    """Combine two jets with ``op`` in {"add", "sub", "mul"}."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ConfigurationError(f"unsupported jet operation {op!r}")


def jet_activation(a: Jet2, name: str) -> Jet2:
    """Apply an activation to a jet using the chain rule up to order two."""
    f, f1, f2, _ = activation_derivatives(name, a.value)
    return Jet2(f, f1 * a.d1, f2 * a.d1 * a.d1 + f1 * a.d2)


# ---------------------------------------------------------------------------
# Reverse-mode tape
# ---------------------------------------------------------------------------

def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Var:
    """Array-valued node on a reverse-mode tape.

    ``parents`` is a tuple of ``(node, vjp)`` pairs where ``vjp`` maps the
    cotangent of this node to the cotangent contribution of ``node``.
    """

    __slots__ = ("value", "parents", "grad")
    __array_ufunc__ = None  # ndarray (op) Var defers to the Var reflected method

    def __init__(self, value, parents=()):
        self.value = np.asarray(value, dtype=float)
        self.parents = parents
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var({self.value!r})"

    # arithmetic -----------------------------------------------------------
    # Plain numbers and arrays are treated as constants and get no tape entry.
    def __add__(self, other):
        a = self.shape
        if not isinstance(other, Var):
            return Var(self.value + other, ((self, lambda g: _unbroadcast(g, a)),))
        b = other.shape
        return Var(
            self.value + other.value,
            ((self, lambda g: _unbroadcast(g, a)), (other, lambda g: _unbroadcast(g, b))),
        )

    __radd__ = __add__

    def __neg__(self):
        return Var(-self.value, ((self, lambda g: -g),))

    def __sub__(self, other):
        if not isinstance(other, Var):
            return self + (-np.asarray(other, dtype=float))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, av = self.shape, self.value
        if not isinstance(other, Var):
            c = np.asarray(other, dtype=float)
            return Var(av * c, ((self, lambda g: _unbroadcast(g * c, a)),))
        b, bv = other.shape, other.value
        return Var(
            av * bv,
            ((self, lambda g: _unbroadcast(g * bv, a)), (other, lambda g: _unbroadcast(g * av, b))),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise TypeError("division by a Var is not supported")
        return self * (1.0 / np.asarray(other, dtype=float))

    def __getitem__(self, idx):
        shape = self.shape

        def vjp(g):
            out = np.zeros(shape)
            np.add.at(out, idx, g)
            return out

        return Var(self.value[idx], ((self, vjp),))

    def sum(self):
        shape = self.shape
        return Var(self.value.sum(), ((self, lambda g: np.broadcast_to(g, shape).copy()),))

    def mean(self):
        return self.sum() * (1.0 / self.value.size)

    def square(self):
        v = self.value
        return Var(v * v, ((self, lambda g: 2.0 * g * v),))

    # reverse sweep --------------------------------------------------------
    def backward(self):
        """Accumulate d(self)/d(node) into ``node.grad`` for every ancestor."""
        if self.value.size != 1:
            raise ValueError("backward() requires a scalar output")
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent, _ in node.parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node.grad is None:
                continue
            for parent, vjp in node.parents:
                contrib = vjp(node.grad)
                parent.grad = contrib if parent.grad is None else parent.grad + contrib


def value_of(x):
    """Strip the tape from a ``Var`` (or pass plain numbers through)."""
    return x.value if isinstance(x, Var) else x


# ---------------------------------------------------------------------------
# Parameter gradients
# ---------------------------------------------------------------------------

def loss_gradient(loss: Callable[[Var], Var], theta) -> tuple[float, np.ndarray]:
    """Evaluate ``loss`` at the flat parameter vector ``theta`` and its gradient.

    ``loss`` receives ``theta`` wrapped as a ``Var`` and must return a scalar
    ``Var`` (or a plain number when it does not depend on ``theta``).
    """
    theta = np.asarray(theta, dtype=float)
    node = Var(theta.copy())
    out = loss(node)
    if not isinstance(out, Var):
        out = Var(out)
    value = float(out.value)
    if not math.isfinite(value):
        bad = np.flatnonzero(~np.isfinite(theta))
        index = int(bad[0]) if bad.size else None
        raise NumericalFailure(f"loss evaluated to {value}", index=index)
    out.backward()
    grad = node.grad if node.grad is not None else np.zeros_like(theta)
    return value, np.asarray(grad, dtype=float).reshape(theta.shape)


def fd_check(loss: Callable[[Var], Var], theta, h: float = 1e-6) -> float:
    """Largest ``|analytic - central difference| / (|analytic| + h)`` over parameters."""
    if h <= 0:
        raise ConfigurationError("finite-difference step must be positive")
    theta = np.asarray(theta, dtype=float)
    _, grad = loss_gradient(loss, theta)
    worst = 0.0
    for i in range(theta.size):
        plus, minus = theta.copy(), theta.copy()
        plus.flat[i] += h
        minus.flat[i] -= h
        fd = (float(value_of(loss(Var(plus)))) - float(value_of(loss(Var(minus))))) / (2.0 * h)
        worst = max(worst, abs(grad.flat[i] - fd) / (abs(grad.flat[i]) + h))
    return worst
