"""Fully connected approximator p(x; theta) with one input and 1 or 2 outputs.

Parameters live in a single flat float64 vector, layer by layer, each layer
stored as its weight matrix (row-major, shape ``(fan_out, fan_in)``)
followed by its bias.  Hidden layers use the configured activation; the
output layer is always affine.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Jet2, Var, activation_derivatives
from .errors import (
    ConfigurationError,
    IncompatibleVersionError,
    NumericalFailure,
    ParamFileError,
)

FORMAT_VERSION = 1
_MAGIC = b"DPNN"
HIDDEN_ACTIVATIONS = ("sin", "cos", "tanh")


@dataclass(frozen=True)
class Architecture:
    widths: tuple[int, ...]
    activation: str = "sin"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 2:
            raise ConfigurationError("an architecture needs at least input and output widths")
        if any(w <= 0 for w in widths):
            raise ConfigurationError(f"zero-width layer in {widths}")
        if widths[0] != 1:
            raise ConfigurationError("the network takes a single spatial input")
        if widths[-1] not in (1, 2):
            raise ConfigurationError("output width must be 1 (real) or 2 (real, imaginary)")
        if self.activation not in HIDDEN_ACTIVATIONS:
            raise ConfigurationError(
                f"activation must be one of {HIDDEN_ACTIVATIONS}, got {self.activation!r}"
            )

    @classmethod
    def mlp(cls, hidden_layers: int, width: int, outputs: int = 1, activation: str = "sin"):
        return cls((1, *([width] * hidden_layers), outputs), activation)

    @property
    def outputs(self) -> int:
        return self.widths[-1]

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        return [(o, i) for i, o in zip(self.widths[:-1], self.widths[1:])]

    @property
    def param_count(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes)

    def layer_slice(self, q: int) -> slice:
        """Flat-vector slice holding (W, b) of layer ``q`` (0-based, output layer last)."""
        shapes = self.layer_shapes
        if not -len(shapes) <= q < len(shapes):
            raise ConfigurationError(f"layer {q} out of range for {len(shapes)} layers")
        q %= len(shapes)
        start = sum(o * i + o for o, i in shapes[:q])
        o, i = shapes[q]
        return slice(start, start + o * i + o)


@dataclass
class NetworkParams:
    arch: Architecture
    layers: list[tuple[np.ndarray, np.ndarray]]
    seed: int | None = None

    def flatten(self) -> np.ndarray:
        return flatten(self)

    @property
    def widths(self):
        return self.arch.widths

    @property
    def activation(self):
        return self.arch.activation


def flatten(params: NetworkParams) -> np.ndarray:
    parts = []
    for W, b in params.layers:
        parts.append(np.asarray(W, dtype=float).ravel())
        parts.append(np.asarray(b, dtype=float).ravel())
    return np.concatenate(parts)


def unflatten(vector, arch: Architecture, seed: int | None = None) -> NetworkParams:
    vector = np.asarray(vector, dtype=float)
    if vector.ndim != 1 or vector.size != arch.param_count:
        raise ConfigurationError(
            f"parameter vector has {vector.size} entries, architecture needs {arch.param_count}"
        )
    return NetworkParams(arch, [(W.copy(), b.copy()) for W, b in _views(arch, vector)], seed)


def _views(arch: Architecture, flat: np.ndarray):
    pos = 0
    for o, i in arch.layer_shapes:
        W = flat[pos:pos + o * i].reshape(o, i)
        pos += o * i
        b = flat[pos:pos + o]
        pos += o
        yield W, b


def init_params(arch: Architecture, seed: int = 0) -> NetworkParams:
    """Scaled-uniform weights, U(-s, s) with s = sqrt(6 / (fan_in + fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for o, i in arch.layer_shapes:
        s = np.sqrt(6.0 / (i + o))
        layers.append((rng.uniform(-s, s, size=(o, i)), np.zeros(o)))
    return NetworkParams(arch, layers, seed)


# ---------------------------------------------------------------------------
# Batched jet forward / reverse pass
# ---------------------------------------------------------------------------

def forward_batch(arch: Architecture, flat, x, keep_cache: bool = False):
    """Evaluate the network and its first two x-derivatives at every point of ``x``.

    Returns an array of shape ``(3, N, outputs)`` holding value, d/dx and
    d2/dx2, plus the cache required by :func:`backward_batch`.
    """
    flat = np.asarray(flat, dtype=float)
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    h, h1, h2 = x, np.ones_like(x), np.zeros_like(x)
    cache = []
    layers = list(_views(arch, flat))
    for W, b in layers[:-1]:
        a = h @ W.T + b
        a1 = h1 @ W.T
        a2 = h2 @ W.T
        f, f1, f2, f3 = activation_derivatives(arch.activation, a)
        if keep_cache:
            cache.append((h, h1, h2, a1, a2, f1, f2, f3))
        h, h1, h2 = f, f1 * a1, f2 * a1 * a1 + f1 * a2
    W, b = layers[-1]
    out = np.stack([h @ W.T + b, h1 @ W.T, h2 @ W.T])
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("non-finite network output")
    if keep_cache:
        cache.append((h, h1, h2))
    return out, cache


def backward_batch(arch: Architecture, flat, cache, g) -> np.ndarray:
    """Pull the cotangent ``g`` (shape ``(3, N, outputs)``) back to the flat parameters."""
    flat = np.asarray(flat, dtype=float)
    layers = list(_views(arch, flat))
    grads = []
    gv, g1, g2 = g[0], g[1], g[2]
    h, h1, h2 = cache[-1]
    W, _ = layers[-1]
    grads.append((gv.T @ h + g1.T @ h1 + g2.T @ h2, gv.sum(axis=0)))
    gh, gh1, gh2 = gv @ W, g1 @ W, g2 @ W
    for q in range(len(layers) - 2, -1, -1):
        W, _ = layers[q]
        h, h1, h2, a1, a2, f1, f2, f3 = cache[q]
        ga2 = gh2 * f1
        ga1 = gh1 * f1 + 2.0 * gh2 * f2 * a1
        ga = gh * f1 + gh1 * f2 * a1 + gh2 * (f3 * a1 * a1 + f2 * a2)
        grads.append((ga.T @ h + ga1.T @ h1 + ga2.T @ h2, ga.sum(axis=0)))
        if q:
            gh, gh1, gh2 = ga @ W, ga1 @ W, ga2 @ W
    grads.reverse()
    return np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])


def jet_outputs(arch: Architecture, theta, x) -> list[Jet2]:
    """Network output jets at points ``x``, one ``Jet2`` per output neuron.

    When ``theta`` is a ``Var`` the jet components are ``Var`` nodes wired
    to it, so losses built from them can be differentiated with respect to
    the parameters.
    """
    if isinstance(theta, Var):
        flat = theta.value
        out, cache = forward_batch(arch, flat, x, keep_cache=True)
        packed = Var(out, ((theta, lambda g: backward_batch(arch, flat, cache, g)),))
    else:
        packed, _ = forward_batch(arch, theta, x)
    return [Jet2(packed[0, :, o], packed[1, :, o], packed[2, :, o]) for o in range(arch.outputs)]


def forward_jet(params: NetworkParams, x: float) -> list[Jet2]:
    """Value and x-derivatives of every output at a single point."""
    if not np.isfinite(x):
        raise NumericalFailure(f"non-finite input x={x}")
    out, _ = forward_batch(params.arch, flatten(params), np.array([x], dtype=float))
    return [Jet2(float(out[0, 0, o]), float(out[1, 0, o]), float(out[2, 0, o]))
            for o in range(params.arch.outputs)]


def evaluate(arch: Architecture, flat, x) -> np.ndarray:
    """Plain network values, shape ``(N, outputs)``."""
    return forward_batch(arch, flat, x)[0][0]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------
# Layout: b"DPNN" | uint32 LE header length | UTF-8 JSON header |
#         float64 LE parameters (``count`` of them, flat order above).

def save_params(params: NetworkParams, path) -> None:
    flat = flatten(params)
    header = json.dumps({
        "format_version": FORMAT_VERSION,
        "widths": list(params.arch.widths),
        "activation": params.arch.activation,
        "seed": params.seed,
        "count": int(flat.size),
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(flat.astype("<f8").tobytes())


def load_params(path) -> NetworkParams:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ParamFileError("not a parameter file (bad magic)", field="magic")
    if len(data) < 8:
        raise ParamFileError("truncated header length", field="header_length")
    (n,) = struct.unpack("<I", data[4:8])
    raw = data[8:8 + n]
    if len(raw) != n:
        raise ParamFileError("truncated header", field="header")
    try:
        header = json.loads(raw.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParamFileError(f"unreadable header: {exc}", field="header") from None
    for key in ("format_version", "widths", "activation", "seed", "count"):
        if key not in header:
            raise ParamFileError(f"header is missing {key!r}", field=key)
    if header["format_version"] != FORMAT_VERSION:
        raise IncompatibleVersionError(
            f"file format version {header['format_version']} is not supported "
            f"(expected {FORMAT_VERSION})", field="format_version")
    try:
        arch = Architecture(tuple(header["widths"]), header["activation"])
    except ConfigurationError as exc:
        raise ParamFileError(str(exc), field="widths") from None
    count = header["count"]
    if count != arch.param_count:
        raise ParamFileError(
            f"count {count} does not match architecture ({arch.param_count})", field="count")
    body = data[8 + n:]
    if len(body) != 8 * count:
        raise ParamFileError(
            f"expected {8 * count} parameter bytes, found {len(body)}", field="parameters")
    flat = np.frombuffer(body, dtype="<f8").astype(float)
    return unflatten(flat, arch, header["seed"])
