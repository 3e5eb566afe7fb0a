"""SympNet models: layer compositions, initialization, checkpoints.

Layer ``0`` is applied first.  All trainable parameters of a model live in
one flat buffer (``model.buffer``); each layer's parameter arrays are views
into it, so optimizers update the buffer in place.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CapabilityError, ConfigurationError, DimensionError
from .layers import (GenRidgeLayer, HenonLayer, Layer, RidgeLayer, ShearLayer, layer_from_dict,
                     sym_size)
from .poly import MultiPoly

FORMAT_VERSION = 1
METHODS = ("P", "R", "GR", "G", "LA", "H")

_METHOD_KINDS = {
    "P": {"poly-ridge"},
    "R": {"net-ridge"},
    "GR": {"gen-ridge"},
    "G": {"G"},
    "LA": {"LA-linear", "LA-activation"},
    "H": {"henon"},
}


class SympNetModel:
    def __init__(self, dim_n: int, method: str, layers: list[Layer], hyper: dict | None = None,
                 metadata: dict | None = None):
        if method not in METHODS:
            raise ConfigurationError(f"unknown method {method!r}; choose from {METHODS}")
        for layer in layers:
            if layer.dim_n != dim_n:
                raise DimensionError(f"layer of dim_n={layer.dim_n} in model of dim_n={dim_n}")
            if layer.kind not in _METHOD_KINDS[method]:
                raise ConfigurationError(f"layer kind {layer.kind!r} not allowed in a {method} model")
        self.dim_n = int(dim_n)
        self.method = method
        self.layers = list(layers)
        self.hyper = dict(hyper or {})
        self.metadata = dict(metadata or {})
        self._bind()

    def _bind(self):
        """Move every parameter array into one contiguous buffer and rebind as views."""
        total = sum(layer.num_params for layer in self.layers)
        self.buffer = np.zeros(total)
        i = 0
        for layer in self.layers:
            for name, arr in layer.params.items():
                self.buffer[i:i + arr.size] = arr.ravel()
                layer.params[name] = self.buffer[i:i + arr.size].reshape(arr.shape)
                i += arr.size

    @property
    def num_params(self) -> int:
        return self.buffer.size

    def get_flat(self) -> np.ndarray:
        return self.buffer.copy()

    def set_flat(self, theta) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != self.buffer.shape:
            raise DimensionError(f"expected {self.buffer.size} parameters, got {theta.size}")
        self.buffer[:] = theta

    # maps -------------------------------------------------------------------

    def forward(self, x, h: float):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 2 * self.dim_n:
            raise DimensionError(f"model expects {2 * self.dim_n} coordinates, got {x.shape[-1]}")
        for layer in self.layers:
            x = layer.forward(x, h)
        return x

    __call__ = forward

    def inverse(self, y, h: float):
        y = np.asarray(y, dtype=float)
        for layer in reversed(self.layers):
            y = layer.inverse(y, h)
        return y

    def forward_trace(self, x, h: float) -> list[np.ndarray]:
        """Inputs of every layer followed by the final output."""
        xs = [np.asarray(x, dtype=float)]
        for layer in self.layers:
            xs.append(layer.forward(xs[-1], h))
        return xs

    def vjp(self, x, h: float, cotangent, trace=None):
        """Pull ``cotangent`` back through the whole model.

        Returns the input cotangent and the flat parameter gradient, laid out
        like ``buffer``.
        """
        xs = trace if trace is not None else self.forward_trace(x, h)
        c = np.atleast_2d(np.asarray(cotangent, dtype=float))
        grad = np.zeros_like(self.buffer)
        offsets = np.cumsum([0] + [layer.num_params for layer in self.layers])
        for idx in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[idx]
            c, g = layer.vjp(xs[idx], h, c)
            i = offsets[idx]
            for name, arr in layer.params.items():
                grad[i:i + arr.size] = np.ravel(g[name])
                i += arr.size
        return c, grad

    # composition ------------------------------------------------------------

    def copy(self) -> "SympNetModel":
        return model_from_dict(self.to_dict())

    def then(self, other: "SympNetModel") -> "SympNetModel":
        """Model applying ``self`` first and ``other`` second."""
        if other.dim_n != self.dim_n or other.method != self.method:
            raise ConfigurationError("can only concatenate models of equal dimension and method")
        layers = [layer.copy() for layer in self.layers + other.layers]
        hyper = dict(self.hyper)
        hyper["layers"] = len(layers)
        return SympNetModel(self.dim_n, self.method, layers, hyper)

    def reversed_layers(self) -> "SympNetModel":
        return SympNetModel(self.dim_n, self.method, [l.copy() for l in reversed(self.layers)],
                            self.hyper)

    # serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "method": self.method,
            "dim": 2 * self.dim_n,
            "hyper": self.hyper,
            "layers": [layer.to_dict() for layer in self.layers],
            "metadata": self.metadata,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    def __repr__(self):
        return (f"SympNetModel(method={self.method}, dim_n={self.dim_n}, "
                f"layers={len(self.layers)}, params={self.num_params})")


def model_from_dict(d: dict) -> SympNetModel:
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint format_version {version!r}")
    dim = int(d["dim"])
    if dim % 2:
        raise DimensionError(f"checkpoint dim must be even, got {dim}")
    n = dim // 2
    layers = [layer_from_dict(ld, n) for ld in d["layers"]]
    return SympNetModel(n, d["method"], layers, d.get("hyper", {}), d.get("metadata", {}))


def load_model(path) -> SympNetModel:
    return model_from_dict(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# initialization


@dataclass(frozen=True)
class InitScales:
    coeff: float = 0.01        # output coefficients of every potential
    gr_matrix: float = 0.1     # S1, S2, S3 of generalized ridge layers


def _need(hyper, key, method, minimum=1):
    if key not in hyper:
        raise ConfigurationError(f"method {method} needs hyper parameter {key!r}")
    value = hyper[key]
    if not isinstance(value, (int, np.integer)) or value < minimum:
        raise ConfigurationError(f"{key} must be an integer >= {minimum} for method {method}, "
                                 f"got {value!r}")
    return int(value)


def _net_params(rng, n, m, scale):
    return {
        "weights": rng.uniform(-1, 1, size=(m, n)) / math.sqrt(n),
        "biases": rng.uniform(-1, 1, size=m),
        "out": rng.normal(0.0, scale, size=m),
    }


def init_model(method: str, dim_n: int, hyper: dict, seed: int = 0,
               scales: InitScales | None = None) -> SympNetModel:
    """Random near-identity model.

    ``hyper`` keys by method:

    * ``P``: ``layers``, ``degree`` (>= 2), optional ``bounded``
    * ``R``, ``GR``, ``G``, ``H``: ``layers``, ``width``
    * ``LA``: ``layers`` (activation layers), ``sublayers`` per linear block

    For ``G`` and ``LA`` every shear counts as one layer; shears alternate
    between updating ``p`` (first) and ``q``.  ``H`` needs a multiple of four
    layers, since four potential-free Henon maps compose to the identity.
    """
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}; choose from {METHODS}")
    if dim_n < 1:
        raise DimensionError("dim_n must be positive")
    sc = scales or InitScales()
    rng = np.random.default_rng(seed)
    n = dim_n
    hyper = dict(hyper)
    k = _need(hyper, "layers", method, minimum=0 if method == "LA" else 1)
    layers: list[Layer] = []

    def direction():
        return rng.uniform(-1, 1, size=2 * n) / math.sqrt(2 * n)

    if method == "P":
        d = _need(hyper, "degree", method, minimum=2)
        bounded = bool(hyper.get("bounded", False))
        for _ in range(k):
            layers.append(RidgeLayer.poly(direction(), rng.normal(0, sc.coeff, size=d - 1), bounded))
    elif method == "R":
        m = _need(hyper, "width", method)
        for _ in range(k):
            w = direction()
            layers.append(RidgeLayer.net(w, rng.normal(0, sc.coeff, size=m), rng.uniform(-1, 1, size=m)))
    elif method == "GR":
        m = _need(hyper, "width", method)
        s = sym_size(n)
        for i in range(k):
            P = {key: rng.normal(0, sc.gr_matrix, size=s) for key in ("s1", "s2", "s3")}
            P.update(_net_params(rng, n, m, sc.coeff))
            layers.append(GenRidgeLayer(n, P, "A" if i % 2 == 0 else "B"))
    elif method == "G":
        m = _need(hyper, "width", method)
        for i in range(k):
            layers.append(ShearLayer(n, _net_params(rng, n, m, sc.coeff), "pq"[i % 2], "net"))
    elif method == "LA":
        ksub = _need(hyper, "sublayers", method)
        s = sym_size(n)

        def linear_block():
            for j in range(ksub):
                layers.append(ShearLayer(n, {"sym": rng.normal(0, sc.coeff, size=s)}, "pq"[j % 2],
                                         "quadratic"))

        linear_block()
        for i in range(k):
            layers.append(ShearLayer(n, {"scale": rng.normal(0, sc.coeff, size=n)}, "pq"[i % 2],
                                     "elementwise"))
            linear_block()
    else:  # H
        m = _need(hyper, "width", method)
        if k % 4:
            raise ConfigurationError(f"H models need a multiple of 4 layers, got {k}")
        for _ in range(k):
            layers.append(HenonLayer(n, _net_params(rng, n, m, sc.coeff)))
    return SympNetModel(n, method, layers, hyper, {"seed": seed})


def count_params(method: str, dim_n: int, hyper: dict) -> int:
    """Closed-form parameter count of :func:`init_model`'s architecture."""
    n = dim_n
    k = hyper["layers"]
    s = sym_size(n)
    m = hyper.get("width", 0)
    net = m * n + 2 * m
    if method == "P":
        return k * (2 * n + hyper["degree"] - 1)
    if method == "R":
        return k * (2 * n + 2 * m)
    if method == "GR":
        return k * (3 * s + net)
    if method in ("G", "H"):
        return k * net
    if method == "LA":
        return (k + 1) * hyper["sublayers"] * s + k * n
    raise ConfigurationError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# functional API


def model_forward(model: SympNetModel, x, h: float):
    return model.forward(x, h)


def model_inverse(model: SympNetModel, y, h: float):
    return model.inverse(y, h)


def layer_polynomial(layer: Layer) -> MultiPoly:
    """Expand a polynomial ridge layer ``sum_j a_j (w^T x)^j`` into monomials."""
    if not isinstance(layer, RidgeLayer) or layer.mode != "poly":
        raise CapabilityError(f"layer kind {layer.kind!r} has no polynomial Hamiltonian")
    if layer.bounded:
        raise CapabilityError("bounded polynomial ridge layers are not polynomials")
    lin = MultiPoly.linear(layer.params["w"])
    out = MultiPoly(layer.dim_n)
    power = lin
    for a in layer.params["coeffs"]:
        power = power * lin
        out = out + power.scale(float(a))
    return out


def inverse_modified_hamiltonian(model: SympNetModel) -> MultiPoly:
    """Sum of the layer Hamiltonians of a P model."""
    if model.method != "P":
        kinds = sorted({layer.kind for layer in model.layers})
        raise CapabilityError(f"only P models have polynomial layer Hamiltonians; "
                              f"this {model.method} model uses {', '.join(kinds) or 'no layers'}")
    out = MultiPoly(model.dim_n)
    for layer in model.layers:
        out = out + layer_polynomial(layer)
    return out


def param_stats(model: SympNetModel) -> tuple[float, float, float]:
    """Mean, min and max over every trainable scalar (zeros for an empty model)."""
    theta = model.buffer
    if theta.size == 0:
        return 0.0, 0.0, 0.0
    return float(theta.mean()), float(theta.min()), float(theta.max())
