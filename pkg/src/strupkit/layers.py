"""Hamiltonian shear layers.

Every layer is the exact time-``h`` flow of a shear Hamiltonian, evaluated as
one forward-Euler step.  Layers hold their trainable parameters in an ordered
``params`` dict of float arrays; a model may rebind those arrays to views of a
shared flat buffer, so layer code never replaces arrays, only reads them.

All maps accept a single phase vector ``(2n,)`` or a batch ``(N, 2n)``.
``vjp`` always works on batches and returns parameter gradients summed over
the batch.
"""
from __future__ import annotations

import enum
from typing import Iterable

import numpy as np
from scipy.special import expit

from .errors import DimensionError, NumericOverflowError
from .phase import apply_J, split


# --------------------------------------------------------------------------
# scalar activations used as potentials: value, first and second derivative


class Activation(enum.Enum):
    SOFTPLUS = "softplus"   # antiderivative of the logistic sigmoid
    SIGMOID = "sigmoid"
    TANH = "tanh"

    def __call__(self, z):
        if self is Activation.SOFTPLUS:
            return np.logaddexp(0.0, z)
        if self is Activation.SIGMOID:
            return expit(z)
        return np.tanh(z)

    def d1(self, z):
        if self is Activation.SOFTPLUS:
            return expit(z)
        if self is Activation.SIGMOID:
            s = expit(z)
            return s * (1 - s)
        t = np.tanh(z)
        return 1 - t * t

    def d2(self, z):
        if self is Activation.SOFTPLUS:
            s = expit(z)
            return s * (1 - s)
        if self is Activation.SIGMOID:
            s = expit(z)
            return s * (1 - s) * (1 - 2 * s)
        t = np.tanh(z)
        return -2 * t * (1 - t * t)


# --------------------------------------------------------------------------
# symmetric matrices stored as packed upper triangles


def sym_size(n: int) -> int:
    return n * (n + 1) // 2


def unpack_sym(v: np.ndarray, n: int) -> np.ndarray:
    M = np.zeros((n, n))
    iu = np.triu_indices(n)
    M[iu] = v
    M.T[iu] = v
    return M


def pack_sym(M: np.ndarray) -> np.ndarray:
    return np.asarray(M, dtype=float)[np.triu_indices(M.shape[0])].copy()


def pack_sym_grad(G: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the packed triangle, given the gradient w.r.t. the full matrix."""
    iu = np.triu_indices(G.shape[0])
    S = G + G.T
    S[np.diag_indices(G.shape[0])] *= 0.5
    return S[iu]


def _batch(x):
    x = np.asarray(x, dtype=float)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def _finite(out, what):
    if not np.all(np.isfinite(out)):
        raise NumericOverflowError(f"{what} produced non-finite values")
    return out


# --------------------------------------------------------------------------
# potentials F: R^n -> R acting on one block (p or q) or on C x.
# Stateless strategies; parameters live in the owning layer's dict.


class NetPotential:
    """``F(s) = sum_i out_i * act(weights_i . s + biases_i)``."""

    names = ("weights", "biases", "out")

    def __init__(self, activation: Activation):
        self.activation = Activation(activation)

    def _z(self, P, s):
        return s @ P["weights"].T + P["biases"]

    def value(self, P, s):
        return self.activation(self._z(P, s)) @ P["out"]

    def grad(self, P, s):
        return (P["out"] * self.activation.d1(self._z(P, s))) @ P["weights"]

    def hvp(self, P, s, u):
        z = self._z(P, s)
        return ((u @ P["weights"].T) * P["out"] * self.activation.d2(z)) @ P["weights"]

    def param_vjp(self, P, s, u):
        """Gradient of ``sum_batch u . grad F(s)`` w.r.t. the potential parameters."""
        z = self._z(P, s)
        a1 = self.activation.d1(z)
        a2 = self.activation.d2(z)
        v = u @ P["weights"].T
        va2 = v * P["out"] * a2
        return {
            "weights": (P["out"] * a1).T @ u + va2.T @ s,
            "biases": va2.sum(axis=0),
            "out": (v * a1).sum(axis=0),
        }


class QuadraticPotential:
    """``F(s) = s^T S s`` with ``S`` symmetric, stored packed as ``sym``."""

    names = ("sym",)

    def value(self, P, s):
        S = unpack_sym(P["sym"], s.shape[-1])
        return np.einsum("...i,ij,...j->...", s, S, s)

    def grad(self, P, s):
        return 2 * s @ unpack_sym(P["sym"], s.shape[-1])

    def hvp(self, P, s, u):
        return 2 * u @ unpack_sym(P["sym"], s.shape[-1])

    def param_vjp(self, P, s, u):
        return {"sym": pack_sym_grad(2 * u.T @ s)}


class ElementwisePotential:
    """``F(s) = sum_i scale_i * act(s_i)``."""

    names = ("scale",)

    def __init__(self, activation: Activation):
        self.activation = Activation(activation)

    def value(self, P, s):
        return self.activation(s) @ P["scale"]

    def grad(self, P, s):
        return P["scale"] * self.activation.d1(s)

    def hvp(self, P, s, u):
        return P["scale"] * self.activation.d2(s) * u

    def param_vjp(self, P, s, u):
        return {"scale": (u * self.activation.d1(s)).sum(axis=0)}


class PolyPotential:
    """``F(s) = sum_t coeffs_t s^{e_t}`` for a fixed exponent table ``e``."""

    names = ("coeffs",)

    def __init__(self, exponents):
        self.exponents = np.asarray(exponents, dtype=np.int64)
        if self.exponents.ndim != 2:
            raise DimensionError("exponent table must be 2-D")

    def _monos(self, s, shift):
        e = self.exponents - shift
        ok = np.all(e >= 0, axis=-1)
        e = np.where(e < 0, 0, e)
        return np.prod(s[..., None, :] ** e, axis=-1) * ok

    def value(self, P, s):
        return self._monos(s, 0) @ P["coeffs"]

    def _dmonos(self, s):
        n = self.exponents.shape[1]
        eye = np.eye(n, dtype=np.int64)
        # (N, n, T): d/ds_j of each monomial
        return np.stack([self._monos(s, eye[j]) * self.exponents[:, j] for j in range(n)], axis=1)

    def grad(self, P, s):
        return self._dmonos(s) @ P["coeffs"]

    def hvp(self, P, s, u):
        n = self.exponents.shape[1]
        eye = np.eye(n, dtype=np.int64)
        out = np.zeros_like(s)
        for j in range(n):
            for k in range(n):
                e_jk = self.exponents[:, j] * (self.exponents[:, k] - (j == k))
                mono = self._monos(s, eye[j] + eye[k]) * e_jk
                out[:, j] += (mono @ P["coeffs"]) * u[:, k]
        return out

    def param_vjp(self, P, s, u):
        return {"coeffs": np.einsum("nj,njt->t", u, self._dmonos(s))}


_POTENTIALS = {
    "net": lambda cfg: NetPotential(cfg.get("activation", "softplus")),
    "quadratic": lambda cfg: QuadraticPotential(),
    "elementwise": lambda cfg: ElementwisePotential(cfg.get("activation", "softplus")),
    "poly": lambda cfg: PolyPotential(cfg["exponents"]),
}


# --------------------------------------------------------------------------


class Layer:
    """Base class: parameters, inverse, and (de)serialization."""

    kind = "abstract"
    orientation = None

    def __init__(self, dim_n: int, params: dict):
        self.dim_n = int(dim_n)
        self.params = {k: np.array(v, dtype=float) for k, v in params.items()}

    def forward(self, x, h):
        raise NotImplementedError

    def inverse(self, y, h):
        # shear flows are linear in time, so -h undoes +h exactly
        return self.forward(y, -h)

    def vjp(self, x, h, cot):
        raise NotImplementedError

    def __call__(self, x, h):
        return self.forward(x, h)

    def _check_dim(self, x):
        if x.shape[-1] != 2 * self.dim_n:
            raise DimensionError(f"{self.kind} layer expects {2 * self.dim_n} coordinates, "
                                 f"got {x.shape[-1]}")

    @property
    def num_params(self) -> int:
        return sum(v.size for v in self.params.values())

    def flat_params(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.params.values()]) if self.params else np.zeros(0)

    def config(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "orientation": self.orientation,
            "config": self.config(),
            "params": [float(v) for v in self.flat_params()],
        }

    def copy(self):
        return layer_from_dict(self.to_dict(), self.dim_n)


# --------------------------------------------------------------------------


class RidgeLayer(Layer):
    """Flow of ``H = alpha(w^T x)``: ``x + h alpha'(w^T x) J w``.

    ``mode="poly"``: ``alpha(y) = sum_{j=2..d} coeffs_j y^j`` (params ``w``, ``coeffs``).
    ``mode="net"``:  ``alpha(y) = sum_i out_i act(y + biases_i)`` (params ``w``, ``out``, ``biases``).
    ``bounded=True`` wraps the polynomial as ``tanh(poly(y))``.
    """

    def __init__(self, dim_n, params, mode="poly", activation="tanh", bounded=False):
        super().__init__(dim_n, params)
        if mode not in ("poly", "net"):
            raise ValueError(f"unknown ridge mode {mode!r}")
        self.mode = mode
        self.activation = Activation(activation)
        self.bounded = bool(bounded)
        self.kind = "poly-ridge" if mode == "poly" else "net-ridge"
        if self.params["w"].shape != (2 * self.dim_n,):
            raise DimensionError("direction vector must have length 2n")

    @classmethod
    def poly(cls, w, coeffs, bounded=False):
        w = np.asarray(w, dtype=float)
        return cls(w.shape[0] // 2, {"w": w, "coeffs": coeffs}, "poly", bounded=bounded)

    @classmethod
    def net(cls, w, out, biases, activation="tanh"):
        w = np.asarray(w, dtype=float)
        return cls(w.shape[0] // 2, {"w": w, "out": out, "biases": biases}, "net", activation)

    @property
    def degree(self) -> int:
        return len(self.params["coeffs"]) + 1

    def config(self):
        if self.mode == "poly":
            return {"degree": self.degree, "bounded": self.bounded}
        return {"width": len(self.params["out"]), "activation": self.activation.value}

    # alpha and its derivatives, vectorized over y; overflow surfaces through _finite
    @np.errstate(over="ignore", invalid="ignore")
    def _poly_parts(self, y):
        c = self.params["coeffs"]
        j = np.arange(2, len(c) + 2)
        powers = y[:, None] ** j                       # y^j
        lower = y[:, None] ** (j - 1)                  # y^(j-1)
        low2 = y[:, None] ** np.maximum(j - 2, 0)      # y^(j-2)
        P = powers @ c
        P1 = (j * lower) @ c
        P2 = (j * (j - 1) * low2) @ c
        return P, P1, P2, powers, j * lower

    def alpha(self, y):
        y = np.asarray(y, dtype=float)
        if self.mode == "net":
            return self.activation(y[..., None] + self.params["biases"]) @ self.params["out"]
        P = self._poly_parts(np.atleast_1d(y).ravel())[0].reshape(np.shape(y))
        return np.tanh(P) if self.bounded else P

    def _derivs(self, y):
        """``alpha'(y)``, ``alpha''(y)`` and ``d alpha'/d theta`` per parameter."""
        if self.mode == "net":
            z = y[:, None] + self.params["biases"]
            a = self.params["out"]
            d1 = self.activation.d1(z)
            d2 = self.activation.d2(z)
            return d1 @ a, d2 @ a, {"out": d1, "biases": d2 * a}
        P, P1, P2, powers, dP1 = self._poly_parts(y)
        if not self.bounded:
            return P1, P2, {"coeffs": dP1}
        t = Activation.TANH
        with np.errstate(over="ignore", invalid="ignore"):
            s1, s2 = t.d1(P), t.d2(P)
        first = s1 * P1
        second = s2 * P1 ** 2 + s1 * P2
        dcoef = (s2 * P1)[:, None] * powers + s1[:, None] * dP1
        return first, second, {"coeffs": dcoef}

    def forward(self, x, h):
        X, single = _batch(x)
        self._check_dim(X)
        w = self.params["w"]
        d1, _, _ = self._derivs(X @ w)
        out = _finite(X + h * d1[:, None] * apply_J(w), "ridge layer")
        return out[0] if single else out

    def vjp(self, x, h, cot):
        X, _ = _batch(x)
        C, _ = _batch(cot)
        w = self.params["w"]
        Jw = apply_J(w)
        d1, d2, dth = self._derivs(X @ w)
        s = C @ Jw
        hs2 = h * d2 * s
        dx = C + hs2[:, None] * w
        grads = {"w": hs2 @ X - h * (d1 @ apply_J(C))}
        for name, block in dth.items():
            grads[name] = h * (s @ block)
        return _finite(dx, "ridge vjp"), grads

    def hamiltonian(self, x):
        return self.alpha(np.asarray(x, dtype=float) @ self.params["w"])

    def grad_hamiltonian(self, x):
        X, single = _batch(x)
        d1 = self._derivs(X @ self.params["w"])[0]
        out = d1[:, None] * self.params["w"]
        return out[0] if single else out

    def invariant(self, x):
        """The conserved linear quantity ``w^T x``."""
        return np.asarray(x, dtype=float) @ self.params["w"]


# --------------------------------------------------------------------------


def gr_matrices(s1, s2, s3, n, orientation="A"):
    S1, S2, S3 = (unpack_sym(s, n) for s in (s1, s2, s3))
    first = np.eye(n) + S3 @ S2
    second = S3 + S3 @ S2 @ S1 + S1
    return (first, second) if orientation == "A" else (second, first)


class GenRidgeLayer(Layer):
    """Flow of ``H = N(A p + B q)`` with ``A B^T`` symmetric by construction.

    ``orientation="A"``: ``A = I + S3 S2``, ``B = S3 + S3 S2 S1 + S1``;
    ``orientation="B"`` swaps the two.  ``N`` is a one-hidden-layer network.
    Parameter order: ``s1, s2, s3, weights, biases, out``.
    """

    kind = "gen-ridge"

    def __init__(self, dim_n, params, orientation="A", activation="tanh"):
        super().__init__(dim_n, params)
        if orientation not in ("A", "B"):
            raise ValueError(f"orientation must be 'A' or 'B', got {orientation!r}")
        self.orientation = orientation
        self.net = NetPotential(activation)

    def config(self):
        return {"width": len(self.params["out"]), "activation": self.net.activation.value}

    def materialize(self):
        P = self.params
        return gr_matrices(P["s1"], P["s2"], P["s3"], self.dim_n, self.orientation)

    def forward(self, x, h):
        X, single = _batch(x)
        self._check_dim(X)
        p, q = split(X)
        A, B = self.materialize()
        g = self.net.grad(self.params, p @ A.T + q @ B.T)
        out = _finite(np.concatenate([p - h * g @ B, q + h * g @ A], axis=-1), "gen-ridge layer")
        return out[0] if single else out

    def vjp(self, x, h, cot):
        X, _ = _batch(x)
        C, _ = _batch(cot)
        p, q = split(X)
        cp, cq = split(C)
        n = self.dim_n
        A, B = self.materialize()
        y = p @ A.T + q @ B.T
        g = self.net.grad(self.params, y)
        u = h * (cq @ A.T - cp @ B.T)            # dL/dg
        r = self.net.hvp(self.params, y, u)      # dL/dy
        dx = np.concatenate([cp + r @ A, cq + r @ B], axis=-1)
        GA = r.T @ p + h * g.T @ cq
        GB = r.T @ q - h * g.T @ cp
        G1, G2 = (GA, GB) if self.orientation == "A" else (GB, GA)
        S1, S2, S3 = (unpack_sym(self.params[k], n) for k in ("s1", "s2", "s3"))
        grads = {
            "s1": pack_sym_grad((S3 @ S2).T @ G2 + G2),
            "s2": pack_sym_grad(S3.T @ G1 + S3.T @ G2 @ S1.T),
            "s3": pack_sym_grad(G1 @ S2.T + G2 + G2 @ (S2 @ S1).T),
        }
        grads.update(self.net.param_vjp(self.params, y, u))
        return _finite(dx, "gen-ridge vjp"), grads

    def hamiltonian(self, x):
        p, q = split(np.asarray(x, dtype=float))
        A, B = self.materialize()
        return self.net.value(self.params, p @ A.T + q @ B.T)

    def grad_hamiltonian(self, x):
        X, single = _batch(x)
        p, q = split(X)
        A, B = self.materialize()
        g = self.net.grad(self.params, p @ A.T + q @ B.T)
        out = np.concatenate([g @ A, g @ B], axis=-1)
        return out[0] if single else out

    def invariant(self, x):
        p, q = split(np.asarray(x, dtype=float))
        A, B = self.materialize()
        return p @ A.T + q @ B.T


# --------------------------------------------------------------------------


class ShearLayer(Layer):
    """Fixed-direction shear.

    ``direction="p"``: ``(p - h grad V(q), q)``, flow of ``H = V(q)``.
    ``direction="q"``: ``(p, q + h grad T(p))``, flow of ``H = T(p)``.
    ``potential`` is one of ``net`` (G-SympNet), ``quadratic`` (LA linear
    sub-layer) or ``elementwise`` (LA activation layer).
    """

    _KINDS = {"net": "G", "quadratic": "LA-linear", "elementwise": "LA-activation", "poly": "poly-shear"}

    def __init__(self, dim_n, params, direction, potential="net", activation="softplus",
                 exponents=None):
        super().__init__(dim_n, params)
        if direction not in ("p", "q"):
            raise ValueError(f"direction must be 'p' or 'q', got {direction!r}")
        self.direction = direction
        self.orientation = direction
        self.potential_name = potential
        self.activation = Activation(activation)
        cfg = {"activation": activation, "exponents": exponents}
        self.pot = _POTENTIALS[potential](cfg)
        self.kind = self._KINDS[potential]

    def config(self):
        cfg = {"potential": self.potential_name}
        if self.potential_name in ("net", "elementwise"):
            cfg["activation"] = self.activation.value
        if self.potential_name == "net":
            cfg["width"] = len(self.params["out"])
        if self.potential_name == "poly":
            cfg["exponents"] = self.pot.exponents.tolist()
        return cfg

    def _sign(self):
        return -1.0 if self.direction == "p" else 1.0

    def forward(self, x, h):
        X, single = _batch(x)
        self._check_dim(X)
        p, q = split(X)
        if self.direction == "p":
            out = np.concatenate([p - h * self.pot.grad(self.params, q), q], axis=-1)
        else:
            out = np.concatenate([p, q + h * self.pot.grad(self.params, p)], axis=-1)
        out = _finite(out, f"{self.kind} layer")
        return out[0] if single else out

    def vjp(self, x, h, cot):
        X, _ = _batch(x)
        C, _ = _batch(cot)
        p, q = split(X)
        cp, cq = split(C)
        sh = self._sign() * h
        if self.direction == "p":
            src, c_tgt = q, cp
            dx = np.concatenate([cp, cq + sh * self.pot.hvp(self.params, q, cp)], axis=-1)
        else:
            src, c_tgt = p, cq
            dx = np.concatenate([cp + sh * self.pot.hvp(self.params, p, cq), cq], axis=-1)
        grads = {k: sh * v for k, v in self.pot.param_vjp(self.params, src, c_tgt).items()}
        return _finite(dx, f"{self.kind} vjp"), grads

    def hamiltonian(self, x):
        p, q = split(np.asarray(x, dtype=float))
        return self.pot.value(self.params, q if self.direction == "p" else p)

    def grad_hamiltonian(self, x):
        X, single = _batch(x)
        p, q = split(X)
        zero = np.zeros_like(p)
        if self.direction == "p":
            out = np.concatenate([zero, self.pot.grad(self.params, q)], axis=-1)
        else:
            out = np.concatenate([self.pot.grad(self.params, p), zero], axis=-1)
        return out[0] if single else out


# --------------------------------------------------------------------------


def _quarter_turn_shears(n):
    """Unit-time shears whose composition is ``(p, q) -> (q, -p)``.

    ``V = -|q|^2/2`` gives ``p -> p + q``; ``-T = -|p|^2/2`` gives ``q -> q - p``.
    """
    half = pack_sym(-0.5 * np.eye(n))
    V = ShearLayer(n, {"sym": half}, "p", "quadratic")
    T = ShearLayer(n, {"sym": half}, "q", "quadratic")
    return [V, T, V]


class HenonLayer(Layer):
    """Henon-like map ``(p, q) -> (q, -p + h grad alpha(q))``.

    ``alpha`` is a ``net`` potential (softplus by default) or a ``poly``
    potential with a fixed exponent table in ``n`` variables.
    """

    kind = "henon"

    def __init__(self, dim_n, params, potential="net", activation="softplus", exponents=None):
        super().__init__(dim_n, params)
        self.potential_name = potential
        self.activation = Activation(activation)
        self.pot = _POTENTIALS[potential]({"activation": activation, "exponents": exponents})

    @classmethod
    def from_poly(cls, alpha):
        """Build from a :class:`~strupkit.poly.MultiPoly` in the ``n`` q-variables.

        ``alpha`` is given over ``2n`` variables; any term touching a p-variable
        is rejected.
        """
        n = alpha.dim_n
        exps, coefs = alpha.arrays()
        if np.any(exps[:, :n]):
            raise ValueError("Henon potential must depend on q only")
        return cls(n, {"coeffs": coefs}, "poly", exponents=exps[:, n:])

    def config(self):
        cfg = {"potential": self.potential_name}
        if self.potential_name == "net":
            cfg["activation"] = self.activation.value
            cfg["width"] = len(self.params["out"])
        else:
            cfg["exponents"] = self.pot.exponents.tolist()
        return cfg

    def forward(self, x, h):
        X, single = _batch(x)
        self._check_dim(X)
        p, q = split(X)
        out = np.concatenate([q, -p + h * self.pot.grad(self.params, q)], axis=-1)
        out = _finite(out, "henon layer")
        return out[0] if single else out

    def shears(self):
        """The four shears and their timestep multipliers, in application order.

        ``henon(x, h) == alpha_shear(V(T(V(x, 1), 1), 1), h)``.
        """
        alpha = ShearLayer(self.dim_n, self.params, "q", self.potential_name,
                           self.activation.value,
                           exponents=getattr(self.pot, "exponents", None))
        return [(s, None) for s in _quarter_turn_shears(self.dim_n)] + [(alpha, "h")]

    def forward_by_shears(self, x, h):
        for layer, step in self.shears():
            x = layer.forward(x, h if step == "h" else 1.0)
        return x

    def inverse(self, y, h):
        for layer, step in reversed(self.shears()):
            y = layer.forward(y, -h if step == "h" else -1.0)
        return y

    def vjp(self, x, h, cot):
        X, _ = _batch(x)
        C, _ = _batch(cot)
        p, q = split(X)
        cp, cq = split(C)
        dx = np.concatenate([-cq, cp + h * self.pot.hvp(self.params, q, cq)], axis=-1)
        grads = {k: h * v for k, v in self.pot.param_vjp(self.params, q, cq).items()}
        return _finite(dx, "henon vjp"), grads


# --------------------------------------------------------------------------
# serialization


def layer_from_dict(d: dict, dim_n: int) -> Layer:
    """Rebuild a layer from :meth:`Layer.to_dict` output.

    Flat parameter order per kind:

    * ``poly-ridge``: ``w (2n)``, ``coeffs (d-1)``
    * ``net-ridge``: ``w (2n)``, ``out (m)``, ``biases (m)``
    * ``gen-ridge``: ``s1, s2, s3`` (packed, ``n(n+1)/2`` each), ``weights (m*n)``, ``biases (m)``, ``out (m)``
    * ``G``: ``weights (m*n)``, ``biases (m)``, ``out (m)``
    * ``LA-linear``: ``sym (n(n+1)/2)``
    * ``LA-activation``: ``scale (n)``
    * ``henon``: as ``G`` for a net potential, ``coeffs (T)`` for a polynomial one
    """
    kind = d["kind"]
    cfg = d.get("config", {})
    flat = np.asarray(d["params"], dtype=float)
    n = dim_n
    m = cfg.get("width")
    k = sym_size(n)
    if kind == "poly-ridge":
        shapes = [("w", (2 * n,)), ("coeffs", (cfg["degree"] - 1,))]
    elif kind == "net-ridge":
        shapes = [("w", (2 * n,)), ("out", (m,)), ("biases", (m,))]
    elif kind == "gen-ridge":
        shapes = [("s1", (k,)), ("s2", (k,)), ("s3", (k,)),
                  ("weights", (m, n)), ("biases", (m,)), ("out", (m,))]
    elif kind in ("G", "henon") and cfg.get("potential", "net") == "net":
        shapes = [("weights", (m, n)), ("biases", (m,)), ("out", (m,))]
    elif kind == "LA-linear":
        shapes = [("sym", (k,))]
    elif kind == "LA-activation":
        shapes = [("scale", (n,))]
    elif kind in ("henon", "poly-shear"):
        shapes = [("coeffs", (len(cfg["exponents"]),))]
    else:
        raise ValueError(f"unknown layer kind {kind!r}")
    total = sum(int(np.prod(s)) for _, s in shapes)
    if flat.size != total:
        raise DimensionError(f"{kind} layer expects {total} parameters, got {flat.size}")
    params, i = {}, 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        params[name] = flat[i:i + size].reshape(shape)
        i += size
    if kind == "poly-ridge":
        return RidgeLayer(n, params, "poly", bounded=cfg.get("bounded", False))
    if kind == "net-ridge":
        return RidgeLayer(n, params, "net", cfg.get("activation", "tanh"))
    if kind == "gen-ridge":
        return GenRidgeLayer(n, params, d.get("orientation", "A"), cfg.get("activation", "tanh"))
    if kind == "henon":
        return HenonLayer(n, params, cfg.get("potential", "net"), cfg.get("activation", "softplus"),
                          cfg.get("exponents"))
    return ShearLayer(n, params, d["orientation"], cfg.get("potential", "net"),
                      cfg.get("activation", "softplus"), cfg.get("exponents"))


# --------------------------------------------------------------------------
# functional entry points


def ridge_forward(layer: RidgeLayer, x, h):
    return layer.forward(x, h)


def ridge_vjp(layer: RidgeLayer, x, h, cotangent):
    return layer.vjp(x, h, cotangent)


def gr_materialize(layer: GenRidgeLayer):
    return layer.materialize()


def gr_forward(layer: GenRidgeLayer, x, h):
    return layer.forward(x, h)


def fixed_forward(layer: ShearLayer, x, h):
    return layer.forward(x, h)


def henon_forward(layer: HenonLayer, x, h):
    return layer.forward(x, h)


def layer_kinds() -> Iterable[str]:
    return ("poly-ridge", "net-ridge", "gen-ridge", "G", "LA-linear", "LA-activation", "henon")
