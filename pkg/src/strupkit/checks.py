"""Cross-module invariant suite, shared by the ``check`` command and the tests."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .bch import backward_error_map, quad_matrix_log_oracle
from .layers import (GenRidgeLayer, HenonLayer, Layer, RidgeLayer, ShearLayer, layer_kinds,
                     sym_size)
from .linrep import model_from_symplectic_matrix
from .model import METHODS, InitScales, init_model
from .phase import fd_jacobian, symplectic_matrix, symplecticity_residual, volume_residual
from .poly import MultiPoly
from .systems import SnapshotDataset, reference_flow
from .training import loss_and_grad, mse_loss

METHOD_HYPER = {
    "P": {"layers": 3, "degree": 4},
    "R": {"layers": 3, "width": 4},
    "GR": {"layers": 3, "width": 4},
    "G": {"layers": 4, "width": 4},
    "LA": {"layers": 2, "sublayers": 3},
    "H": {"layers": 4, "width": 3},
}

# large enough that every layer is far from the identity
TEST_SCALES = InitScales(coeff=0.5, gr_matrix=0.5)


def random_layer(kind: str, n: int, rng: np.random.Generator, width: int = 3) -> Layer:
    """Layer of the given kind with O(1) random parameters.

    ``kind`` is one of :func:`~strupkit.layers.layer_kinds`, optionally
    suffixed with ``:p``/``:q`` (shear direction), ``:A``/``:B`` (gen-ridge
    orientation) or ``:bounded`` (poly-ridge).
    """
    base, _, variant = kind.partition(":")
    m = width

    def net():
        return {"weights": rng.normal(size=(m, n)), "biases": rng.normal(size=m),
                "out": rng.normal(size=m)}

    if base == "poly-ridge":
        return RidgeLayer.poly(rng.normal(size=2 * n) / math.sqrt(2 * n), rng.normal(size=3),
                               bounded=variant == "bounded")
    if base == "net-ridge":
        return RidgeLayer.net(rng.normal(size=2 * n) / math.sqrt(2 * n), rng.normal(size=m),
                              rng.normal(size=m))
    if base == "gen-ridge":
        k = sym_size(n)
        P = {s: rng.normal(size=k) * 0.5 for s in ("s1", "s2", "s3")}
        P.update(net())
        return GenRidgeLayer(n, P, variant or "A")
    direction = variant or "p"
    if base == "G":
        return ShearLayer(n, net(), direction, "net")
    if base == "LA-linear":
        return ShearLayer(n, {"sym": rng.normal(size=sym_size(n))}, direction, "quadratic")
    if base == "LA-activation":
        return ShearLayer(n, {"scale": rng.normal(size=n)}, direction, "elementwise")
    if base == "henon":
        return HenonLayer(n, net())
    raise ValueError(f"unknown layer kind {kind!r}")


SHEAR_KINDS = ("poly-ridge", "poly-ridge:bounded", "net-ridge", "gen-ridge:A", "gen-ridge:B",
               "G:p", "G:q", "LA-linear:p", "LA-linear:q", "LA-activation:p", "LA-activation:q")


@dataclass
class CheckResult:
    name: str
    value: float
    tol: float
    passed: bool
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.note})" if self.note else ""
        return f"[{status}] {self.name}: {self.value:.3e} vs {self.tol:.1e}{extra}"


def shear_exactness(n_values=(1, 2, 4), h_values=(0.01, 0.1, 1.0), seed=0, points=4) -> float:
    """Worst gap between each shear layer and the integrated flow of its Hamiltonian."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for kind in SHEAR_KINDS:
        for n in n_values:
            layer = random_layer(kind, n, rng)
            for h in h_values:
                x = rng.uniform(-0.5, 0.5, size=(points, 2 * n))
                ref = reference_flow(layer.grad_hamiltonian, x, h)
                worst = max(worst, float(np.max(np.abs(layer.forward(x, h) - ref))))
    return worst


def model_structure(method: str, n: int, seed: int = 0, h: float = 0.1) -> dict:
    model = init_model(method, n, METHOD_HYPER[method], seed=seed, scales=TEST_SCALES)
    rng = np.random.default_rng(seed + 1)
    x = rng.uniform(-0.5, 0.5, size=2 * n)
    fwd = lambda z: model.forward(z, h)
    X = rng.uniform(-0.5, 0.5, size=(20, 2 * n))
    return {
        "symplecticity": symplecticity_residual(fwd, x),
        "volume": volume_residual(fwd, x),
        "inverse": float(np.max(np.abs(model.inverse(model.forward(X, h), h) - X))),
    }


def backward_stability(method: str, n: int, seed: int = 0, h: float = 0.1) -> float:
    """Smallest spectral norm of the FD Jacobian of the layer tail ``j..k`` at its input."""
    model = init_model(method, n, METHOD_HYPER[method], seed=seed, scales=TEST_SCALES)
    x = np.random.default_rng(seed + 3).uniform(-0.5, 0.5, size=2 * n)
    xs = model.forward_trace(x, h)
    worst = np.inf
    for j in range(len(model.layers)):
        def tail(z, j=j):
            for layer in model.layers[j:]:
                z = layer.forward(z, h)
            return z
        worst = min(worst, float(np.linalg.norm(fd_jacobian(tail, xs[j]), 2)))
    return worst


def gradient_error(method: str, n: int = 2, seed: int = 0, n_data: int = 8, h: float = 0.1,
                   fd_step: float = 1e-6) -> float:
    """Worst per-coordinate relative gap between the analytic and FD loss gradient.

    Coordinates whose gradient is tiny are compared against ``1e-4 * max|grad|``
    instead of their own magnitude.
    """
    model = init_model(method, n, METHOD_HYPER[method], seed=seed, scales=TEST_SCALES)
    rng = np.random.default_rng(seed + 7)
    x = rng.uniform(-0.5, 0.5, size=(n_data, 2 * n))
    y = x + 0.1 * rng.normal(size=x.shape)
    data = SnapshotDataset(n, h, x, y)
    _, grad = loss_and_grad(model, data)
    theta = model.get_flat()
    fd = np.zeros_like(theta)
    for i in range(theta.size):
        t = theta.copy()
        t[i] += fd_step
        model.set_flat(t)
        up = mse_loss(model, data)
        t[i] -= 2 * fd_step
        model.set_flat(t)
        down = mse_loss(model, data)
        fd[i] = (up - down) / (2 * fd_step)
    model.set_flat(theta)
    floor = 1e-4 * max(np.max(np.abs(fd)), 1e-300)
    return float(np.max(np.abs(fd - grad) / np.maximum(np.abs(fd), floor)))


def random_quadratic(n: int, rng, scale: float = 0.5) -> MultiPoly:
    M = rng.normal(size=(2 * n, 2 * n)) * scale
    return MultiPoly.quadratic_form(M + M.T)


def bch_slopes(n: int, k: int, orders=(1, 2, 3, 4), seed: int = 0,
               hs=(0.2, 0.1, 0.05, 0.025)) -> dict[int, float]:
    """Fitted log-log slope of |backward_error_map - matrix-log oracle| against h."""
    rng = np.random.default_rng(seed)
    basis = [random_quadratic(n, rng) for _ in range(k)]
    slopes = {}
    for p in orders:
        errs = []
        for h in hs:
            exact = quad_matrix_log_oracle(basis, h)
            approx = backward_error_map(basis, h, p)
            diff = approx - exact
            errs.append(max((abs(c) for _, c in diff), default=0.0))
        slopes[p] = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return slopes


def factorization_error(n: int, seed: int = 0, h: float = 0.1) -> tuple[float, int]:
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2 * n, 2 * n))
    M = scipy.linalg.expm(h * symplectic_matrix(n) @ (A + A.T))
    model = model_from_symplectic_matrix(M, h)
    X = rng.normal(size=(20, 2 * n))
    return float(np.max(np.abs(model.forward(X, h) - X @ M.T))), len(model.layers)


def run_checks(quick: bool = True, log: Callable[[str], None] | None = None) -> list[CheckResult]:
    n_values = (1, 2) if quick else (1, 2, 4)
    results = []

    def add(name, value, tol, passed=None, note=""):
        ok = (value < tol) if passed is None else passed
        r = CheckResult(name, value, tol, bool(ok), note)
        results.append(r)
        if log:
            log(r.line())

    add("shear exactness", shear_exactness(n_values), 1e-10)
    for method in METHODS:
        for n in n_values:
            s = model_structure(method, n)
            add(f"{method} n={n} symplecticity", s["symplecticity"], 1e-8)
            add(f"{method} n={n} volume", s["volume"], 1e-8)
            add(f"{method} n={n} inverse", s["inverse"], 1e-12)
            norm = backward_stability(method, n)
            add(f"{method} n={n} backward stability", norm, 1 - 1e-8, passed=norm >= 1 - 1e-8,
                note="min spectral norm")
        add(f"{method} gradient vs FD", gradient_error(method), 1e-6)
    for n in (1, 2):
        slopes = bch_slopes(n, 2 if n == 1 else 4, orders=(1, 2, 3))
        for p, slope in slopes.items():
            add(f"BCH slope 2n={2 * n} p={p}", abs(slope - (p + 1)), 0.3, note=f"slope {slope:.2f}")
    for n in n_values:
        err, count = factorization_error(n)
        add(f"factorization n={n}", err, 1e-10, passed=err < 1e-10 and count <= 4 * n,
            note=f"{count} layers")
    return results
