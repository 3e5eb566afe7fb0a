"""Truncated BCH series on Poisson brackets and the backward error map.

The BCH series ``log(e^X e^Y)`` is generated once, exactly, in the free
associative algebra on two letters and converted to left-normed Lie brackets
with the Dynkin-Specht-Wever projection.  Evaluating those brackets with the
Poisson bracket gives the generating Hamiltonian of ``phi_A o phi_B``.

Series are handled *graded*: a series is a dict ``{j: MultiPoly}`` standing for
``sum_j h^j P_j``.  Every bracket contributes one power of ``h``, and grades
above the truncation order are dropped, so folding over many layers stays
consistent to ``O(h^{p+1})`` without degree blow-up.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np
import scipy.linalg

from .errors import ArgumentError, CapabilityError, ConvergenceError
from .phase import symplectic_matrix
from .poly import MultiPoly, poisson_bracket

MAX_ORDER = 6


@lru_cache(maxsize=None)
def bch_lie_coefficients(order: int) -> tuple[tuple[tuple[int, ...], Fraction], ...]:
    """Left-normed bracket words and rational weights of ``log(e^X e^Y)``.

    Returns pairs ``(word, c)`` with letters ``0 = X`` and ``1 = Y`` such that
    ``log(e^X e^Y) = sum c [..[[w_1, w_2], w_3].., w_m]`` through degree
    ``order + 1``.  Zero weights are omitted.
    """
    top = order + 1

    def mul(a, b):
        out = {}
        for wa, ca in a.items():
            for wb, cb in b.items():
                if len(wa) + len(wb) <= top:
                    w = wa + wb
                    out[w] = out.get(w, 0) + ca * cb
        return out

    W = {}
    for i in range(top + 1):
        for j in range(top + 1 - i):
            if i + j:
                W[(0,) * i + (1,) * j] = Fraction(1, factorial(i) * factorial(j))
    log = {}
    power = {(): Fraction(1)}
    for m in range(1, top + 1):
        power = mul(power, W)
        sign = Fraction((-1) ** (m + 1), m)
        for w, c in power.items():
            log[w] = log.get(w, 0) + sign * c
    words = []
    for w in sorted(log, key=lambda w: (len(w), w)):
        c = log[w] / len(w)
        if c == 0 or (len(w) > 1 and w[0] == w[1]):
            continue
        words.append((w, c))
    return tuple(words)


def _check_order(order) -> int:
    p = int(getattr(order, "p", order))
    if p < 0:
        raise ArgumentError(f"BCH order must be non-negative, got {p}")
    if p > MAX_ORDER:
        raise CapabilityError(f"BCH order {p} exceeds the implemented ceiling {MAX_ORDER}")
    return p


def _series_add(a: dict, b: dict, scale: float = 1.0) -> dict:
    out = dict(a)
    for g, poly in b.items():
        term = poly.scale(scale) if scale != 1.0 else poly
        out[g] = out[g] + term if g in out else term
    return {g: p for g, p in out.items() if not p.is_zero()}


def _series_bracket(a: dict, b: dict, p: int) -> dict:
    out = {}
    for ga, pa in a.items():
        for gb, pb in b.items():
            g = ga + gb + 1
            if g > p:
                continue
            term = poisson_bracket(pa, pb)
            if term.is_zero():
                continue
            out[g] = out[g] + term if g in out else term
    return out


def bch_series(a: dict, b: dict, p: int) -> dict:
    """Graded generator of ``phi_a o phi_b`` (``b`` applied first), truncated at grade ``p``."""
    if not a:
        return dict(b)
    if not b:
        return dict(a)
    letters = (a, b)
    prefix = {}
    result = {}
    for word, c in bch_lie_coefficients(p):
        if len(word) - 1 > p:
            continue
        node = letters[word[0]]
        for k in range(2, len(word) + 1):
            key = word[:k]
            if key not in prefix:
                prefix[key] = _series_bracket(node, letters[word[k - 1]], p) if node else {}
            node = prefix[key]
            if not node:
                break
        if node:
            result = _series_add(result, node, float(c))
    return result


def collapse(series: dict, h: float, dim_n: int) -> MultiPoly:
    out = MultiPoly(dim_n)
    for g in sorted(series):
        out = out + series[g].scale(h ** g)
    return out


def bch_pair(hA: MultiPoly, hB: MultiPoly, h: float, order) -> MultiPoly:
    """Order-``p`` generating Hamiltonian of ``phi_hA o phi_hB`` (``hB`` applied first)."""
    p = _check_order(order)
    hA._check(hB)
    a = {} if hA.is_zero() else {0: hA}
    b = {} if hB.is_zero() else {0: hB}
    return collapse(bch_series(a, b, p), h, hA.dim_n)


def backward_error_map(basis, h: float, order) -> MultiPoly:
    """Fold ``acc <- B^p_{H_i}(acc)`` over ``basis`` in application order.

    ``basis[0]`` is the first-applied layer Hamiltonian.  At order 0 this is
    the plain sum of the basis, i.e. the inverse modified Hamiltonian.
    """
    p = _check_order(order)
    basis = list(basis)
    if not basis:
        raise ArgumentError("backward_error_map needs a non-empty basis")
    dim_n = basis[0].dim_n
    acc: dict = {}
    for H in basis:
        if H.dim_n != dim_n:
            basis[0]._check(H)
        acc = bch_series({} if H.is_zero() else {0: H}, acc, p)
    return collapse(acc, h, dim_n)


def backward_error_series(basis, h: float, max_order: int) -> list[MultiPoly]:
    """``backward_error_map`` for every order ``0..max_order``."""
    return [backward_error_map(basis, h, p) for p in range(max_order + 1)]


def _quadratic_matrix(poly: MultiPoly) -> np.ndarray:
    dim = poly.nvars
    M = np.zeros((dim, dim))
    for idx, c in poly:
        if sum(idx) != 2:
            raise ArgumentError(f"oracle needs purely quadratic input, found term {idx}")
        nz = [i for i, a in enumerate(idx) for _ in range(a)]
        i, j = nz
        if i == j:
            M[i, i] += 2 * c
        else:
            M[i, j] += c
            M[j, i] += c
    return M


def quad_matrix_log_oracle(basis, h: float) -> MultiPoly:
    """Exact generating Hamiltonian of a composition of quadratic flows.

    Each ``1/2 x^T M_i x`` has flow ``expm(h J M_i)``; the product is taken in
    application order and its principal logarithm is mapped back to a
    quadratic form.
    """
    basis = list(basis)
    if not basis:
        raise ArgumentError("empty basis")
    dim_n = basis[0].dim_n
    J = symplectic_matrix(dim_n)
    prod = np.eye(2 * dim_n)
    for H in basis:
        basis[0]._check(H)
        prod = scipy.linalg.expm(h * J @ _quadratic_matrix(H)) @ prod
    eig = np.linalg.eigvals(prod)
    if np.any((np.abs(eig.imag) < 1e-12) & (eig.real <= 0)):
        raise ConvergenceError("product has eigenvalues on the closed negative real axis; "
                               "principal logarithm undefined")
    L = scipy.linalg.logm(prod)
    if np.iscomplexobj(L):
        if np.max(np.abs(L.imag)) > 1e-10 * max(1.0, np.max(np.abs(L.real))):
            raise ConvergenceError("matrix logarithm left the real principal branch")
        L = L.real
    M = -J @ L / h
    return MultiPoly.quadratic_form(0.5 * (M + M.T))
