"""Exact P-model representations of linear symplectic maps.

A symplectic matrix ``M`` acting on ``(p, q)`` is factored into unit
triangular symplectic matrices

    upper(S) = [[I, S], [0, I]]   (p -> p + S q)
    lower(S) = [[I, 0], [S, I]]   (q -> q + S p)

with ``M = lower(S4) upper(S3) lower(S2) upper(S1)`` when the top-left
block is invertible, plus one extra ``lower(-diag(delta))`` factor applied
first otherwise.  Each factor becomes at most ``n`` degree-2 ridge layers via
the spectral decomposition of its symmetric block.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import least_squares

from .errors import ArgumentError, FactorizationError
from .layers import RidgeLayer, pack_sym, sym_size, unpack_sym
from .model import SympNetModel
from .phase import symplectic_matrix

RESIDUAL_TOL = 1e-10
_EXHAUSTIVE_LIMIT = 10


@dataclass
class TriangularFactor:
    s: np.ndarray
    orientation: str  # "upper" or "lower"

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        if self.orientation not in ("upper", "lower"):
            raise ArgumentError(f"orientation must be 'upper' or 'lower', got {self.orientation!r}")
        if self.s.ndim != 2 or self.s.shape[0] != self.s.shape[1]:
            raise ArgumentError("factor block must be square")
        scale = max(1.0, float(np.max(np.abs(self.s)))) if self.s.size else 1.0
        if np.max(np.abs(self.s - self.s.T), initial=0.0) > 1e-14 * scale:
            raise ArgumentError("factor block must be symmetric")

    def matrix(self) -> np.ndarray:
        n = self.s.shape[0]
        I, Z = np.eye(n), np.zeros((n, n))
        if self.orientation == "upper":
            return np.block([[I, self.s], [Z, I]])
        return np.block([[I, Z], [self.s, I]])


@dataclass
class FactorizationResult:
    factors: list[TriangularFactor]          # application order: factors[0] acts first
    delta: Optional[np.ndarray] = None
    residual: float = 0.0
    refined: bool = False

    def product(self) -> np.ndarray:
        n = self.factors[0].s.shape[0]
        out = np.eye(2 * n)
        for f in self.factors:
            out = f.matrix() @ out
        return out


def triangular_to_layers(factor: TriangularFactor, h: float, tol: float = 1e-14) -> list[RidgeLayer]:
    """Degree-2 ridge layers whose composition is exactly ``factor.matrix()``.

    ``s = sum_i sigma_i v_i v_i^T``; each non-zero eigenvalue yields the
    layer ``c (v_i^T q)^2`` (upper) or ``c (v_i^T p)^2`` (lower) with
    ``c = -sigma_i / (2h)`` or ``+sigma_i / (2h)``.  Layers of one factor
    commute, so their order is immaterial.
    """
    if not h > 0:
        raise ArgumentError("timestep must be positive")
    s = factor.s
    n = s.shape[0]
    sigma, V = np.linalg.eigh(0.5 * (s + s.T))
    cutoff = tol * max(1.0, float(np.max(np.abs(sigma), initial=0.0)))
    layers = []
    for lam, v in zip(sigma, V.T):
        if abs(lam) <= cutoff:
            continue
        if factor.orientation == "upper":
            w, c = np.concatenate([np.zeros(n), v]), -lam / (2 * h)
        else:
            w, c = np.concatenate([v, np.zeros(n)]), lam / (2 * h)
        layers.append(RidgeLayer.poly(w, [c]))
    return layers


def _symmetric_factor_pair(E: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric ``(S3, S2)`` with ``S3 @ S2 = E``.

    Uses an invertible symmetric ``T`` with ``T E`` symmetric, which always
    exists for a real square matrix; then ``S3 = T^-1`` and ``S2 = T E``.
    """
    n = E.shape[0]
    if not np.any(E):
        return np.zeros((n, n)), np.zeros((n, n))
    k = sym_size(n)
    cols = []
    for j in range(k):
        e = np.zeros(k)
        e[j] = 1.0
        T = unpack_sym(e, n)
        cols.append((T @ E - E.T @ T).ravel())
    A = np.array(cols).T
    _, sv, Vt = np.linalg.svd(A)
    tol = 1e-10 * max(1.0, sv[0] if sv.size else 1.0)
    rank = int(np.sum(sv > tol))
    null = Vt[rank:]
    if null.shape[0] == 0:
        raise FactorizationError("no symmetric intertwiner found", np.inf)
    best, best_cond = None, np.inf
    for _ in range(32):
        T = unpack_sym(rng.normal(size=null.shape[0]) @ null, n)
        cond = np.linalg.cond(T)
        if cond < best_cond:
            best, best_cond = T, cond
        if cond < 1e3:
            break
    T = best
    S3 = np.linalg.inv(T)
    S2 = T @ E
    # balance the two factors' magnitudes
    tau = np.sqrt(max(np.linalg.norm(S2), 1e-300) / max(np.linalg.norm(S3), 1e-300))
    S3, S2 = S3 * tau, S2 / tau
    return 0.5 * (S3 + S3.T), 0.5 * (S2 + S2.T)


def _four_factor(M: np.ndarray, rng) -> list[np.ndarray]:
    n = M.shape[0] // 2
    A, B, C = M[:n, :n], M[:n, n:], M[n:, :n]
    S3, S2 = _symmetric_factor_pair(A - np.eye(n), rng)
    Ainv = np.linalg.inv(A)
    S1 = Ainv @ (B - S3)
    S4 = (C - S2) @ Ainv
    return [0.5 * (S + S.T) for S in (S1, S2, S3, S4)]


def _assemble(S: list[np.ndarray], delta) -> list[TriangularFactor]:
    factors = []
    if delta is not None:
        factors.append(TriangularFactor(-np.diag(delta), "lower"))
    S1, S2, S3, S4 = S
    factors += [TriangularFactor(S1, "upper"), TriangularFactor(S2, "lower"),
                TriangularFactor(S3, "upper"), TriangularFactor(S4, "lower")]
    return factors


def _residual(factors, M) -> float:
    return float(np.max(np.abs(FactorizationResult(factors).product() - M)))


def _choose_delta(M: np.ndarray) -> Optional[np.ndarray]:
    """0/1 vector making ``A + B diag(delta)`` well conditioned (None if ``A`` already is)."""
    n = M.shape[0] // 2
    A, B = M[:n, :n], M[:n, n:]
    if np.linalg.cond(A) < 1e8:
        return None
    if n <= _EXHAUSTIVE_LIMIT:
        best, best_cond = None, np.inf
        for size in range(1, n + 1):
            for idx in itertools.combinations(range(n), size):
                d = np.zeros(n)
                d[list(idx)] = 1.0
                cond = np.linalg.cond(A + B * d)
                if cond < best_cond:
                    best, best_cond = d, cond
            if best_cond < 1e6:
                break
        return best
    d = np.zeros(n)
    cond = np.linalg.cond(A)
    for i in range(n):
        trial = d.copy()
        trial[i] = 1.0
        c = np.linalg.cond(A + B * trial)
        if c < cond:
            d, cond = trial, c
    return d


def _refine(factors, M, delta):
    n = M.shape[0] // 2
    k = sym_size(n)
    start = np.concatenate([pack_sym(f.s) for f in factors[-4:]])

    def unpack(theta):
        S = [unpack_sym(theta[i * k:(i + 1) * k], n) for i in range(4)]
        return _assemble(S, delta)

    def fun(theta):
        return (FactorizationResult(unpack(theta)).product() - M).ravel()

    sol = least_squares(fun, start, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    return unpack(sol.x)


def factor_symplectic(M, seed: int = 0) -> FactorizationResult:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise ArgumentError("expected a square matrix of even size")
    n = M.shape[0] // 2
    J = symplectic_matrix(n)
    scale = max(1.0, float(np.max(np.abs(M))) ** 2)
    if np.max(np.abs(M.T @ J @ M - J)) > 1e-10 * scale:
        raise ArgumentError("matrix is not symplectic")
    rng = np.random.default_rng(seed)
    delta = _choose_delta(M)
    target = M if delta is None else M @ FactorizationResult(
        [TriangularFactor(np.diag(delta), "lower")]).product()
    try:
        S = _four_factor(target, rng)
        factors = _assemble(S, delta)
        res = _residual(factors, M)
    except (np.linalg.LinAlgError, FactorizationError):
        factors = _assemble([np.zeros((n, n))] * 4, delta)
        res = np.inf
    refined = False
    if not res < RESIDUAL_TOL:
        factors = _refine(factors, M, delta)
        res = _residual(factors, M)
        refined = True
        if not res < RESIDUAL_TOL:
            raise FactorizationError(f"factorization residual {res:.2e} above {RESIDUAL_TOL}", res)
    return FactorizationResult(factors, delta, res, refined)


def model_from_symplectic_matrix(M, h: float, seed: int = 0) -> SympNetModel:
    """Degree-2 P model whose time-``h`` map equals ``M`` exactly."""
    result = factor_symplectic(M, seed)
    n = np.asarray(M).shape[0] // 2
    layers = []
    for f in result.factors:
        layers.extend(triangular_to_layers(f, h))
    return SympNetModel(n, "P", layers, {"layers": len(layers), "degree": 2},
                        {"factorization_residual": result.residual,
                         "delta": None if result.delta is None else result.delta.tolist()})


def matrix_flow_oracle(A, h: float, x):
    """``expm(h J A) x`` for the quadratic Hamiltonian ``1/2 x^T A x``."""
    A = np.asarray(A, dtype=float)
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(A))):
        raise ArgumentError("A must be symmetric")
    E = scipy.linalg.expm(h * symplectic_matrix(A.shape[0] // 2) @ A)
    return np.asarray(x, dtype=float) @ E.T
