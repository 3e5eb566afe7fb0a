"""Sparse multivariate polynomials over the phase-space variables.

A :class:`MultiPoly` maps exponent multi-indices (tuples of length ``2n``) to
float coefficients.  Variable ``x_i`` is the ``i``-th phase coordinate, so for
``n = 2`` the variables are ``(p_1, p_2, q_1, q_2) = (x_0, x_1, x_2, x_3)``.
"""
from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionError, UndefinedMetricError

DROP_TOL = 1e-14


def _aggregate(exps: np.ndarray, coefs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum coefficients of duplicate exponent rows."""
    if exps.shape[0] == 0:
        return exps, coefs
    uniq, inverse = np.unique(exps, axis=0, return_inverse=True)
    summed = np.bincount(inverse.ravel(), weights=coefs, minlength=len(uniq))
    return uniq, summed


class MultiPoly:
    """Immutable sparse polynomial in ``2 * dim_n`` variables."""

    __slots__ = ("dim_n", "_terms", "_arrays")

    def __init__(self, dim_n: int, terms: Mapping[tuple, float] | None = None,
                 drop_tol: float = DROP_TOL):
        if dim_n < 1:
            raise DimensionError(f"dim_n must be positive, got {dim_n}")
        self.dim_n = int(dim_n)
        clean = {}
        for idx, c in (terms or {}).items():
            idx = tuple(int(a) for a in idx)
            if len(idx) != 2 * self.dim_n:
                raise DimensionError(
                    f"multi-index {idx} has length {len(idx)}, expected {2 * self.dim_n}")
            if any(a < 0 for a in idx):
                raise ValueError(f"negative exponent in {idx}")
            c = float(c)
            if abs(c) > drop_tol:
                clean[idx] = c
        self._terms = clean
        self._arrays = None

    # construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, dim_n: int) -> "MultiPoly":
        return cls(dim_n)

    @classmethod
    def constant(cls, dim_n: int, value: float) -> "MultiPoly":
        return cls(dim_n, {(0,) * (2 * dim_n): value})

    @classmethod
    def variable(cls, dim_n: int, i: int, coef: float = 1.0) -> "MultiPoly":
        idx = [0] * (2 * dim_n)
        idx[i] = 1
        return cls(dim_n, {tuple(idx): coef})

    @classmethod
    def linear(cls, w: Iterable[float]) -> "MultiPoly":
        """The linear form ``w^T x``."""
        w = np.asarray(w, dtype=float)
        dim_n = w.shape[0] // 2
        eye = np.eye(w.shape[0], dtype=int)
        return cls(dim_n, {tuple(eye[i]): w[i] for i in range(w.shape[0])})

    @classmethod
    def quadratic_form(cls, M: np.ndarray) -> "MultiPoly":
        """The polynomial ``1/2 x^T M x`` for symmetric ``M``."""
        M = np.asarray(M, dtype=float)
        M = 0.5 * (M + M.T)
        dim = M.shape[0]
        terms = {}
        for i in range(dim):
            for j in range(i, dim):
                idx = [0] * dim
                idx[i] += 1
                idx[j] += 1
                terms[tuple(idx)] = 0.5 * M[i, i] if i == j else M[i, j]
        return cls(dim // 2, terms)

    @classmethod
    def _from_arrays(cls, dim_n, exps, coefs, drop_tol=DROP_TOL) -> "MultiPoly":
        exps, coefs = _aggregate(exps, coefs)
        keep = np.abs(coefs) > drop_tol
        out = cls.__new__(cls)
        out.dim_n = dim_n
        out._terms = {tuple(int(a) for a in e): float(c)
                      for e, c in zip(exps[keep], coefs[keep])}
        out._arrays = None
        return out

    # basic protocol -------------------------------------------------------

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    @property
    def nvars(self) -> int:
        return 2 * self.dim_n

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Exponents ``(T, 2n)`` and coefficients ``(T,)`` in lexicographic order."""
        if self._arrays is None:
            keys = sorted(self._terms)
            exps = np.array(keys, dtype=np.int64).reshape(len(keys), self.nvars)
            coefs = np.array([self._terms[k] for k in keys], dtype=float)
            self._arrays = (exps, coefs)
        return self._arrays

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(sorted(self._terms.items()))

    def __getitem__(self, idx) -> float:
        return self._terms.get(tuple(idx), 0.0)

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        return max((sum(k) for k in self._terms), default=0)

    def __eq__(self, other):
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.dim_n == other.dim_n and self._terms == other._terms

    def __hash__(self):
        return hash((self.dim_n, frozenset(self._terms.items())))

    def __repr__(self):
        return f"MultiPoly(dim_n={self.dim_n}, {self.pretty()})"

    def _check(self, other: "MultiPoly"):
        if not isinstance(other, MultiPoly):
            raise TypeError(f"expected MultiPoly, got {type(other).__name__}")
        if other.dim_n != self.dim_n:
            raise DimensionError(f"dim_n mismatch: {self.dim_n} vs {other.dim_n}")

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = MultiPoly.constant(self.dim_n, other)
        self._check(other)
        terms = dict(self._terms)
        for k, c in other._terms.items():
            terms[k] = terms.get(k, 0.0) + c
        return MultiPoly(self.dim_n, terms)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c: float) -> "MultiPoly":
        return MultiPoly(self.dim_n, {k: c * v for k, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return self.scale(float(other))
        self._check(other)
        if self.is_zero() or other.is_zero():
            return MultiPoly(self.dim_n)
        e1, c1 = self.arrays()
        e2, c2 = other.arrays()
        exps = (e1[:, None, :] + e2[None, :, :]).reshape(-1, self.nvars)
        coefs = (c1[:, None] * c2[None, :]).ravel()
        return MultiPoly._from_arrays(self.dim_n, exps, coefs)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = MultiPoly.constant(self.dim_n, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def diff(self, i: int) -> "MultiPoly":
        """Exact partial derivative with respect to ``x_i``."""
        terms = {}
        for k, c in self._terms.items():
            if k[i]:
                idx = list(k)
                idx[i] -= 1
                terms[tuple(idx)] = c * k[i]
        return MultiPoly(self.dim_n, terms)

    def truncate_degree(self, max_degree: int) -> "MultiPoly":
        return MultiPoly(self.dim_n, {k: c for k, c in self._terms.items() if sum(k) <= max_degree})

    # evaluation -----------------------------------------------------------

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.nvars:
            raise DimensionError(f"expected {self.nvars} coordinates, got {x.shape[-1]}")
        exps, coefs = self.arrays()
        if not len(coefs):
            return np.zeros(x.shape[:-1])
        monos = np.prod(x[..., None, :] ** exps, axis=-1)
        return monos @ coefs

    # text formats ---------------------------------------------------------

    def to_text(self) -> str:
        """One ``e_1 ... e_2n : coefficient`` line per term, lexicographic order."""
        lines = [" ".join(str(a) for a in k) + " : " + repr(c) for k, c in self]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, dim_n: int | None = None) -> "MultiPoly":
        terms = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                lhs, rhs = line.split(":")
                idx = tuple(int(a) for a in lhs.split())
                coef = float(rhs)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: cannot parse {line!r}") from exc
            if dim_n is None:
                if len(idx) % 2:
                    raise DimensionError(f"line {lineno}: odd number of exponents")
                dim_n = len(idx) // 2
            terms[idx] = terms.get(idx, 0.0) + coef
        if dim_n is None:
            raise ValueError("empty polynomial file; dim_n cannot be inferred")
        return cls(dim_n, terms)

    def pretty(self, digits: int = 10, rel_cutoff: float = 0.0) -> str:
        """Human-readable form such as ``0.5 x_0^2 - 0.4 x_2 x_3``.

        Terms are listed in descending lexicographic order of the multi-index.
        Coefficients smaller than ``rel_cutoff * max|c|`` are omitted.
        """
        if not self._terms:
            return "0"
        cmax = max(abs(c) for c in self._terms.values())
        parts = []
        for k in sorted(self._terms, reverse=True):
            c = self._terms[k]
            if abs(c) < rel_cutoff * cmax:
                continue
            mono = " ".join(f"x_{i}" if a == 1 else f"x_{i}^{a}"
                            for i, a in enumerate(k) if a)
            mag = f"{abs(c):.{digits}g}"
            body = f"{mag} {mono}".strip()
            if not parts:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append(("- " if c < 0 else "+ ") + body)
        return " ".join(parts) if parts else "0"


def poly_arith(a: MultiPoly, b, op: str) -> MultiPoly:
    """Dispatch helper: ``op`` is ``add``, ``sub``, ``mul`` or ``scale``.

    For ``scale`` the second argument is the scalar.
    """
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "scale":
        return a.scale(float(b))
    raise ValueError(f"unknown operation {op!r}")


def poly_grad(h: MultiPoly) -> list[MultiPoly]:
    return [h.diff(i) for i in range(h.nvars)]


def poisson_bracket(f: MultiPoly, g: MultiPoly) -> MultiPoly:
    """``{f, g} = grad(f)^T J grad(g)``, computed coefficient-wise.

    With ``J = [[0, -I], [I, 0]]`` this is ``sum_i f_{q_i} g_{p_i} - f_{p_i} g_{q_i}``.
    """
    f._check(g)
    n = f.dim_n
    out = MultiPoly(n)
    for i in range(n):
        fp, fq = f.diff(i), f.diff(n + i)
        gp, gq = g.diff(i), g.diff(n + i)
        if not (fq.is_zero() or gp.is_zero()):
            out = out + fq * gp
        if not (fp.is_zero() or gq.is_zero()):
            out = out - fp * gq
    return out


def coefficient_mae(learned: MultiPoly, truth: MultiPoly, support: str = "union") -> float:
    """Mean absolute coefficient error.

    ``support="union"`` averages over every monomial that is non-zero in
    either polynomial; ``"intersection"`` only over monomials non-zero in both.
    """
    learned._check(truth)
    a, b = learned._terms, truth._terms
    if support == "union":
        keys = set(a) | set(b)
    elif support == "intersection":
        keys = set(a) & set(b)
    else:
        raise ValueError(f"unknown support {support!r}")
    if not keys:
        raise UndefinedMetricError("no non-zero coefficients to average over")
    return float(np.mean([abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys]))
