"""Benchmark Hamiltonian systems, a reference integrator and snapshot datasets."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import AccuracyError, ConfigurationError, DimensionError, UnknownSystemError
from .phase import apply_J, split
from .poly import MultiPoly

DATASET_RNG = "numpy.random.default_rng (PCG64)"


@dataclass(frozen=True)
class HamiltonianSystem:
    name: str
    dim_n: int
    eval_H: Callable[[np.ndarray], np.ndarray]
    grad_H: Callable[[np.ndarray], np.ndarray]
    poly_form: Optional[MultiPoly] = None
    matrix: Optional[np.ndarray] = None   # A for quadratic systems H = 1/2 x^T A x

    def vector_field(self, x):
        return apply_J(self.grad_H(x))


def _quadratic_system(name, A, separable_poly=True):
    A = np.asarray(A, dtype=float)
    return HamiltonianSystem(
        name=name,
        dim_n=A.shape[0] // 2,
        eval_H=lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, A, x),
        grad_H=lambda x: np.asarray(x) @ A,
        poly_form=MultiPoly.quadratic_form(A),
        matrix=A,
    )


def henon_heiles() -> HamiltonianSystem:
    def H(x):
        p, q = split(np.asarray(x, dtype=float))
        return (0.5 * np.sum(p ** 2 + q ** 2, axis=-1)
                + q[..., 0] ** 2 * q[..., 1] + q[..., 1] ** 3)

    def grad(x):
        x = np.asarray(x, dtype=float)
        p, q = split(x)
        q1, q2 = q[..., 0], q[..., 1]
        gq1 = q1 + 2 * q1 * q2
        gq2 = q2 + q1 ** 2 + 3 * q2 ** 2
        return np.concatenate([p, np.stack([gq1, gq2], axis=-1)], axis=-1)

    poly = MultiPoly(2, {(2, 0, 0, 0): 0.5, (0, 2, 0, 0): 0.5, (0, 0, 2, 0): 0.5,
                         (0, 0, 0, 2): 0.5, (0, 0, 2, 1): 1.0, (0, 0, 0, 3): 1.0})
    return HamiltonianSystem("henon-heiles", 2, H, grad, poly)


def fpu(n: int = 4) -> HamiltonianSystem:
    """Chain with ``q_{n+1} := 0``: sum of p_i^2/2 + d^2/2 + d^4/4, ``d = q_{i+1} - q_i``."""
    def diffs(q):
        nxt = np.concatenate([q[..., 1:], np.zeros(q.shape[:-1] + (1,))], axis=-1)
        return nxt - q

    def H(x):
        p, q = split(np.asarray(x, dtype=float))
        d = diffs(q)
        return np.sum(0.5 * p ** 2 + 0.5 * d ** 2 + 0.25 * d ** 4, axis=-1)

    def grad(x):
        x = np.asarray(x, dtype=float)
        p, q = split(x)
        d = diffs(q)
        f = d + d ** 3                       # dV/dd_i
        gq = -f
        gq[..., 1:] += f[..., :-1]           # d_{i-1} depends on q_i with + sign
        return np.concatenate([p, gq], axis=-1)

    poly = MultiPoly(n)
    for i in range(n):
        poly = poly + MultiPoly.variable(n, i) ** 2 * 0.5
        d = MultiPoly.variable(n, n + i, -1.0)
        if i + 1 < n:
            d = d + MultiPoly.variable(n, n + i + 1)
        poly = poly + (d ** 2) * 0.5 + (d ** 4) * 0.25
    return HamiltonianSystem(f"fpu({n})", n, H, grad, poly)


def dense_linear(n: int = 10, seed: int = 0) -> HamiltonianSystem:
    """``H = 1/2 x^T (I + S) x`` with symmetric ``S``, entries (diagonal included) ~ U(0, 1)."""
    rng = np.random.default_rng(seed)
    U = rng.uniform(0.0, 1.0, size=(2 * n, 2 * n))
    S = np.triu(U) + np.triu(U, 1).T
    return _quadratic_system(f"dense-linear({n},{seed})", np.eye(2 * n) + S)


def wave(n: int = 50) -> HamiltonianSystem:
    """``H = 1/2 p^T p + 1/2 q^T L q`` with ``L`` tridiagonal (-2 on the diagonal, 1 off it)."""
    L = -2 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)
    A = np.block([[np.eye(n), np.zeros((n, n))], [np.zeros((n, n)), L]])
    return _quadratic_system(f"wave({n})", A)


def harmonic(n: int = 1) -> HamiltonianSystem:
    return _quadratic_system(f"harmonic({n})", np.eye(2 * n))


def toy_quadratic() -> HamiltonianSystem:
    """``H = 1/2 (p^2 + 2 p q + 3 q^2)``."""
    return _quadratic_system("toy-quadratic", np.array([[1.0, 1.0], [1.0, 3.0]]))


def double_mass_spring() -> HamiltonianSystem:
    A = np.diag([1.0, 1.0, 1.2, 1.2])
    A[2, 3] = A[3, 2] = -0.4
    return _quadratic_system("double-mass-spring", A)


def double_pendulum() -> HamiltonianSystem:
    def H(x):
        p, q = split(np.asarray(x, dtype=float))
        p1, p2, q1, q2 = p[..., 0], p[..., 1], q[..., 0], q[..., 1]
        d = q1 - q2
        num = p1 ** 2 + 2 * p2 ** 2 - 2 * p1 * p2 * np.cos(d)
        return num / (2 * (1 + np.sin(d) ** 2)) - 2 * np.cos(q1) - np.cos(q2)

    def grad(x):
        x = np.asarray(x, dtype=float)
        p, q = split(x)
        p1, p2, q1, q2 = p[..., 0], p[..., 1], q[..., 0], q[..., 1]
        d = q1 - q2
        c, s = np.cos(d), np.sin(d)
        den = 1 + s ** 2
        num = p1 ** 2 + 2 * p2 ** 2 - 2 * p1 * p2 * c
        # quotient rule for num / (2 den) in the angle difference
        dkin = (2 * p1 * p2 * s * den - num * 2 * s * c) / (2 * den ** 2)
        return np.stack([
            (p1 - p2 * c) / den,
            (2 * p2 - p1 * c) / den,
            dkin + 2 * np.sin(q1),
            -dkin + np.sin(q2),
        ], axis=-1)

    return HamiltonianSystem("double-pendulum", 2, H, grad)


_BUILDERS = {
    "henon-heiles": henon_heiles,
    "fpu": fpu,
    "dense-linear": dense_linear,
    "wave": wave,
    "double-pendulum": double_pendulum,
    "double-mass-spring": double_mass_spring,
    "harmonic": harmonic,
    "toy-quadratic": toy_quadratic,
}


def system_names() -> list[str]:
    return sorted(_BUILDERS)


def builtin_system(name: str, *args) -> HamiltonianSystem:
    """Look up a system by name.

    Parameterized systems accept arguments either positionally or inline,
    e.g. ``builtin_system("fpu", 4)`` or ``builtin_system("dense-linear(2,7)")``.
    """
    m = re.fullmatch(r"\s*([a-z\-]+)\s*(?:\(([^)]*)\))?\s*", name)
    if not m or m.group(1) not in _BUILDERS:
        raise UnknownSystemError(f"unknown system {name!r}; known: {', '.join(system_names())}")
    base = m.group(1)
    if m.group(2):
        try:
            args = tuple(int(a) for a in m.group(2).split(",") if a.strip()) + tuple(args)
        except ValueError as exc:
            raise UnknownSystemError(f"bad arguments in {name!r}") from exc
    try:
        return _BUILDERS[base](*args)
    except TypeError as exc:
        raise UnknownSystemError(f"bad arguments for {base!r}: {args}") from exc


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegratorConfig:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-13
    max_steps: int = 200_000

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ConfigurationError("integrator tolerances must be positive")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be positive")


class _Budget(Exception):
    pass


def _flow_one(grad_H, x0, h, cfg: IntegratorConfig):
    # DOP853 spends 12 evaluations per step
    limit = 12 * cfg.max_steps + 20
    calls = [0]

    def rhs(_t, y):
        calls[0] += 1
        if calls[0] > limit:
            raise _Budget
        return apply_J(grad_H(y))

    try:
        sol = solve_ivp(rhs, (0.0, h), x0, method="DOP853", rtol=cfg.rel_tol, atol=cfg.abs_tol)
    except _Budget:
        raise AccuracyError(f"reference integrator exceeded {cfg.max_steps} steps") from None
    if not sol.success:
        raise AccuracyError(f"reference integrator failed: {sol.message}")
    out = sol.y[:, -1]
    if not np.all(np.isfinite(out)):
        raise AccuracyError("reference integrator produced non-finite values")
    return out


def reference_flow(system, x, h: float, config: IntegratorConfig | None = None) -> np.ndarray:
    """High-accuracy time-``h`` flow of ``x' = J grad H(x)``.

    ``system`` is a :class:`HamiltonianSystem` or a bare gradient callable.
    Each row of a batch is integrated on its own, so a row's result never
    depends on the other rows.
    """
    cfg = config or IntegratorConfig()
    grad_H = system.grad_H if isinstance(system, HamiltonianSystem) else system
    x = np.asarray(x, dtype=float)
    if h == 0:
        return x.copy()
    if x.ndim == 1:
        return _flow_one(grad_H, x, float(h), cfg)
    return np.stack([_flow_one(grad_H, row, float(h), cfg) for row in x])


# --------------------------------------------------------------------------


@dataclass
class SnapshotDataset:
    dim_n: int
    h: float
    x: np.ndarray
    y: np.ndarray
    system: str = "unknown"
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 2 or self.x.shape[1] != 2 * self.dim_n:
            raise DimensionError(f"inconsistent dataset shapes {self.x.shape} / {self.y.shape}")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset contains non-finite values")

    def __len__(self):
        return self.x.shape[0]

    def swapped(self) -> "SnapshotDataset":
        return SnapshotDataset(self.dim_n, self.h, self.y, self.x, self.system, self.seed)

    def to_csv(self, path) -> None:
        header = f"# dim={2 * self.dim_n} h={self.h!r} system={self.system} seed={self.seed}"
        np.savetxt(path, np.hstack([self.x, self.y]), fmt="%.17g", delimiter=",",
                   header=header[2:], comments="# ")

    @classmethod
    def from_csv(cls, path) -> "SnapshotDataset":
        with open(path) as fh:
            first = fh.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing '# dim=... h=...' header")
        fields = dict(tok.split("=", 1) for tok in first[1:].split() if "=" in tok)
        try:
            dim = int(fields["dim"])
            h = float(fields["h"])
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}: header needs dim and h fields") from exc
        seed = fields.get("seed")
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        if data.shape[1] != 2 * dim:
            raise DimensionError(f"{path}: rows have {data.shape[1]} columns, expected {2 * dim}")
        return cls(dim // 2, h, data[:, :dim], data[:, dim:], fields.get("system", "unknown"),
                   None if seed in (None, "None") else int(seed))


def generate_dataset(system: HamiltonianSystem, n_data: int, h: float, seed: int,
                     config: IntegratorConfig | None = None) -> SnapshotDataset:
    """Initial points uniform in ``[-1/2, 1/2]^{2n}``, targets from :func:`reference_flow`."""
    if n_data < 1:
        raise ConfigurationError("n_data must be at least 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.5, 0.5, size=(n_data, 2 * system.dim_n))
    y = reference_flow(system, x, h, config)
    return SnapshotDataset(system.dim_n, float(h), x, y, system.name, seed)
