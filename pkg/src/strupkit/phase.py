"""Canonical phase-space primitives.

Coordinates are always ordered ``x = (p_1..p_n, q_1..q_n)``.  Phase vectors
are plain float arrays whose last axis has length ``2n``; leading axes are
treated as a batch.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DimensionError, EvaluationError

DEFAULT_FD_STEP = 1e-5


def half_dim(x: np.ndarray) -> int:
    size = np.shape(x)[-1]
    if size % 2:
        raise DimensionError(f"phase vector length must be even, got {size}")
    return size // 2


def split(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = half_dim(x)
    return x[..., :n], x[..., n:]


def apply_J(v: np.ndarray) -> np.ndarray:
    """Left-multiply by ``J = [[0, -I], [I, 0]]`` without forming ``J``."""
    v = np.asarray(v, dtype=float)
    vp, vq = split(v)
    return np.concatenate([-vq, vp], axis=-1)


def symplectic_matrix(n: int) -> np.ndarray:
    if n < 1:
        raise DimensionError(f"dim_n must be positive, got {n}")
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                fd_step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of ``fn`` at ``x``."""
    x = np.asarray(x, dtype=float)
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    dim = x.shape[-1]
    # all 2*dim perturbed points in one batched call
    offsets = np.eye(dim) * fd_step
    plus, minus = x + offsets, x - offsets
    # divide by the step actually represented in floating point
    spread = np.diag(plus - minus)
    values = np.asarray(fn(np.concatenate([plus, minus], axis=0)), dtype=float)
    if not np.all(np.isfinite(values)):
        raise EvaluationError("map returned non-finite values during differencing")
    return ((values[:dim] - values[dim:]) / spread[:, None]).T


def symplecticity_residual(fn, x, fd_step: float = DEFAULT_FD_STEP) -> float:
    """Max-norm of ``K^T J K - J`` for the finite-difference Jacobian ``K``."""
    K = fd_jacobian(fn, x, fd_step)
    J = symplectic_matrix(K.shape[0] // 2)
    return float(np.max(np.abs(K.T @ J @ K - J)))


def volume_residual(fn, x, fd_step: float = DEFAULT_FD_STEP) -> float:
    K = fd_jacobian(fn, x, fd_step)
    return float(abs(np.linalg.det(K) - 1.0))
