"""Dense matrix primitives: thin SVD, Gram matrices, rank truncation."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import ArgumentError, DecompositionError

__all__ = [
    "ThinSvd",
    "as_matrix",
    "thin_svd",
    "gram",
    "rank_truncate",
    "row_norms",
    "polar_factor",
]


class ThinSvd(NamedTuple):
    """Thin singular value decomposition ``m = u @ diag(s) @ v.T``."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.v.T


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce ``m`` to a finite 2-D float array or raise :class:`ArgumentError`."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ArgumentError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ArgumentError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f"{name} contains NaN or infinite entries")
    return arr


def thin_svd(m) -> ThinSvd:
    """Thin SVD with a deterministic sign convention.

    Each left singular vector is flipped (together with its right partner)
    so that its first entry of largest magnitude is non-negative.

    Raises
    ------
    DecompositionError
        If LAPACK fails to converge.
    """
    m = as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(
            f"SVD did not converge for a {m.shape[0]}x{m.shape[1]} matrix"
        ) from exc
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[pivot, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    return ThinSvd(u * signs, s, vt.T * signs)


def gram(x, n: int | None = None) -> np.ndarray:
    """Gram matrix of ``x / sqrt(n)``, i.e. ``x.T @ x / n``."""
    x = as_matrix(x, "x")
    if n is None:
        n = x.shape[0]
    if n != x.shape[0]:
        raise ArgumentError(f"x has {x.shape[0]} rows but n={n}")
    sigma = x.T @ x / n
    return (sigma + sigma.T) / 2


def rank_truncate(m, r: int) -> np.ndarray:
    """Frobenius-nearest matrix of rank at most ``r`` (Eckart-Young)."""
    m = as_matrix(m)
    k = min(m.shape)
    if not 1 <= r <= k:
        raise ArgumentError(f"rank r={r} outside [1, {k}]")
    svd = thin_svd(m)
    return (svd.u[:, :r] * svd.singular_values[:r]) @ svd.v[:, :r].T


def row_norms(m) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", m, m))


def polar_factor(m) -> tuple[np.ndarray, bool]:
    """Orthonormal-column polar factor ``U @ V.T`` of a tall matrix.

    Returns the factor and a flag that is set when ``m`` has fewer than
    ``m.shape[1]`` numerically nonzero singular values; the factor is then
    completed by the arbitrary orthonormal directions LAPACK returns.
    """
    svd = thin_svd(m)
    s = svd.singular_values
    degenerate = bool(s[-1] <= 1e-12 * max(s[0], np.finfo(float).tiny))
    return svd.u @ svd.v.T, degenerate
