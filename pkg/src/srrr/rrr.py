"""Closed-form (optionally ridge-stabilized) reduced rank regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ArgumentError, IllConditionedDesignError
from .linalg import as_matrix, thin_svd

__all__ = ["RrrFit", "fit_rrr", "check_xy"]


@dataclass(frozen=True)
class RrrFit:
    coefficient: np.ndarray
    rank: int
    ridge_used: float
    right_vectors: np.ndarray


def check_xy(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ArgumentError(
            f"x has {x.shape[0]} rows but y has {y.shape[0]}; sample counts differ"
        )
    return x, y


def fit_rrr(x, y, r: int, ridge: float = 0.0) -> RrrFit:
    """Reduced rank regression of ``y`` on ``x`` with rank at most ``r``.

    Solves the ridge normal equations ``(X'X + ridge*n*I) C = X'Y`` and
    projects the solution onto the top ``r`` right singular vectors of the
    fitted values ``X C``.  With ``ridge=0`` and ``p < n`` this is the exact
    minimizer of ``||Y - XC||^2`` over ``rank(C) <= r``.

    Parameters
    ----------
    x : array of shape (n, p)
    y : array of shape (n, q)
    r : int
        Rank bound, ``1 <= r <= min(p, q)``.
    ridge : float
        Non-negative ridge stabilizer, scaled by ``n``.  Required to be
        positive when ``p >= n``.

    Returns
    -------
    RrrFit
    """
    x, y = check_xy(x, y)
    n, p = x.shape
    q = y.shape[1]
    if not 1 <= r <= min(p, q):
        raise ArgumentError(f"rank r={r} outside [1, min(p, q)={min(p, q)}]")
    if not (np.isfinite(ridge) and ridge >= 0):
        raise ArgumentError(f"ridge must be finite and non-negative, got {ridge}")
    if ridge == 0 and p >= n:
        raise IllConditionedDesignError(
            f"p={p} >= n={n} makes the normal equations singular; use a positive ridge"
        )
    xtx = x.T @ x
    xty = x.T @ y
    if ridge > 0:
        xtx = xtx + ridge * n * np.eye(p)
    try:
        factor = scipy.linalg.cho_factor(xtx, lower=True, check_finite=False)
        c_ridge = scipy.linalg.cho_solve(factor, xty, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedDesignError(
            "normal equations are singular; use a positive ridge"
        ) from exc
    if ridge == 0:
        diag = np.diag(factor[0])
        if diag.min() <= 1e-7 * diag.max():
            raise IllConditionedDesignError(
                "normal equations are numerically singular; use a positive ridge"
            )
    v_r = thin_svd(x @ c_ridge).v[:, :r]
    return RrrFit(c_ridge @ v_r @ v_r.T, r, float(ridge), v_r)
