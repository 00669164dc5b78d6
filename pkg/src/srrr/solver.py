"""Rank-constrained least squares with row-wise group Lasso penalties.

The estimator minimizes

.. math::

    Q(C) = ||Y - XC||_F^2 + n \\sum_j \\lambda_j ||C_j||

over ``rank(C) <= r``.  We write ``C = B A^T`` with ``A^T A = I_r`` so that
``||C_j|| = ||B_j||`` and alternate between

* a B-step: with ``A`` fixed the problem is the convex group Lasso
  ``||YA - XB||^2 + n sum_j lambda_j ||B_j||`` (up to a constant), solved
  by exact block coordinate descent over the rows of ``B``;
* an A-step: with ``B`` fixed the penalty does not depend on ``A`` and the
  best orthonormal ``A`` is the polar factor of ``Y^T X B`` (orthogonal
  Procrustes).

Both steps are exact minimizers of their block, so the objective never
increases.  Several starts are run and the lowest objective is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from numba import njit

from .exceptions import ArgumentError, DegenerateColumnError, InfeasiblePointError
from .linalg import as_matrix, polar_factor, row_norms
from .rrr import check_xy, fit_rrr

__all__ = [
    "SolverOptions",
    "FactoredCoefficient",
    "FitResult",
    "AStep",
    "as_weights",
    "objective",
    "group_soft_threshold",
    "solve_b_step",
    "solve_a_step",
    "fit_srrr",
    "kkt_violation",
    "fit_callbacks",
]

# Called as ``cb(x, y, weights, result)`` after every fit_srrr; for auditing.
fit_callbacks: list = []


@dataclass(frozen=True)
class SolverOptions:
    """Tuning knobs of :func:`fit_srrr`.

    ``tol`` is the relative objective decrease that ends the outer loop.
    ``inner_tol`` bounds the largest row update of a B-step sweep, measured
    as ``Sigma_jj * ||delta B_j||`` (the scale of the normalized gradient).
    The winning start gets a final B-step with ``polish_tol`` and
    ``polish_max_inner`` so that its blockwise optimality conditions hold
    tightly.
    """

    tol: float = 1e-8
    max_outer: int = 500
    max_inner: int = 100
    inner_tol: float = 1e-9
    polish_tol: float = 1e-12
    polish_max_inner: int = 10_000
    n_starts: int = 5
    init_ridge: float = 1e-4
    perturbation: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_starts < 1:
            raise ArgumentError("n_starts must be at least 1")
        if self.max_outer < 0 or self.max_inner < 1:
            raise ArgumentError("max_outer must be >= 0 and max_inner >= 1")
        if not (self.tol >= 0 and self.inner_tol >= 0 and self.polish_tol >= 0):
            raise ArgumentError("tolerances must be non-negative")
        if not self.init_ridge > 0:
            raise ArgumentError("init_ridge must be positive")


@dataclass(frozen=True)
class FactoredCoefficient:
    """Coefficient ``C = b @ a.T`` with orthonormal columns in ``a``."""

    b: np.ndarray
    a: np.ndarray

    def to_matrix(self) -> np.ndarray:
        return self.b @ self.a.T

    @property
    def rank_bound(self) -> int:
        return self.b.shape[1]


@dataclass
class FitResult:
    coefficient: FactoredCoefficient
    active_set: tuple[int, ...]
    objective_trace: list[float]
    converged: bool
    iterations: int
    degenerate_a_step: bool = False
    start_index: int = 0
    start_objectives: list[float] = field(default_factory=list)

    @property
    def coef(self) -> np.ndarray:
        """The ``(p, q)`` coefficient matrix."""
        return self.coefficient.to_matrix()

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


class AStep(NamedTuple):
    a: np.ndarray
    degenerate: bool


def as_weights(w, p: int) -> np.ndarray:
    """Validate penalty weights; a scalar is broadcast to all ``p`` predictors.

    ``np.inf`` marks a predictor that is forced out of the model.
    """
    lam = np.asarray(w, dtype=float)
    if lam.ndim == 0:
        lam = np.full(p, float(lam))
    if lam.shape != (p,):
        raise ArgumentError(f"expected {p} penalty weights, got shape {lam.shape}")
    if np.any(np.isnan(lam)) or np.any(lam < 0):
        raise ArgumentError("penalty weights must be non-negative (inf allowed)")
    if not np.any(np.isfinite(lam)):
        raise ArgumentError("at least one penalty weight must be finite")
    return lam


def group_soft_threshold(v, t: float) -> np.ndarray:
    """Proximal map of ``t * ||.||``: ``max(0, 1 - t/||v||) * v``.

    The boundary ``||v|| == t`` maps to zero.
    """
    v = np.asarray(v, dtype=float)
    if t < 0:
        raise ArgumentError("threshold must be non-negative")
    norm = np.linalg.norm(v)
    if norm <= t:
        return np.zeros_like(v)
    return (1.0 - t / norm) * v


def _penalty(b: np.ndarray, lam: np.ndarray, n: int) -> float:
    norms = row_norms(b)
    finite = np.isfinite(lam)
    if np.any(norms[~finite] > 0):
        bad = np.flatnonzero(~finite & (norms > 0))
        raise InfeasiblePointError(
            f"rows {bad.tolist()} have infinite penalty but are nonzero"
        )
    return float(n * np.dot(lam[finite], norms[finite]))


def objective(x, y, c: FactoredCoefficient, w) -> float:
    """Penalized objective at ``C = B A^T``; ``inf * 0`` counts as zero."""
    x, y = check_xy(x, y)
    n, p = x.shape
    lam = as_weights(w, p)
    b = as_matrix(c.b, "b")
    a = as_matrix(c.a, "a")
    if b.shape[0] != p or a.shape[0] != y.shape[1] or a.shape[1] != b.shape[1]:
        raise ArgumentError("factor shapes do not conform with x and y")
    resid = y - (x @ b) @ a.T
    return float(np.sum(resid * resid)) + _penalty(b, lam, n)


@njit(cache=True, nogil=True)
def _cd_sweeps(gmat, target, b, s, thresh, scale, tol, max_sweeps):
    # s == gmat @ b, kept in sync by row updates and recomputed every sweep
    # so incremental round-off cannot accumulate.
    p, r = b.shape
    z = np.empty(r)
    delta = np.empty(r)
    for sweep in range(max_sweeps):
        if sweep > 0:
            s[:, :] = gmat @ b
        max_change = 0.0
        for j in range(p):
            gjj = gmat[j, j]
            zz = 0.0
            for k in range(r):
                z[k] = target[j, k] - s[j, k] + gjj * b[j, k]
                zz += z[k] * z[k]
            znorm = np.sqrt(zz)
            if znorm <= thresh[j]:
                shrink = 0.0
            else:
                shrink = (1.0 - thresh[j] / znorm) / gjj
            dd = 0.0
            for k in range(r):
                new = shrink * z[k]
                delta[k] = new - b[j, k]
                b[j, k] = new
                dd += delta[k] * delta[k]
            if dd > 0.0:
                for i in range(p):
                    gij = gmat[i, j]
                    for k in range(r):
                        s[i, k] += gij * delta[k]
                change = gjj * np.sqrt(dd) * scale
                if change > max_change:
                    max_change = change
        if max_change <= tol:
            return sweep + 1, True
    return max_sweeps, False


def _b_step(gmat, target, b, thresh, n, tol, max_sweeps):
    b = np.ascontiguousarray(b, dtype=float).copy()
    s = gmat @ b
    sweeps, done = _cd_sweeps(
        gmat, np.ascontiguousarray(target), b, s, thresh, 1.0 / n, tol, max_sweeps
    )
    return b, sweeps, done


def _smooth_value(gmat, target, b, thresh):
    # half the B-step objective minus a constant: b'Gb/2 - t'b + sum thresh_j ||b_j||
    return (0.5 * float(np.sum(b * (gmat @ b))) - float(np.sum(target * b))
            + float(thresh @ row_norms(b)))


def _newton_refine(gmat, target, b, thresh, max_iter=50):
    """Newton steps on the active rows with the zero rows held fixed.

    On a fixed support the B-step objective is smooth, so Newton converges
    where coordinate descent crawls (nearly collinear columns).  Steps are
    backtracked until the objective strictly decreases.
    """
    b = b.copy()
    active = np.flatnonzero(row_norms(b) > 0)
    if active.size == 0:
        return b
    m, r = active.size, b.shape[1]
    g_aa = gmat[np.ix_(active, active)]
    value = _smooth_value(gmat, target, b, thresh)
    for _ in range(max_iter):
        rows = b[active]
        norms = row_norms(rows)
        units = rows / norms[:, None]
        grad = (gmat[active] @ b - target[active] + thresh[active, None] * units).ravel()
        hess = np.kron(g_aa, np.eye(r))
        for i in range(m):
            block = slice(i * r, (i + 1) * r)
            hess[block, block] += thresh[active[i]] / norms[i] * (
                np.eye(r) - np.outer(units[i], units[i]))
        try:
            step = np.linalg.solve(hess, grad).reshape(m, r)
        except np.linalg.LinAlgError:
            return b
        size = 1.0
        while size > 1e-10:
            trial = b.copy()
            trial[active] = rows - size * step
            trial_value = _smooth_value(gmat, target, trial, thresh)
            if trial_value < value:
                break
            size *= 0.5
        else:
            return b
        b, value = trial, trial_value
    return b


def _polish(gmat, target, b, thresh, n, tol, max_sweeps, rounds=5):
    """Tight B-step: coordinate descent, with Newton on the support if it stalls."""
    b, _, done = _b_step(gmat, target, b, thresh, n, tol, max_sweeps)
    for _ in range(rounds):
        if done:
            break
        b = _newton_refine(gmat, target, b, thresh)
        b, _, done = _b_step(gmat, target, b, thresh, n, tol, max_sweeps)
    return b


def _check_columns(x: np.ndarray, lam: np.ndarray) -> None:
    norms = np.sqrt(np.einsum("ij,ij->j", x, x))
    bad = np.flatnonzero((norms == 0) & np.isfinite(lam))
    if bad.size:
        raise DegenerateColumnError(
            f"predictor columns {bad.tolist()} are identically zero; "
            "drop them or give them an infinite penalty"
        )


def solve_b_step(
    x, ya, w, b_init, tol: float = 1e-9, max_iter: int = 100
) -> np.ndarray:
    """Minimize ``||YA - XB||^2 + n sum_j lambda_j ||B_j||`` over ``B``.

    Block coordinate descent over the rows ``j = 1..p``; each row update is
    the exact minimizer ``B_j <- S(X_j' R_j / ||X_j||^2, n lambda_j / (2 ||X_j||^2))``
    with ``R_j`` the partial residual and ``S`` the group soft-threshold.
    Rows with infinite weight stay zero.
    """
    x, ya = check_xy(x, ya)
    n, p = x.shape
    lam = as_weights(w, p)
    b = as_matrix(b_init, "b_init").copy()
    if b.shape != (p, ya.shape[1]):
        raise ArgumentError(f"b_init must have shape {(p, ya.shape[1])}")
    finite = np.isfinite(lam)
    if np.any(row_norms(b[~finite]) > 0):
        raise InfeasiblePointError("b_init has nonzero rows with infinite penalty")
    _check_columns(x, lam)
    xw = x[:, finite]
    out = np.zeros_like(b)
    out[finite], _, _ = _b_step(
        xw.T @ xw, xw.T @ ya, b[finite], n * lam[finite] / 2, n, tol, max_iter
    )
    return out


def _a_step(xty: np.ndarray, b: np.ndarray, a_prev: np.ndarray | None) -> AStep:
    m = xty.T @ b
    if not np.any(b) or not np.any(m):
        if a_prev is None:
            raise ArgumentError("B is zero and no previous A is available")
        return AStep(a_prev, True)
    a, degenerate = polar_factor(m)
    return AStep(a, degenerate)


def solve_a_step(x, y, b, a_prev=None) -> AStep:
    """Orthonormal ``A`` maximizing ``tr(A^T Y^T X B)``.

    The solution is the polar factor ``U V^T`` of ``Y^T X B``.  When that
    matrix has rank below ``r`` the null directions are completed
    arbitrarily and ``degenerate`` is set; a zero ``B`` returns ``a_prev``.
    """
    x, y = check_xy(x, y)
    b = as_matrix(b, "b")
    if b.shape[0] != x.shape[1]:
        raise ArgumentError("b must have one row per predictor")
    return _a_step(x.T @ y, b, a_prev)


def _objective_fast(xw, y, b, a, lam, n):
    resid = y - (xw @ b) @ a.T
    return float(np.sum(resid * resid)) + float(n * np.dot(lam, row_norms(b)))


def _complete_frame(a: np.ndarray, r: int) -> np.ndarray:
    """Extend orthonormal columns ``a`` (q x k) to a q x r frame."""
    q, k = a.shape
    if k >= r:
        return a[:, :r]
    basis = np.hstack([a, np.eye(q)])
    qmat, _ = np.linalg.qr(basis)
    return np.hstack([a, qmat[:, k:r]])


def _initial_frames(xw, y, r, opts: SolverOptions):
    p_w = xw.shape[1]
    pilot = fit_rrr(xw, y, min(r, p_w), ridge=opts.init_ridge)
    a_rrr = _complete_frame(pilot.right_vectors, r)
    frames = [a_rrr]
    seeds = np.random.SeedSequence(opts.seed).spawn(opts.n_starts)
    for k in range(1, opts.n_starts):
        rng = np.random.default_rng(seeds[k])
        noise = rng.standard_normal(a_rrr.shape)
        frames.append(polar_factor(a_rrr + opts.perturbation * noise)[0])
    return pilot.coefficient, frames


def _run_start(xw, y, gmat, xty, lam, a0, b0, opts: SolverOptions):
    n = xw.shape[0]
    thresh = n * lam / 2
    a = a0
    b, _, _ = _b_step(gmat, xty @ a, b0, thresh, n, opts.inner_tol, opts.max_inner)
    obj = _objective_fast(xw, y, b, a, lam, n)
    trace = [obj]
    converged = False
    degenerate = False
    iterations = 0
    for _ in range(opts.max_outer):
        a_new, deg = _a_step(xty, b, a)
        b_new, _, _ = _b_step(
            gmat, xty @ a_new, b, thresh, n, opts.inner_tol, opts.max_inner
        )
        obj_new = _objective_fast(xw, y, b_new, a_new, lam, n)
        iterations += 1
        if obj_new > obj:
            # round-off level increase: keep the previous iterate
            converged = True
            break
        degenerate = degenerate or deg
        decrease = (obj - obj_new) / max(obj, np.finfo(float).tiny)
        a, b, obj = a_new, b_new, obj_new
        trace.append(obj)
        if decrease <= opts.tol:
            converged = True
            break
    return b, a, trace, converged, iterations, degenerate


def fit_srrr(x, y, r: int, w, opts: SolverOptions | None = None) -> FitResult:
    """Fit the rank-constrained group Lasso problem by alternating minimization.

    Parameters
    ----------
    x : array of shape (n, p)
    y : array of shape (n, q)
    r : int
        Rank bound, ``1 <= r <= min(p, q)``.
    w : float or array of shape (p,)
        Per-predictor penalties ``lambda_j``; ``np.inf`` removes the
        predictor before iterating and returns an exactly zero row.
    opts : SolverOptions, optional

    Returns
    -------
    FitResult
        The best of ``opts.n_starts`` runs.  Start 0 is initialized from a
        ridge-stabilized reduced rank fit, the others from random
        perturbations of its response frame.
    """
    opts = opts or SolverOptions()
    x, y = check_xy(x, y)
    n, p = x.shape
    q = y.shape[1]
    if not 1 <= r <= min(p, q):
        raise ArgumentError(f"rank r={r} outside [1, min(p, q)={min(p, q)}]")
    lam = as_weights(w, p)
    _check_columns(x, lam)
    work = np.flatnonzero(np.isfinite(lam))
    xw = x[:, work]
    lam_w = lam[work]
    gmat = xw.T @ xw
    xty = xw.T @ y

    c_init, frames = _initial_frames(xw, y, r, opts)
    runs = []
    for a0 in frames:
        runs.append(_run_start(xw, y, gmat, xty, lam_w, a0, c_init @ a0, opts))
    finals = [run[2][-1] for run in runs]
    best = int(np.argmin(finals))
    b, a, trace, converged, iterations, degenerate = runs[best]

    polished = _polish(
        gmat, xty @ a, b, n * lam_w / 2, n, opts.polish_tol, opts.polish_max_inner
    )
    # exact descent; any increase is round-off far below the 1e-10 slack
    b = polished
    trace = trace + [_objective_fast(xw, y, b, a, lam_w, n)]

    b_full = np.zeros((p, r))
    b_full[work] = b
    active = tuple(int(j) for j in np.flatnonzero(row_norms(b_full) > 0))
    result = FitResult(
        coefficient=FactoredCoefficient(b_full, a),
        active_set=active,
        objective_trace=list(trace),
        converged=converged,
        iterations=iterations,
        degenerate_a_step=degenerate,
        start_index=best,
        start_objectives=finals,
    )
    for callback in fit_callbacks:
        callback(x, y, lam, result)
    return result


def kkt_violation(x, y, result: FitResult, w) -> float:
    """Largest violation of the A-fixed blockwise optimality conditions.

    With ``g_j = X_j^T (YA - XB) / n``: zero rows need
    ``||g_j|| <= lambda_j / 2``; active rows need
    ``g_j = (lambda_j / 2) B_j / ||B_j||``.  Rows with infinite weight are
    skipped.  The value is on the ``1/n`` scale of ``g_j``.
    """
    x, y = check_xy(x, y)
    n, p = x.shape
    lam = as_weights(w, p)
    b, a = result.coefficient.b, result.coefficient.a
    g = x.T @ (y @ a - x @ b) / n
    norms = row_norms(b)
    worst = 0.0
    for j in np.flatnonzero(np.isfinite(lam)):
        if norms[j] == 0:
            worst = max(worst, np.linalg.norm(g[j]) - lam[j] / 2)
        else:
            resid = g[j] - lam[j] / 2 * b[j] / norms[j]
            worst = max(worst, float(np.linalg.norm(resid)))
    return max(worst, 0.0)


def with_seed(opts: SolverOptions | None, seed: int) -> SolverOptions:
    return replace(opts or SolverOptions(), seed=seed)
