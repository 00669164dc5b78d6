"""Two-stage adaptive group Lasso for sparse reduced rank regression.

Stage one fits a pilot with one common penalty.  Stage two refits with
per-predictor penalties ``lambda_adap * ||pilot row j||^(-beta)``; rows the
pilot zeroed get an infinite penalty and stay out of the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ArgumentError, EmptyModelError, SrrrError, TuningError
from .linalg import as_matrix, row_norms
from .rrr import check_xy
from .solver import FitResult, SolverOptions, fit_srrr

__all__ = [
    "AdaptiveConfig",
    "AdaptiveFitResult",
    "ZERO_ROW_TOL",
    "fit_pilot",
    "adaptive_weights",
    "fit_adaptive",
    "bic",
    "lambda_max",
    "default_lasso_grid",
    "default_adap_grid",
    "tune_pilot_bic",
    "tune_bic",
]

ZERO_ROW_TOL = 1e-12


def _positive(value, name):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ArgumentError(f"{name} must be positive and finite, got {value}")
    return value


@dataclass(frozen=True)
class AdaptiveConfig:
    lambda_lasso: float
    lambda_adap: float
    beta: float = 1.0

    def __post_init__(self):
        for name in ("lambda_lasso", "lambda_adap", "beta"):
            object.__setattr__(self, name, _positive(getattr(self, name), name))


@dataclass
class AdaptiveFitResult:
    pilot: FitResult
    weights: np.ndarray
    final: FitResult
    config: AdaptiveConfig

    @property
    def coef(self) -> np.ndarray:
        return self.final.coef


def fit_pilot(x, y, r: int, lambda_lasso: float, opts: SolverOptions | None = None):
    """Pilot fit with the same penalty ``lambda_lasso`` on every predictor."""
    lambda_lasso = float(lambda_lasso)
    if not (math.isfinite(lambda_lasso) and lambda_lasso >= 0):
        raise ArgumentError(f"lambda_lasso must be finite and >= 0, got {lambda_lasso}")
    x, y = check_xy(x, y)
    return fit_srrr(x, y, r, np.full(x.shape[1], lambda_lasso), opts)


def adaptive_weights(pilot_c, lambda_adap: float, beta: float = 1.0) -> np.ndarray:
    """Per-predictor penalties built from a pilot coefficient matrix.

    ``lambda_adap * ||row_j||**(-beta)`` for nonzero rows, ``inf`` for rows
    with norm at most ``ZERO_ROW_TOL``.
    """
    pilot_c = as_matrix(pilot_c, "pilot_c")
    lambda_adap = _positive(lambda_adap, "lambda_adap")
    beta = _positive(beta, "beta")
    norms = row_norms(pilot_c)
    weights = np.full(norms.shape, np.inf)
    alive = norms > ZERO_ROW_TOL
    weights[alive] = lambda_adap * norms[alive] ** (-beta)
    return weights


def _final_fit(x, y, r, pilot, config, opts):
    weights = adaptive_weights(pilot.coef, config.lambda_adap, config.beta)
    final = fit_srrr(x, y, r, weights, opts)
    return AdaptiveFitResult(pilot, weights, final, config)


def fit_adaptive(
    x, y, r: int, config: AdaptiveConfig, opts: SolverOptions | None = None
) -> AdaptiveFitResult:
    """Pilot fit, adaptive weights, then the weighted refit.

    Raises
    ------
    EmptyModelError
        If the pilot zeroes every row, leaving nothing to refit.
    """
    pilot = fit_pilot(x, y, r, config.lambda_lasso, opts)
    if not pilot.active_set:
        raise EmptyModelError(
            f"pilot fit with lambda_lasso={config.lambda_lasso:g} selected no "
            "predictors; use a smaller lambda_lasso"
        )
    return _final_fit(x, y, r, pilot, config, opts)


def bic(x, y, coef, r: int, active_size: int | None = None) -> float:
    """``n q log(RSS / (n q)) + log(n q) * r * (s_hat + q - r)``."""
    x, y = check_xy(x, y)
    n, q = y.shape
    if active_size is None:
        active_size = int(np.count_nonzero(row_norms(coef) > 0))
    resid = y - x @ coef
    rss = max(float(np.sum(resid * resid)), np.finfo(float).tiny)
    df = r * (active_size + q - r)
    return n * q * math.log(rss / (n * q)) + math.log(n * q) * df


def lambda_max(x, y) -> float:
    """Smallest common penalty at which every row of the fit is zero."""
    x, y = check_xy(x, y)
    return 2.0 * float(row_norms(x.T @ y).max()) / x.shape[0]


def default_lasso_grid(x, y, num: int = 10, ratio: float = 1e-2) -> np.ndarray:
    top = lambda_max(x, y)
    return np.geomspace(top, top * ratio, num)


def default_adap_grid(x, y, pilot_c, beta: float = 1.0, num: int = 10, ratio: float = 1e-3):
    """Log grid from the adaptive penalty that empties the model downwards."""
    x, y = check_xy(x, y)
    norms = row_norms(pilot_c)
    alive = norms > ZERO_ROW_TOL
    if not np.any(alive):
        raise EmptyModelError("pilot coefficient has no nonzero rows")
    corr = row_norms(x.T @ y)[alive]
    top = 2.0 * float(np.max(corr * norms[alive] ** beta)) / x.shape[0]
    return np.geomspace(top, top * ratio, num)


def _descending(grid, name):
    values = np.asarray(grid, dtype=float).ravel()
    if values.size == 0:
        raise ArgumentError(f"{name} must be non-empty")
    if not np.all(np.isfinite(values) & (values > 0)):
        raise ArgumentError(f"{name} must contain positive finite values")
    return np.sort(values)[::-1]


def _select(records):
    # grid is scanned largest-lambda first, so strict '<' breaks ties sparser
    best = None
    for rec in records:
        if rec.get("bic") is None:
            continue
        if best is None or rec["bic"] < best["bic"]:
            best = rec
    return best


def tune_pilot_bic(x, y, r: int, grid_lasso=None, opts: SolverOptions | None = None):
    """BIC choice of the common pilot penalty.

    Returns ``(lambda_lasso, pilot_fit, records)``; ``records`` holds one
    dict per grid point.  Raises :class:`TuningError` when every grid point
    fails or yields an empty model; argument errors such as a bad rank
    propagate unchanged.
    """
    x, y = check_xy(x, y)
    if grid_lasso is None:
        grid_lasso = default_lasso_grid(x, y)
    grid_lasso = _descending(grid_lasso, "grid_lasso")
    records = []
    pilots = {}
    for lam in grid_lasso:
        rec = {"stage": "lasso", "lambda": float(lam)}
        try:
            fit = fit_pilot(x, y, r, lam, opts)
        except ArgumentError:
            raise
        except SrrrError as exc:
            rec["error"] = f"{exc.category}: {exc}"
        else:
            rec["active_size"] = len(fit.active_set)
            if fit.active_set:
                rec["bic"] = bic(x, y, fit.coef, r, len(fit.active_set))
                pilots[float(lam)] = fit
            else:
                rec["error"] = "empty model"
        records.append(rec)
    chosen = _select(records)
    if chosen is None:
        raise TuningError("no lambda_lasso grid point gave a usable pilot", records)
    return chosen["lambda"], pilots[chosen["lambda"]], records


@dataclass
class TuningDetails:
    pilot_records: list[dict] = field(default_factory=list)
    adap_records: list[dict] = field(default_factory=list)
    pilot: FitResult | None = None
    result: AdaptiveFitResult | None = None


def tune_bic(
    x,
    y,
    r: int,
    grid_lasso=None,
    grid_adap=None,
    beta: float = 1.0,
    opts: SolverOptions | None = None,
    return_details: bool = False,
):
    """Pick ``(lambda_lasso, lambda_adap)`` by BIC, one stage at a time.

    ``lambda_lasso`` is chosen first from pilot fits; ``lambda_adap`` is then
    chosen with that pilot held fixed.  Fits with an empty active set are
    not eligible.  Grids default to log-spaced values below the penalty that
    zeroes every row.

    Returns
    -------
    AdaptiveConfig, or ``(AdaptiveConfig, TuningDetails)`` when
    ``return_details`` is true.  The details carry every grid point's BIC
    and the selected pilot and final fits.
    """
    x, y = check_xy(x, y)
    beta = _positive(beta, "beta")
    details = TuningDetails()

    lam_lasso, pilot, details.pilot_records = tune_pilot_bic(x, y, r, grid_lasso, opts)
    details.pilot = pilot

    if grid_adap is None:
        grid_adap = default_adap_grid(x, y, pilot.coef, beta)
    grid_adap = _descending(grid_adap, "grid_adap")
    finals = {}
    for lam in grid_adap:
        rec = {"stage": "adap", "lambda": float(lam)}
        config = AdaptiveConfig(lam_lasso, lam, beta)
        try:
            result = _final_fit(x, y, r, pilot, config, opts)
        except ArgumentError:
            raise
        except SrrrError as exc:
            rec["error"] = f"{exc.category}: {exc}"
        else:
            size = len(result.final.active_set)
            rec["active_size"] = size
            if size:
                rec["bic"] = bic(x, y, result.coef, r, size)
                finals[float(lam)] = result
            else:
                rec["error"] = "empty model"
        details.adap_records.append(rec)
    picked = _select(details.adap_records)
    if picked is None:
        raise TuningError(
            "no lambda_adap grid point gave a non-empty model",
            details.pilot_records + details.adap_records,
        )
    details.result = finals[picked["lambda"]]
    config = details.result.config
    if return_details:
        return config, details
    return config
