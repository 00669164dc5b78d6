"""scikit-learn compatible estimators.

All three share the factored form ``C = B A^T``: ``predict`` returns
``X C + intercept`` and ``transform`` returns the ``r`` latent scores
``X B``.  ``coef_`` follows the scikit-learn multi-output convention and
has shape ``(n_targets, n_features)``, i.e. it is ``C.T``.
"""

from __future__ import annotations

from numbers import Integral

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted, validate_data

from .adaptive import AdaptiveConfig, fit_adaptive, tune_bic, tune_pilot_bic
from .rrr import fit_rrr
from .solver import SolverOptions, fit_srrr

__all__ = [
    "ReducedRankRegressor",
    "SparseReducedRankRegressor",
    "AdaptiveSparseReducedRankRegressor",
]


class _FactoredRegressor(RegressorMixin, TransformerMixin, BaseEstimator):
    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.target_tags.multi_output = True
        return tags

    def _validate_xy(self, X, y):
        X, y = validate_data(self, X, y, multi_output=True, y_numeric=True,
                             ensure_min_samples=2)
        self._y_1d = y.ndim == 1
        y = y.reshape(len(y), -1)
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.fit_intercept:
            self._x_offset = X.mean(axis=0)
            self._y_offset = y.mean(axis=0)
        else:
            self._x_offset = np.zeros(X.shape[1])
            self._y_offset = np.zeros(y.shape[1])
        return X - self._x_offset, y - self._y_offset

    def _set_factors(self, b, a):
        self.B_ = b
        self.A_ = a
        c = b @ a.T
        self.coef_ = c.T
        self.intercept_ = self._y_offset - self._x_offset @ c
        self.support_ = np.any(c != 0, axis=1)
        if self._y_1d:
            self.coef_ = self.coef_.ravel()
            self.intercept_ = float(self.intercept_[0])

    def _solver_options(self):
        seed = self.random_state
        if seed is None or not isinstance(seed, Integral):
            seed = int(check_random_state(seed).randint(np.iinfo(np.int32).max))
        return SolverOptions(tol=self.tol, max_outer=self.max_outer,
                             n_starts=self.n_starts, seed=int(seed))

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        coef = np.atleast_2d(self.coef_)
        out = X @ coef.T + self.intercept_
        return out.ravel() if self._y_1d else out

    def transform(self, X):
        """Latent scores ``(X - mean) @ B``, shape ``(n_samples, rank)``."""
        check_is_fitted(self, "B_")
        X = validate_data(self, X, reset=False)
        return (X - self._x_offset) @ self.B_


class ReducedRankRegressor(_FactoredRegressor):
    """Unpenalized reduced rank regression.

    Parameters
    ----------
    rank : int
        Rank bound on the coefficient matrix.
    ridge : float, default=0.0
        Ridge stabilizer (scaled by ``n_samples``); needed when
        ``n_features >= n_samples``.
    fit_intercept : bool, default=False
        Center ``X`` and ``y`` before fitting.
    """

    def __init__(self, rank=1, ridge=0.0, fit_intercept=False):
        self.rank = rank
        self.ridge = ridge
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X, y = self._validate_xy(X, y)
        result = fit_rrr(X, y, self.rank, self.ridge)
        a = result.right_vectors
        self._set_factors(result.coefficient @ a, a)
        return self


class SparseReducedRankRegressor(_FactoredRegressor):
    """Reduced rank regression with a row-wise group Lasso penalty.

    Parameters
    ----------
    rank : int
    alpha : float or None
        Common penalty ``lambda`` on every predictor row.  ``None`` picks it
        by BIC over ``alpha_grid``.
    penalty_weights : array of shape (n_features,), optional
        Per-predictor penalties; overrides ``alpha``.  ``np.inf`` excludes a
        predictor.
    alpha_grid : array, optional
        Candidates for the BIC search; log-spaced below the all-zero penalty
        by default.
    fit_intercept : bool, default=False
    tol, max_outer, n_starts : solver settings, see :class:`SolverOptions`.
    random_state : int, RandomState or None, default=0
        Seeds the random restarts.

    Attributes
    ----------
    coef_ : ndarray of shape (n_targets, n_features)
    B_, A_ : factors with ``coef_.T == B_ @ A_.T`` and orthonormal ``A_``.
    support_ : boolean mask of predictors with nonzero coefficient rows.
    alpha_ : the penalty used (tuned or given).
    objective_trace_ : objective per outer iteration of the best start.
    """

    def __init__(self, rank=1, alpha=None, penalty_weights=None, alpha_grid=None,
                 fit_intercept=False, tol=1e-8, max_outer=500, n_starts=5,
                 random_state=0):
        self.rank = rank
        self.alpha = alpha
        self.penalty_weights = penalty_weights
        self.alpha_grid = alpha_grid
        self.fit_intercept = fit_intercept
        self.tol = tol
        self.max_outer = max_outer
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate_xy(X, y)
        opts = self._solver_options()
        self.tuning_records_ = None
        if self.penalty_weights is not None:
            self.alpha_ = None
            result = fit_srrr(X, y, self.rank, self.penalty_weights, opts)
        elif self.alpha is None:
            self.alpha_, result, self.tuning_records_ = tune_pilot_bic(
                X, y, self.rank, self.alpha_grid, opts)
        else:
            self.alpha_ = float(self.alpha)
            result = fit_srrr(X, y, self.rank, self.alpha_, opts)
        self._set_factors(result.coefficient.b, result.coefficient.a)
        self.objective_trace_ = list(result.objective_trace)
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        return self


class AdaptiveSparseReducedRankRegressor(_FactoredRegressor):
    """Two-stage adaptive group Lasso reduced rank regression.

    A pilot fit with common penalty ``lambda_lasso`` yields weights
    ``lambda_adap / ||pilot row j||**beta`` (infinite for zero rows) for the
    final fit.  Penalties left as ``None`` are tuned by BIC, the pilot
    penalty first.

    Parameters
    ----------
    rank : int
    lambda_lasso, lambda_adap : float or None
    beta : float, default=1.0
    lasso_grid, adap_grid : arrays, optional
        Candidate penalties for the BIC search.
    fit_intercept : bool, default=False
    tol, max_outer, n_starts, random_state : solver settings.

    Attributes
    ----------
    coef_, B_, A_, support_ : as for :class:`SparseReducedRankRegressor`.
    pilot_coef_ : ndarray of shape (n_features, n_targets)
    penalty_weights_ : adaptive per-predictor penalties.
    lambda_lasso_, lambda_adap_ : penalties used.
    """

    def __init__(self, rank=1, lambda_lasso=None, lambda_adap=None, beta=1.0,
                 lasso_grid=None, adap_grid=None, fit_intercept=False, tol=1e-8,
                 max_outer=500, n_starts=5, random_state=0):
        self.rank = rank
        self.lambda_lasso = lambda_lasso
        self.lambda_adap = lambda_adap
        self.beta = beta
        self.lasso_grid = lasso_grid
        self.adap_grid = adap_grid
        self.fit_intercept = fit_intercept
        self.tol = tol
        self.max_outer = max_outer
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate_xy(X, y)
        opts = self._solver_options()
        self.tuning_records_ = None
        if self.lambda_lasso is not None and self.lambda_adap is not None:
            config = AdaptiveConfig(self.lambda_lasso, self.lambda_adap, self.beta)
            result = fit_adaptive(X, y, self.rank, config, opts)
        else:
            grid_l = self.lasso_grid if self.lambda_lasso is None else [self.lambda_lasso]
            grid_a = self.adap_grid if self.lambda_adap is None else [self.lambda_adap]
            _, details = tune_bic(X, y, self.rank, grid_l, grid_a, self.beta, opts,
                                  return_details=True)
            result = details.result
            self.tuning_records_ = details.pilot_records + details.adap_records
        final = result.final
        self._set_factors(final.coefficient.b, final.coefficient.a)
        self.pilot_coef_ = result.pilot.coef
        self.penalty_weights_ = result.weights
        self.lambda_lasso_ = result.config.lambda_lasso
        self.lambda_adap_ = result.config.lambda_adap
        self.objective_trace_ = list(final.objective_trace)
        self.n_iter_ = final.iterations
        self.converged_ = final.converged
        return self
