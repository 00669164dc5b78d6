import numpy as np
import pytest
from sklearn.model_selection import GridSearchCV
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.utils.estimator_checks import check_estimator

from srrr import (
    AdaptiveSparseReducedRankRegressor,
    ReducedRankRegressor,
    SparseReducedRankRegressor,
)
from srrr.adaptive import AdaptiveConfig, fit_adaptive
from srrr.rrr import fit_rrr
from srrr.sim import SimConfig, gen_dataset
from srrr.solver import SolverOptions, fit_srrr


@pytest.fixture(scope="module")
def data():
    d = gen_dataset(SimConfig(n=150, p=12, q=4, r=2, s=3, noise_sd=0.5, seed=3))
    return d.x, d.y, d.c0


@pytest.mark.parametrize("est", [
    ReducedRankRegressor(rank=1),
    SparseReducedRankRegressor(rank=1, alpha=0.01),
    AdaptiveSparseReducedRankRegressor(rank=1, lambda_lasso=0.01, lambda_adap=0.01),
], ids=lambda e: type(e).__name__)
def test_sklearn_contract(est):
    check_estimator(est)


def test_rrr_estimator_matches_function(data):
    x, y, _ = data
    est = ReducedRankRegressor(rank=2).fit(x, y)
    np.testing.assert_allclose(est.coef_.T, fit_rrr(x, y, 2).coefficient, atol=1e-12)
    np.testing.assert_allclose(est.predict(x), x @ est.coef_.T, atol=1e-12)


def test_sparse_estimator_matches_function(data):
    x, y, _ = data
    est = SparseReducedRankRegressor(rank=2, alpha=0.2, random_state=5).fit(x, y)
    fit = fit_srrr(x, y, 2, 0.2, SolverOptions(seed=5))
    np.testing.assert_array_equal(est.coef_.T, fit.coef)
    np.testing.assert_array_equal(np.flatnonzero(est.support_), fit.active_set)
    np.testing.assert_allclose(est.A_.T @ est.A_, np.eye(2), atol=1e-10)


def test_adaptive_estimator_matches_function(data):
    x, y, _ = data
    est = AdaptiveSparseReducedRankRegressor(rank=2, lambda_lasso=0.2, lambda_adap=0.05)
    est.fit(x, y)
    lib = fit_adaptive(x, y, 2, AdaptiveConfig(0.2, 0.05), SolverOptions(seed=0))
    np.testing.assert_array_equal(est.coef_.T, lib.coef)
    np.testing.assert_array_equal(est.penalty_weights_, lib.weights)


def test_bic_tuned_estimator_recovers_support(data):
    x, y, _ = data
    est = AdaptiveSparseReducedRankRegressor(rank=2).fit(x, y)
    assert list(np.flatnonzero(est.support_)) == [0, 1, 2]
    assert est.tuning_records_ and est.lambda_adap_ > 0


def test_tuned_alpha(data):
    x, y, _ = data
    est = SparseReducedRankRegressor(rank=2).fit(x, y)
    assert est.alpha_ in [rec["lambda"] for rec in est.tuning_records_]


def test_intercept_and_transform(data):
    x, y, _ = data
    shifted = y + np.array([5.0, -1.0, 0.0, 2.0])
    est = SparseReducedRankRegressor(rank=2, alpha=0.1, fit_intercept=True).fit(x + 3.0, shifted)
    resid = shifted - est.predict(x + 3.0)
    assert np.abs(resid.mean(axis=0)).max() <= 0.2
    scores = est.transform(x + 3.0)
    assert scores.shape == (150, 2)
    np.testing.assert_allclose(scores @ est.A_.T + est.predict(np.full((1, 12), 3.0))
                               - (np.full((1, 12), 3.0) - est._x_offset) @ est.coef_.T,
                               est.predict(x + 3.0), atol=1e-8)


def test_single_target(data):
    x, y, _ = data
    est = SparseReducedRankRegressor(rank=1, alpha=0.1).fit(x, y[:, 0])
    assert est.coef_.shape == (12,) and est.predict(x).shape == (150,)


def test_pipeline_and_grid_search(data):
    x, y, _ = data
    pipe = make_pipeline(StandardScaler(), SparseReducedRankRegressor(rank=2))
    search = GridSearchCV(pipe, {"sparsereducedrankregressor__alpha": [0.05, 0.5]}, cv=3)
    search.fit(x, y)
    assert search.best_params_["sparsereducedrankregressor__alpha"] in (0.05, 0.5)
    assert search.predict(x).shape == y.shape


def test_infinite_penalty_weights(data):
    x, y, _ = data
    w = np.full(12, 0.05)
    w[6:] = np.inf
    est = SparseReducedRankRegressor(rank=2, penalty_weights=w).fit(x, y)
    assert not np.any(est.coef_[:, 6:])
