import math

import numpy as np
import pytest

from srrr.exceptions import ArgumentError
from srrr.linalg import row_norms
from srrr.sim import (
    CSV_HEADER,
    RateTable,
    SimConfig,
    draw_noise,
    evaluate_fit,
    gen_dataset,
    run_rate_experiment,
)


def test_vanishing_noise():
    data = gen_dataset(SimConfig(n=100, p=10, q=4, r=2, s=3, noise_sd=1e-12), 0)
    signal = np.linalg.norm(data.x @ data.c0)
    assert np.linalg.norm(data.y - data.x @ data.c0) <= 1e-8 * signal


def test_uncorrelated_design_gram_is_identity():
    config = SimConfig(n=2000, p=6, q=2, r=1, s=2, rho=0.0, seed=5)
    off = np.zeros((6, 6))
    for rep in range(100):
        x = gen_dataset(config, rep).x
        off += x.T @ x / config.n
    off /= 100
    mask = ~np.eye(6, dtype=bool)
    assert np.abs(off[mask]).max() <= 0.08
    np.testing.assert_allclose(np.diag(off), 1.0, atol=0.08)


def test_ar1_correlation():
    config = SimConfig(n=20_000, p=4, q=2, r=1, s=1, rho=0.6, seed=1)
    x = gen_dataset(config).x
    corr = np.corrcoef(x, rowvar=False)
    np.testing.assert_allclose(corr[0, 1], 0.6, atol=0.03)
    np.testing.assert_allclose(corr[0, 2], 0.36, atol=0.03)
    np.testing.assert_allclose(x.var(axis=0), 1.0, atol=0.05)


def test_generation_is_deterministic():
    config = SimConfig(n=50, p=8, q=3, r=2, s=3, seed=99)
    first, second = gen_dataset(config, 4), gen_dataset(config, 4)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)
    other = gen_dataset(config, 5)
    assert not np.array_equal(first.y, other.y)


@pytest.mark.parametrize("seed", range(20))
def test_coefficient_structure(seed):
    config = SimConfig(n=30, p=12, q=6, r=3, s=4, signal=0.7, seed=seed)
    c0 = gen_dataset(config).c0
    norms = row_norms(c0)
    assert np.all(norms[:4] >= 0.7 * (1 - 1e-12)) and np.all(norms[:4] <= 1.4 * (1 + 1e-12))
    assert not np.any(c0[4:])
    assert np.linalg.matrix_rank(c0) == 3


@pytest.mark.parametrize("kind", ["gaussian", "scaled-rademacher"])
def test_noise_tail_is_light(kind):
    e = draw_noise(np.random.default_rng(0), 1_000_000, 2.0, kind)
    assert np.mean(np.abs(e) > 4 * 2.0) <= 1e-3
    assert e.std() == pytest.approx(2.0, rel=0.01)


@pytest.mark.parametrize("kwargs", [
    dict(s=60), dict(r=6), dict(rho=1.0), dict(rho=-0.1), dict(noise_sd=0.0),
    dict(signal=-1.0), dict(noise_kind="cauchy"), dict(n=0), dict(replicates=0),
])
def test_config_validation(kwargs):
    with pytest.raises(ArgumentError):
        SimConfig(**kwargs)


# metrics ------------------------------------------------------------------------

def test_evaluate_perfect():
    data = gen_dataset(SimConfig(n=40, p=8, q=3, r=2, s=3))
    assert evaluate_fit(data.c0, data.c0, data.x, 3) == {
        "pred_error": 0.0, "est_error": 0.0, "tp": 3, "fp": 0, "exact_support": True}


def test_evaluate_null():
    data = gen_dataset(SimConfig(n=40, p=8, q=3, r=2, s=3))
    m = evaluate_fit(np.zeros_like(data.c0), data.c0, data.x, 3)
    assert m["est_error"] == pytest.approx(np.linalg.norm(data.c0), rel=1e-15)
    assert (m["tp"], m["fp"], m["exact_support"]) == (0, 0, False)


def test_evaluate_pred_error_loop_oracle():
    rng = np.random.default_rng(8)
    x, c0, c = rng.standard_normal((15, 4)), rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
    total = 0.0
    for i in range(15):
        for k in range(3):
            total += sum(x[i, j] * (c[j, k] - c0[j, k]) for j in range(4)) ** 2
    assert abs(evaluate_fit(c, c0, x, 2)["pred_error"] - math.sqrt(total)) <= 1e-12


def test_evaluate_counts_false_positives():
    c0 = np.zeros((5, 2))
    c0[:2] = 1.0
    c = np.zeros((5, 2))
    c[0] = 1.0
    c[3] = 1e-3
    c[4] = 1e-9  # below the support threshold
    m = evaluate_fit(c, c0, np.eye(5), 2)
    assert (m["tp"], m["fp"], m["exact_support"]) == (1, 1, False)


# experiments ----------------------------------------------------------------------

def test_rrr_noiseless_rates():
    base = SimConfig(n=60, p=10, q=4, r=2, s=3, noise_sd=1e-12, replicates=1)
    table = run_rate_experiment(base, [60, 120, 240], estimator="rrr")
    assert [row.n for row in table.rows] == [60, 120, 240]
    assert all(row.est_error <= 1e-4 for row in table.rows)


def test_rows_sorted_and_keyed():
    base = SimConfig(n=50, p=8, q=3, r=1, s=2, replicates=3)
    table = run_rate_experiment(base, [50, 80], estimator="srrr")
    assert [(row.n, row.replicate) for row in table.rows] == [
        (n, k) for n in (50, 80) for k in range(3)]
    assert all(math.isnan(row.runtime_seconds) for row in table.rows)
    for row in table.rows:
        assert row.tp <= row.s and row.fp <= row.p - row.s
        assert row.pred_error >= 0 and row.est_error >= 0


def test_timing_is_opt_in():
    base = SimConfig(n=40, p=6, q=3, r=1, s=2, replicates=1)
    table = run_rate_experiment(base, estimator="rrr", timing=True)
    assert table.rows[0].runtime_seconds >= 0


def test_experiment_is_deterministic():
    base = SimConfig(n=60, p=10, q=4, r=2, s=3, replicates=3, seed=11)
    first = run_rate_experiment(base, [60, 90], tuning={"lambda_lasso": 0.3, "lambda_adap": 0.1})
    second = run_rate_experiment(base, [60, 90], tuning={"lambda_lasso": 0.3, "lambda_adap": 0.1})
    assert first.to_csv() == second.to_csv()


def test_failed_replicates_are_recorded():
    base = SimConfig(n=40, p=6, q=3, r=1, s=2, replicates=2)
    table = run_rate_experiment(base, tuning={"lambda_lasso": 1e6, "lambda_adap": 1.0})
    assert all("empty-model" in row.error for row in table.rows)
    summary = table.summary()
    assert summary["aggregates"][0]["failures"] == 2
    assert len(summary["failures"]) == 2


def test_aggregates_recompute_from_rows():
    base = SimConfig(n=50, p=8, q=3, r=2, s=3, replicates=4)
    table = run_rate_experiment(base, [50, 100], estimator="srrr",
                                tuning={"lambda_lasso": 0.2})
    for agg in table.aggregates():
        rows = [r for r in table.rows if r.n == agg["n"]]
        est = [r.est_error for r in rows]
        mean = sum(est) / len(est)
        var = sum((v - mean) ** 2 for v in est) / (len(est) - 1)
        ordered = sorted(est)
        median = (ordered[1] + ordered[2]) / 2
        stats = agg["metrics"]["est_error"]
        assert stats["mean"] == pytest.approx(mean, rel=1e-14)
        assert stats["sd"] == pytest.approx(math.sqrt(var), rel=1e-12)
        assert stats["median"] == pytest.approx(median, rel=1e-14)
        df = 2 * (3 + 3 - 2)
        norm = [e * math.sqrt(agg["n"] / df) for e in est]
        assert agg["metrics"]["normalized_est_error"]["mean"] == pytest.approx(
            sum(norm) / len(norm), rel=1e-14)
        pred = [r.pred_error / math.sqrt(df) for r in rows]
        assert agg["metrics"]["normalized_pred_error"]["mean"] == pytest.approx(
            sum(pred) / len(pred), rel=1e-14)


def test_csv_round_trip():
    base = SimConfig(n=50, p=8, q=3, r=2, s=3, replicates=2)
    table = run_rate_experiment(base, estimator="rrr")
    text = table.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    again = RateTable.from_csv(text)
    assert again.to_csv() == text
    assert [r.est_error for r in again.rows] == [r.est_error for r in table.rows]


def test_bad_grid():
    with pytest.raises(ArgumentError):
        run_rate_experiment(SimConfig(), [400, 200])
    with pytest.raises(ArgumentError):
        run_rate_experiment(SimConfig(), estimator="ols")
