import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import loop_gram
from srrr.exceptions import ArgumentError
from srrr.linalg import gram, polar_factor, rank_truncate, thin_svd

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
matrices = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda shape: arrays(np.float64, shape, elements=finite)
)


def test_svd_identity():
    svd = thin_svd(np.eye(3))
    np.testing.assert_allclose(svd.singular_values, [1, 1, 1])


def test_svd_diagonal_sign_convention():
    svd = thin_svd(np.diag([3.0, 2.0, 1.0]))
    np.testing.assert_allclose(svd.singular_values, [3, 2, 1])
    np.testing.assert_array_equal(svd.u, np.eye(3))
    np.testing.assert_array_equal(svd.v, np.eye(3))


def test_svd_seeded_reconstruction(rng):
    m = rng.standard_normal((5, 3))
    svd = thin_svd(m)
    recon = svd.u @ np.diag(svd.singular_values) @ svd.v.T
    assert np.linalg.norm(m - recon) <= 1e-8 * np.linalg.norm(m)
    assert np.linalg.norm(svd.u.T @ svd.u - np.eye(3)) <= 1e-10
    assert np.linalg.norm(svd.v.T @ svd.v - np.eye(3)) <= 1e-10


def test_svd_sign_convention_is_deterministic(rng):
    m = rng.standard_normal((6, 4))
    first, second = thin_svd(m), thin_svd(m.copy())
    np.testing.assert_array_equal(first.u, second.u)
    idx = np.argmax(np.abs(first.u), axis=0)
    assert np.all(first.u[idx, np.arange(4)] >= 0)


def test_svd_rejects_nonfinite():
    with pytest.raises(ArgumentError):
        thin_svd(np.array([[1.0, np.nan]]))


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_svd_properties(m):
    svd = thin_svd(m)
    k = min(m.shape)
    scale = np.linalg.norm(m)
    assert np.linalg.norm(m - svd.reconstruct()) <= 1e-8 * scale + 1e-300
    assert np.all(np.diff(svd.singular_values) <= 0)
    assert np.linalg.norm(svd.u.T @ svd.u - np.eye(k)) <= 1e-10 * k
    assert np.linalg.norm(svd.v.T @ svd.v - np.eye(k)) <= 1e-10 * k


def test_gram_identity_design():
    n = 4
    np.testing.assert_allclose(gram(np.sqrt(n) * np.eye(n), n), np.eye(n), atol=1e-15)


def test_gram_hand_computed():
    np.testing.assert_allclose(gram(np.array([[1.0], [1.0]]), 2), [[1.0]])


def test_gram_matches_double_loop(rng):
    x = rng.standard_normal((50, 8))
    np.testing.assert_allclose(gram(x, 50), loop_gram(x), rtol=0, atol=1e-12)


def test_gram_wrong_n():
    with pytest.raises(ArgumentError):
        gram(np.ones((3, 2)), 4)


@settings(max_examples=40, deadline=None)
@given(matrices)
def test_gram_symmetric_psd(x):
    sigma = gram(x)
    assert np.abs(sigma - sigma.T).max() <= 1e-12 * max(1.0, np.abs(sigma).max())
    assert np.linalg.eigvalsh(sigma).min() >= -1e-10 * max(1.0, np.abs(sigma).max())


def test_rank_truncate_full_rank_is_identity(rng):
    m = rng.standard_normal((4, 3))
    np.testing.assert_allclose(rank_truncate(m, 3), m, atol=1e-10)


def test_rank_truncate_diagonal():
    np.testing.assert_allclose(
        rank_truncate(np.diag([3.0, 2.0, 1.0]), 1), np.diag([3.0, 0, 0]), atol=1e-15
    )


def test_rank_truncate_eckart_young_residual(rng):
    m = rng.standard_normal((4, 3))
    sigma3 = thin_svd(m).singular_values[2]
    err = np.linalg.norm(m - rank_truncate(m, 2))
    assert abs(err - np.sqrt(sigma3**2)) <= 1e-8


@pytest.mark.parametrize("r", [0, 4])
def test_rank_truncate_out_of_range(r):
    with pytest.raises(ArgumentError):
        rank_truncate(np.ones((4, 3)), r)


@settings(max_examples=40, deadline=None)
@given(matrices, st.integers(1, 6))
def test_rank_truncate_rank_bound(m, r):
    r = min(r, min(m.shape))
    s = thin_svd(rank_truncate(m, r)).singular_values
    assert np.count_nonzero(s > 1e-8 * max(s[0], 1e-300)) <= r


def test_polar_factor_flags_rank_deficiency():
    a, degenerate = polar_factor(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]))
    assert degenerate
    np.testing.assert_allclose(a.T @ a, np.eye(2), atol=1e-12)
