import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from hdpslds.errors import NotPositiveDefiniteError, ParameterError
from hdpslds.stats import (
    log_dirichlet,
    make_rng,
    sample_beta,
    sample_categorical,
    sample_categorical_log,
    sample_dirichlet,
    sample_gamma,
    sample_inverse_wishart,
    sample_matrix_normal,
    sample_mvn,
    sample_mvn_info,
)

N = 100_000


@pytest.fixture
def rng():
    return make_rng(12345)


def test_same_seed_same_stream():
    a, b = make_rng(7), make_rng(7)
    assert np.array_equal(sample_dirichlet(np.ones(5), a), sample_dirichlet(np.ones(5), b))
    assert sample_gamma(2.0, 3.0, a) == sample_gamma(2.0, 3.0, b)
    assert not np.array_equal(make_rng(7).random(4), make_rng(8).random(4))


def test_gamma_mean(rng):
    draws = sample_gamma(10.0, 1.0, rng, size=N)
    assert abs(draws.mean() - 10.0) / 10.0 < 0.02
    assert np.all(draws > 0)


def test_gamma_shape_one_is_exponential(rng):
    lam = 2.5
    draws = sample_gamma(1.0, lam, rng, size=N)
    assert sps.kstest(draws, sps.expon(scale=1 / lam).cdf).pvalue > 0.01


@pytest.mark.parametrize("shape,rate", [(0, 1), (-1, 1), (1, 0), (1, -2), (np.nan, 1)])
def test_gamma_rejects_bad_parameters(rng, shape, rate):
    with pytest.raises(ParameterError):
        sample_gamma(shape, rate, rng)


def test_beta_mean_and_support(rng):
    draws = sample_beta(20.0, 2.0, rng, size=N)
    assert abs(draws.mean() - 20 / 22) / (20 / 22) < 0.02
    assert np.all((draws > 0) & (draws < 1))


def test_beta_uniform_case(rng):
    draws = sample_beta(1.0, 1.0, rng, size=N)
    assert sps.kstest(draws, "uniform").pvalue > 0.01


def test_beta_rejects_bad_parameters(rng):
    with pytest.raises(ParameterError):
        sample_beta(0.0, 1.0, rng)


def test_dirichlet_concentrated(rng):
    draw = sample_dirichlet([1e6, 1e6], rng)
    assert np.allclose(draw, 0.5, atol=1e-2)


def test_dirichlet_length_one(rng):
    assert np.array_equal(sample_dirichlet([3.0], rng), [1.0])


def test_dirichlet_mean(rng):
    conc = np.array([0.5, 2.0, 3.5])
    draws = sample_dirichlet(np.tile(conc, (N, 1)), rng)
    expected = conc / conc.sum()
    assert np.all(np.abs(draws.mean(axis=0) - expected) / expected < 0.02)


def test_dirichlet_tiny_concentrations_stay_finite(rng):
    conc = np.full(100, 1e-30)
    conc[3] = 1e-3
    log_w = log_dirichlet(conc, rng)
    w = sample_dirichlet(conc, rng)
    assert np.all(np.isfinite(log_w))
    assert abs(w.sum() - 1.0) < 1e-12 and np.all(w >= 0)


def test_dirichlet_vanishing_concentrations_pick_one_coordinate(rng):
    # as all shapes go to zero the draw is a vertex chosen with probability a_k / sum(a)
    draws = np.array([sample_dirichlet([1e-300, 3e-300], rng) for _ in range(20_000)])
    assert not np.isnan(draws).any()
    assert np.all(np.max(draws, axis=1) == 1.0)
    assert abs(draws[:, 1].mean() - 0.75) < 0.015


@pytest.mark.parametrize("conc", [[], [1.0, 0.0], [1.0, -1.0]])
def test_dirichlet_rejects_bad_concentration(rng, conc):
    with pytest.raises(ParameterError):
        sample_dirichlet(conc, rng)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=1e-8, max_value=1e4), min_size=1, max_size=30), st.integers(0, 2**32))
def test_dirichlet_is_simplex(conc, seed):
    w = sample_dirichlet(conc, make_rng(seed))
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) < 1e-12


def test_categorical_point_mass(rng):
    assert all(sample_categorical([1, 0, 0], rng) == 0 for _ in range(1000))


def test_categorical_frequencies(rng):
    draws = np.array([sample_categorical([2.0, 2.0], rng) for _ in range(N)])
    assert abs(draws.mean() - 0.5) < 0.01


def test_categorical_scale_invariant():
    a = [sample_categorical([1.0, 1.0], r) for r in [make_rng(3)] * 200]
    b = [sample_categorical([7.0, 7.0], r) for r in [make_rng(3)] * 200]
    assert a == b


def test_categorical_log_handles_underflow(rng):
    # plain exponentiation would give all zeros
    assert sample_categorical_log([-5000.0, -1e9, -np.inf], rng) == 0


@pytest.mark.parametrize("w", [[0, 0], [1, -1], [np.nan, 1]])
def test_categorical_rejects_bad_weights(rng, w):
    with pytest.raises(ParameterError):
        sample_categorical(w, rng)


def test_mvn_degenerate_covariance(rng):
    mean = np.array([1.0, -2.0])
    assert np.allclose(sample_mvn(mean, 1e-18 * np.eye(2), rng), mean, atol=1e-8)


def test_mvn_covariance(rng):
    draws = np.array([sample_mvn(np.zeros(2), np.eye(2), rng) for _ in range(N)])
    assert np.linalg.norm(np.cov(draws.T) - np.eye(2)) < 0.03


def test_mvn_shift():
    cov = np.array([[2.0, 0.3], [0.3, 0.5]])
    mu = np.array([4.0, -1.0])
    a = sample_mvn(np.zeros(2), cov, make_rng(9))
    b = sample_mvn(mu, cov, make_rng(9))
    assert np.allclose(b - a, mu)


def test_mvn_rejects_non_spd(rng):
    with pytest.raises(NotPositiveDefiniteError, match="cov"):
        sample_mvn(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), rng)


def test_mvn_info_identity_is_standard_normal(rng):
    draws = np.array([sample_mvn_info(np.zeros(2), np.eye(2), rng) for _ in range(N)])
    assert np.all(np.abs(draws.mean(axis=0)) < 0.01)
    assert np.linalg.norm(np.cov(draws.T) - np.eye(2)) < 0.03


def test_mvn_info_matches_moment_form(rng):
    lam = np.array([[4.0, 1.0], [1.0, 2.0]])
    theta = np.array([1.0, -3.0])
    cov = np.linalg.inv(lam)
    mean = cov @ theta
    info = np.array([sample_mvn_info(theta, lam, rng) for _ in range(N)])
    moment = np.array([sample_mvn(mean, cov, rng) for _ in range(N)])
    assert np.all(np.abs(info.mean(0) - moment.mean(0)) < 0.03 * np.abs(mean).max())
    assert np.all(np.abs(np.cov(info.T) - np.cov(moment.T)) < 0.03 * np.abs(cov).max())


def test_mvn_info_scaled_pair_keeps_mean(rng):
    lam = np.array([[3.0, 0.5], [0.5, 1.0]])
    theta = np.array([2.0, 1.0])
    c = 50.0
    draws = np.array([sample_mvn_info(c * theta, c * lam, rng) for _ in range(20_000)])
    assert np.allclose(draws.mean(0), np.linalg.solve(lam, theta), atol=0.01)


def test_inverse_wishart_scalar_mean(rng):
    draws = np.array([sample_inverse_wishart(5.0, np.eye(1), rng)[0, 0] for _ in range(N)])
    assert abs(draws.mean() - 1 / 3) / (1 / 3) < 0.03


def test_inverse_wishart_scalar_is_inverse_gamma(rng):
    dof, scale = 7.0, 2.0
    draws = np.array([sample_inverse_wishart(dof, scale * np.eye(1), rng)[0, 0] for _ in range(N)])
    ref = sps.invgamma(a=dof / 2, scale=scale / 2)
    assert sps.kstest(draws, ref.cdf).pvalue > 0.01


def test_inverse_wishart_matrix_mean(rng):
    scale = np.array([[2.0, 0.5], [0.5, 1.0]])
    dof = 8.0
    draws = np.array([sample_inverse_wishart(dof, scale, rng) for _ in range(N)])
    assert np.all(np.abs(draws.mean(0) - scale / (dof - 3)) < 0.03 * np.abs(scale / (dof - 3)).max())


def test_inverse_wishart_draws_are_spd(rng):
    scale = np.array([[1.0, 0.9], [0.9, 1.0]])
    for _ in range(1000):
        draw = sample_inverse_wishart(2.5, scale, rng)
        assert np.array_equal(draw, draw.T)
        np.linalg.cholesky(draw)


def test_inverse_wishart_rejects_small_dof(rng):
    with pytest.raises(ParameterError):
        sample_inverse_wishart(1.0, np.eye(2), rng)
    with pytest.raises(NotPositiveDefiniteError):
        sample_inverse_wishart(5.0, -np.eye(2), rng)


def test_matrix_normal_identity_scales(rng):
    draws = np.array([sample_matrix_normal(np.zeros((2, 3)), np.eye(2), np.eye(3), rng) for _ in range(20_000)])
    flat = draws.reshape(len(draws), -1)
    assert np.all(np.abs(flat.mean(0)) < 0.03)
    assert np.linalg.norm(np.cov(flat.T) - np.eye(6)) < 0.1


def test_matrix_normal_moments(rng):
    mean = np.array([[1.0, -2.0], [0.5, 3.0]])
    row = np.array([[1.0, 0.3], [0.3, 0.5]])
    col = np.array([[2.0, -0.4], [-0.4, 1.0]])
    draws = np.array([sample_matrix_normal(mean, row, col, rng) for _ in range(N)])
    assert np.all(np.abs(draws.mean(0) - mean) <= 0.03 * np.abs(mean))
    # vec stacks columns, so the covariance of vec(X) is kron(col, row)
    vec = draws.transpose(0, 2, 1).reshape(N, -1)
    expected = np.kron(col, row)
    assert np.abs(np.cov(vec.T) - expected).max() < 0.05 * np.abs(expected).max()


def test_matrix_normal_rejects_non_spd(rng):
    with pytest.raises(NotPositiveDefiniteError, match="col_cov"):
        sample_matrix_normal(np.zeros((2, 2)), np.eye(2), np.zeros((2, 2)), rng)
