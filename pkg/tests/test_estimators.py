import numpy as np
import pytest

from gmm_feedback.errors import ArgumentError, ConfigurationError
from gmm_feedback.estimators import (build_dictionary, estimate_gmm,
                                     estimate_lmmse, estimate_omp_genie,
                                     sample_covariance)
from gmm_feedback.gmm import GmmModel, adapt_to_observation
from gmm_feedback.pilots import complex_normal

import oracles


def random_psd(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T / n


# ---------------------------------------------------------------------------
# mixture estimator


def test_estimate_gmm_single_component_is_lmmse():
    rng = np.random.default_rng(0)
    c = random_psd(rng, 3)
    a = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    sigma2 = 0.4
    m = GmmModel(weights=[1.0], means=[np.zeros(3)], covariances=[c])
    adapted = adapt_to_observation(m, a, sigma2)
    for _ in range(10):
        y = complex_normal(rng, 2)
        est = estimate_gmm(adapted, y)
        ref = estimate_lmmse(c, a, sigma2, y)
        assert np.allclose(est, ref, atol=1e-12)


def test_estimate_gmm_matches_direct_formula_oracle():
    rng = np.random.default_rng(1)
    weights = np.array([0.4, 0.6])
    means = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    covs = np.stack([random_psd(rng, 2) for _ in range(2)])
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    sigma2 = 0.25
    m = GmmModel(weights=weights, means=means, covariances=covs)
    adapted = adapt_to_observation(m, a, sigma2)
    for _ in range(25):
        y = complex_normal(rng, 2, 2.0)
        expected = oracles.mixture_lmmse(y, weights, means, covs, a, sigma2)
        assert np.allclose(estimate_gmm(adapted, y), expected, atol=1e-10)


def test_estimate_gmm_shrinkage_limit():
    # mu = 0, C = I, A = I: estimate = y / (1 + sigma2) -> 0 as noise grows
    m = GmmModel(weights=[1.0], means=[np.zeros(2)],
                 covariances=[np.eye(2, dtype=complex)])
    y = np.array([1.0 + 1j, -2.0])
    for sigma2 in (1.0, 10.0, 1e6):
        adapted = adapt_to_observation(m, np.eye(2), sigma2)
        assert np.allclose(estimate_gmm(adapted, y), y / (1 + sigma2), atol=1e-12)
    assert np.linalg.norm(estimate_gmm(
        adapt_to_observation(m, np.eye(2), 1e9), y)) < 1e-8


def test_estimate_gmm_dimension_check():
    rng = np.random.default_rng(2)
    m = GmmModel(weights=[1.0], means=[np.zeros(2)],
                 covariances=[np.eye(2, dtype=complex)])
    adapted = adapt_to_observation(m, np.eye(2), 0.1)
    with pytest.raises(ArgumentError):
        estimate_gmm(adapted, np.zeros(3, dtype=complex))


# ---------------------------------------------------------------------------
# sample covariance LMMSE


def test_sample_covariance_examples():
    h = np.array([[1.0 + 1j, 2.0]])
    c = sample_covariance(h)
    assert np.allclose(c, np.outer(h[0], h[0].conj()))

    e = np.eye(4, dtype=complex)
    c2 = sample_covariance(e[:2])
    assert np.allclose(c2, np.diag([0.5, 0.5, 0.0, 0.0]))


def test_sample_covariance_monte_carlo():
    rng = np.random.default_rng(3)
    c_true = random_psd(rng, 3)
    factor = np.linalg.cholesky(c_true)
    x = complex_normal(rng, (10_000, 3)) @ factor.T
    c_hat = sample_covariance(x)
    assert np.linalg.norm(c_hat - c_true) / np.linalg.norm(c_true) < 0.05


def test_lmmse_identity_case_and_zero_prior():
    y = np.array([2.0 + 1j, -1.0])
    sigma2 = 0.5
    est = estimate_lmmse(np.eye(2, dtype=complex), np.eye(2), sigma2, y)
    assert np.allclose(est, y / (1 + sigma2), atol=1e-12)
    est0 = estimate_lmmse(np.zeros((2, 2), dtype=complex), np.eye(2), sigma2, y)
    assert np.allclose(est0, 0.0)


def test_lmmse_matches_direct_solve_oracle_and_linearity():
    rng = np.random.default_rng(4)
    c = random_psd(rng, 4)
    a = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    sigma2 = 0.3
    y = complex_normal(rng, 3)
    est = estimate_lmmse(c, a, sigma2, y)
    assert np.allclose(est, oracles.lmmse(c, a, sigma2, y), atol=1e-10)
    alpha = 1.7 - 0.4j
    assert np.allclose(estimate_lmmse(c, a, sigma2, alpha * y), alpha * est,
                       atol=1e-10)


def test_estimator_mse_ordering_small():
    # on data drawn from the mixture itself: mixture estimate <= plain LMMSE
    rng = np.random.default_rng(5)
    k, dim = 3, 4
    means = 3.0 * (rng.standard_normal((k, dim)) + 1j * rng.standard_normal((k, dim)))
    covs = np.stack([random_psd(rng, dim) for _ in range(k)])
    weights = np.full(k, 1 / k)
    m = GmmModel(weights=weights, means=means, covariances=covs)
    a = rng.standard_normal((2, dim)) + 1j * rng.standard_normal((2, dim))
    sigma2 = 0.1
    adapted = adapt_to_observation(m, a, sigma2)
    # global second moment of the mixture
    c_glob = sum(w * (c + np.outer(mu, mu.conj()))
                 for w, mu, c in zip(weights, means, covs))
    err_gmm, err_lmmse, base = 0.0, 0.0, 0.0
    trials = 1500
    for _ in range(trials):
        kk = rng.choice(k, p=weights)
        h = means[kk] + np.linalg.cholesky(covs[kk]) @ complex_normal(rng, dim)
        y = a @ h + complex_normal(rng, 2, sigma2)
        err_gmm += np.linalg.norm(estimate_gmm(adapted, y) - h) ** 2
        err_lmmse += np.linalg.norm(estimate_lmmse(c_glob, a, sigma2, y) - h) ** 2
        base += np.linalg.norm(h) ** 2
    assert err_gmm <= err_lmmse * 1.05
    assert err_lmmse <= base * 1.05


# ---------------------------------------------------------------------------
# dictionary and OMP


def test_dictionary_structure():
    d = build_dictionary(2, 2, 3, oversampling=(2, 2, 2))
    # grid sizes: 2x oversampling per axis -> (2*2) * (2*2) * (2*3) atoms
    assert d.matrix.shape == (12, 96)
    assert np.allclose(np.linalg.norm(d.matrix, axis=0), 1.0, atol=1e-12)
    # atoms factor as kron(tx_h, tx_v, rx), matching column-major vectorization
    from gmm_feedback.estimators import _axis_dictionary
    expected = np.kron(np.kron(_axis_dictionary(2, 2), _axis_dictionary(2, 2)),
                       _axis_dictionary(3, 2))
    assert np.allclose(d.matrix, expected)


def test_omp_single_atom_exact_recovery():
    rng = np.random.default_rng(6)
    d = build_dictionary(2, 1, 2, oversampling=(2, 2, 2))
    a = np.eye(4)
    atom = 5
    h = 2.0 * d.matrix[:, atom]
    y = a @ h
    est, s = estimate_omp_genie(d, a, y, h, s_max=3)
    assert s == 1
    assert np.linalg.norm(est - h) < 1e-8


def test_omp_zero_true_channel_contract():
    rng = np.random.default_rng(7)
    d = build_dictionary(2, 1, 2)
    a = np.eye(4)
    y = complex_normal(rng, 4)
    est, s = estimate_omp_genie(d, a, y, np.zeros(4, dtype=complex), s_max=3)
    assert np.all(np.isfinite(est))
    assert 1 <= s <= 3


def test_omp_support_matches_exhaustive_when_incoherent():
    # brute force over all 2-atom supports of a small incoherent dictionary
    rng = np.random.default_rng(8)
    while True:
        d_mat = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        d_mat /= np.linalg.norm(d_mat, axis=0)
        gram = np.abs(d_mat.conj().T @ d_mat - np.eye(6))
        if gram.max() < 0.5:
            break
    from gmm_feedback.estimators import Dictionary
    d = Dictionary(matrix=d_mat, oversampling=(1, 1, 1))
    a = np.eye(6)
    support_true = [1, 4]
    h = d_mat[:, support_true] @ np.array([2.0, -1.5 + 0.5j])
    est, s = estimate_omp_genie(d, a, h.copy(), h, s_max=2)
    _, best_support = oracles.omp_best_support(a @ d_mat, d_mat, h, h, 2)
    assert s == 2
    assert np.linalg.norm(est - h) < 1e-8
    assert best_support == set(support_true)


def test_omp_zero_column_raises():
    from gmm_feedback.estimators import Dictionary
    d_mat = np.eye(4, dtype=complex)
    a = np.zeros((4, 4))
    d = Dictionary(matrix=d_mat, oversampling=(1, 1, 1))
    with pytest.raises(ConfigurationError):
        estimate_omp_genie(d, a, np.zeros(4, dtype=complex),
                           np.zeros(4, dtype=complex), 2)


def test_omp_s_max_bounds():
    d = build_dictionary(2, 1, 2)
    with pytest.raises(ArgumentError):
        estimate_omp_genie(d, np.eye(4), np.zeros(4), np.zeros(4), 0)
    with pytest.raises(ArgumentError):
        estimate_omp_genie(d, np.eye(4), np.zeros(4), np.zeros(4), 5)
