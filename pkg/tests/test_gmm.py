import numpy as np
import pytest

from gmm_feedback.channels import ChannelDataset, ScenarioConfig
from gmm_feedback.errors import ArgumentError, ModelIntegrityError
from gmm_feedback.gmm import (AdaptedGmm, GmmModel, KroneckerFactors,
                              adapt_to_observation, fit_em, fit_kronecker,
                              log_likelihood, parameter_count,
                              responsibilities, sample_component)
from gmm_feedback.pilots import complex_normal

import oracles


def random_psd(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    c = a @ a.conj().T / n * scale
    return 0.5 * (c + c.conj().T)


def toy_model(rng, k=2, dim=3, seed_means=2.0):
    weights = rng.uniform(0.5, 1.5, size=k)
    weights /= weights.sum()
    means = seed_means * (rng.standard_normal((k, dim))
                          + 1j * rng.standard_normal((k, dim)))
    covs = np.stack([random_psd(rng, dim) for _ in range(k)])
    return GmmModel(weights=weights, means=means, covariances=covs)


# ---------------------------------------------------------------------------
# responsibilities


def test_responsibilities_single_component():
    rng = np.random.default_rng(0)
    m = toy_model(rng, k=1)
    p = responsibilities(m, rng.standard_normal(3) + 0j)
    assert np.allclose(p, [1.0])


def test_responsibilities_identical_components():
    rng = np.random.default_rng(1)
    cov = random_psd(rng, 2)
    mean = rng.standard_normal(2) + 0j
    m = GmmModel(weights=[0.5, 0.5], means=[mean, mean],
                 covariances=[cov, cov])
    for _ in range(5):
        x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        assert np.allclose(responsibilities(m, x), [0.5, 0.5], atol=1e-12)


def test_responsibilities_match_direct_density_oracle():
    rng = np.random.default_rng(2)
    m = GmmModel(weights=[0.3, 0.7],
                 means=[[1.0 + 1j, 0.0], [-1.0, 2.0 - 1j]],
                 covariances=[np.diag([1.0, 2.0]).astype(complex),
                              np.diag([0.5, 1.5]).astype(complex)])
    for _ in range(20):
        x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        expected = oracles.mixture_responsibilities(
            x, m.weights, m.means, m.covariances)
        assert np.allclose(responsibilities(m, x), expected, atol=1e-10)


def test_responsibilities_sum_to_one_many_inputs():
    rng = np.random.default_rng(3)
    m = toy_model(rng, k=4, dim=3)
    x = rng.standard_normal((10_000, 3)) + 1j * rng.standard_normal((10_000, 3))
    p = responsibilities(m, x)
    assert np.all(p >= 0)
    assert np.max(np.abs(p.sum(axis=1) - 1.0)) < 1e-9


def test_responsibility_argmax_invariant_to_weight_scaling():
    rng = np.random.default_rng(4)
    m = toy_model(rng, k=3)
    scaled = GmmModel(weights=m.weights, means=m.means, covariances=m.covariances)
    x = rng.standard_normal((50, 3)) + 1j * rng.standard_normal((50, 3))
    base = np.argmax(responsibilities(m, x), axis=1)
    again = np.argmax(responsibilities(scaled, x), axis=1)
    assert np.array_equal(base, again)


def test_responsibilities_rejects_nonfinite():
    rng = np.random.default_rng(5)
    m = toy_model(rng)
    with pytest.raises(ArgumentError):
        responsibilities(m, np.array([np.nan + 0j, 0, 0]))
    with pytest.raises(ArgumentError):
        responsibilities(m, np.zeros(4, dtype=complex))


# ---------------------------------------------------------------------------
# adaptation


def test_adapt_identity_recovers_channel_covariances():
    rng = np.random.default_rng(6)
    m = toy_model(rng, k=2, dim=3)
    adapted = adapt_to_observation(m, np.eye(3), 1e-12)
    for k in range(2):
        cov_y = adapted._cache.chol[k] @ adapted._cache.chol[k].conj().T
        assert np.allclose(cov_y, m.covariances[k], atol=1e-9)


def test_adapt_algebraic_identity():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    m = GmmModel(weights=[1.0], means=[np.zeros(4)],
                 covariances=[np.eye(4, dtype=complex)])
    sigma2 = 0.3
    adapted = adapt_to_observation(m, a, sigma2)
    cov_y = adapted._cache.chol[0] @ adapted._cache.chol[0].conj().T
    assert np.allclose(cov_y, a @ a.conj().T + sigma2 * np.eye(3), atol=1e-10)
    assert np.allclose(adapted.means_y[0], np.zeros(3))


def test_adapted_responsibilities_match_direct_oracle():
    rng = np.random.default_rng(8)
    m = toy_model(rng, k=3, dim=3)
    a = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    sigma2 = 0.2
    adapted = adapt_to_observation(m, a, sigma2)
    for _ in range(20):
        y = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        expected = oracles.mixture_responsibilities(
            y, m.weights, [a @ mu for mu in m.means],
            [a @ c @ a.conj().T + sigma2 * np.eye(2) for c in m.covariances])
        assert np.allclose(responsibilities(adapted, y), expected, atol=1e-10)


def test_adapted_vs_channel_domain_argmax_with_invertible_operator():
    rng = np.random.default_rng(9)
    m = toy_model(rng, k=3, dim=3, seed_means=4.0)
    a = np.eye(3) + 0.1 * (rng.standard_normal((3, 3))
                           + 1j * rng.standard_normal((3, 3)))
    adapted = adapt_to_observation(m, a, 1e-10)
    agree = 0
    trials = 200
    for _ in range(trials):
        k = rng.integers(3)
        h = m.means[k] + 0.1 * complex_normal(rng, 3)
        p_h = responsibilities(m, h)
        p_y = responsibilities(adapted, a @ h)
        agree += np.argmax(p_h) == np.argmax(p_y)
        assert np.max(np.abs(p_h - p_y)) < 1e-3
    assert agree / trials >= 0.99


def test_adapt_rejects_bad_inputs():
    rng = np.random.default_rng(10)
    m = toy_model(rng)
    with pytest.raises(ArgumentError):
        adapt_to_observation(m, np.eye(3), 0.0)
    with pytest.raises(ArgumentError):
        adapt_to_observation(m, np.eye(4), 0.1)


# ---------------------------------------------------------------------------
# sampling


def test_sample_zero_covariance_returns_mean():
    m = GmmModel(weights=[1.0], means=[[1.0 + 2j, -1.0]],
                 covariances=[np.zeros((2, 2), dtype=complex)])
    s = sample_component(m, 1, np.random.default_rng(0))
    assert np.array_equal(s, np.array([1.0 + 2j, -1.0]))


def test_sample_reproducible_and_bounds():
    rng = np.random.default_rng(11)
    m = toy_model(rng, k=2)
    s1 = sample_component(m, 2, np.random.default_rng(5))
    s2 = sample_component(m, 2, np.random.default_rng(5))
    assert np.array_equal(s1, s2)
    with pytest.raises(ArgumentError):
        sample_component(m, 0, rng)
    with pytest.raises(ArgumentError):
        sample_component(m, 3, rng)


def test_sample_moments():
    rng = np.random.default_rng(12)
    dim = 3
    mean = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    cov = random_psd(rng, dim)
    m = GmmModel(weights=[1.0], means=[mean], covariances=[cov])
    n = 100_000
    draw_rng = np.random.default_rng(99)
    samples = np.stack([sample_component(m, 1, draw_rng) for _ in range(n)])
    emp_mean = samples.mean(axis=0)
    sigma = np.sqrt(np.real(np.diag(cov)))
    assert np.all(np.abs(emp_mean - mean) < 3 * sigma / np.sqrt(n) + 1e-12)
    diff = samples - emp_mean
    emp_cov = diff.T @ diff.conj() / n
    assert (np.linalg.norm(emp_cov - cov) / np.linalg.norm(cov)) < 0.05


def test_sample_rejects_non_psd():
    # Hermitian but indefinite: construction passes, drawing must fail
    c = np.diag([1.0, -0.5]).astype(complex)
    m = GmmModel(weights=[1.0], means=[np.zeros(2)], covariances=[c])
    with pytest.raises(ModelIntegrityError):
        sample_component(m, 1, np.random.default_rng(0))


def test_model_rejects_non_hermitian():
    c = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)
    with pytest.raises(ModelIntegrityError):
        GmmModel(weights=[1.0], means=[np.zeros(2)], covariances=[c])


# ---------------------------------------------------------------------------
# log-likelihood and parameter counts


def test_log_likelihood_standard_normal_at_zero():
    m = GmmModel(weights=[1.0], means=[[0.0]],
                 covariances=[np.eye(1, dtype=complex)])
    ll = log_likelihood(m, np.zeros((1, 1), dtype=complex))
    assert np.isclose(ll, np.log(1 / np.pi))


def test_log_likelihood_additive():
    rng = np.random.default_rng(13)
    m = toy_model(rng, k=2)
    x = rng.standard_normal((10, 3)) + 1j * rng.standard_normal((10, 3))
    single = log_likelihood(m, x)
    doubled = log_likelihood(m, np.concatenate([x, x]))
    assert np.isclose(doubled, 2 * single, rtol=1e-12)


def test_log_likelihood_matches_direct_sum_oracle():
    rng = np.random.default_rng(14)
    m = toy_model(rng, k=2)
    x = rng.standard_normal((25, 3)) + 1j * rng.standard_normal((25, 3))
    expected = sum(
        np.log(sum(w * oracles.complex_gauss_pdf(xi, mu, c)
                   for w, mu, c in zip(m.weights, m.means, m.covariances)))
        for xi in x)
    assert np.isclose(log_likelihood(m, x), expected, atol=1e-8)


def test_parameter_count_formulas():
    m = GmmModel(weights=[1.0], means=[[0.0]],
                 covariances=[np.eye(1, dtype=complex)])
    assert parameter_count(m) == 1
    rng = np.random.default_rng(15)
    full = toy_model(rng, k=3, dim=4)
    assert parameter_count(full) == 3 * 4 * 5 // 2
    kron = GmmModel(
        weights=[1.0], means=[np.zeros(6)],
        covariances=[np.eye(6, dtype=complex)],
        kronecker=KroneckerFactors(cov_tx=np.eye(3, dtype=complex)[None],
                                   cov_rx=np.eye(2, dtype=complex)[None]))
    assert parameter_count(kron) == (1 * 2 * 3 // 2) + (1 * 3 * 4 // 2)


# ---------------------------------------------------------------------------
# EM fitting


def test_fit_single_component_closed_form():
    rng = np.random.default_rng(16)
    x = rng.standard_normal((400, 3)) + 1j * rng.standard_normal((400, 3))
    reg = 1e-9
    m = fit_em(x, 1, max_iter=5, reg_eps=reg, init_seed=0)
    mean = x.mean(axis=0)
    diff = x - mean
    cov = diff.T @ diff.conj() / len(x)
    assert np.allclose(m.means[0], mean, atol=1e-10)
    assert np.allclose(m.covariances[0], cov + reg * np.eye(3), atol=1e-9)
    assert np.allclose(m.weights, [1.0])


def test_fit_two_separated_components():
    rng = np.random.default_rng(17)
    n = 1000
    c1 = 0.05 * np.eye(2, dtype=complex)
    mu1 = np.array([3.0 + 0j, 0.0])
    mu2 = np.array([-3.0 + 0j, 0.0])
    x = np.concatenate([
        mu1 + complex_normal(rng, (n // 2, 2), 0.05),
        mu2 + complex_normal(rng, (n // 2, 2), 0.05)])
    m = fit_em(x, 2, max_iter=100, tol=1e-9, init_seed=1)
    order = np.argsort(np.real(m.means[:, 0]))
    assert np.all(np.abs(m.weights - 0.5) < 0.05)
    assert np.linalg.norm(m.means[order[1]] - mu1) < 0.1
    assert np.linalg.norm(m.means[order[0]] - mu2) < 0.1


def test_fit_infinite_tol_one_iteration():
    rng = np.random.default_rng(18)
    x = rng.standard_normal((50, 2)) + 1j * rng.standard_normal((50, 2))
    m = fit_em(x, 2, max_iter=100, tol=np.inf, init_seed=0)
    assert len(m.fit_log_likelihoods) == 2  # init eval + the stopping eval


def test_fit_loglik_monotone():
    rng = np.random.default_rng(19)
    x = np.concatenate([
        1.5 + complex_normal(rng, (150, 3), 0.4),
        -1.5 + complex_normal(rng, (150, 3), 0.7)])
    m = fit_em(x, 3, max_iter=60, tol=1e-10, init_seed=3)
    ll = m.fit_log_likelihoods
    assert np.all(np.diff(ll) >= -1e-8 * np.maximum(1.0, np.abs(ll[:-1])))


def test_fit_rejects_k_too_large():
    rng = np.random.default_rng(20)
    x = rng.standard_normal((3, 2)) + 0j
    with pytest.raises(ArgumentError):
        fit_em(x, 4)


def test_fit_dataset_records_channel_shape():
    rng = np.random.default_rng(21)
    cfg = ScenarioConfig(ntx_h=2, ntx_v=1, nrx=2)
    ds = ChannelDataset(complex_normal(rng, (40, 2, 2)), "DL", cfg)
    m = fit_em(ds, 2, max_iter=10, init_seed=0)
    assert m.channel_shape == (2, 2)


# ---------------------------------------------------------------------------
# Kronecker fitting


def test_kronecker_single_pair_matches_side_covariances():
    rng = np.random.default_rng(22)
    cfg = ScenarioConfig(ntx_h=3, ntx_v=1, nrx=2)
    h = complex_normal(rng, (300, 2, 3))
    ds = ChannelDataset(h, "DL", cfg)
    reg = 1e-9
    m = fit_kronecker(ds, 1, 1, reg_eps=reg, max_iter=5)
    rows = h.reshape(-1, 3)
    cols = h.transpose(0, 2, 1).reshape(-1, 2)
    c_tx = (rows - rows.mean(0)).T @ (rows - rows.mean(0)).conj() / len(rows)
    c_rx = (cols - cols.mean(0)).T @ (cols - cols.mean(0)).conj() / len(cols)
    assert np.allclose(m.kronecker.cov_tx[0], c_tx + reg * np.eye(3), atol=1e-8)
    assert np.allclose(m.kronecker.cov_rx[0], c_rx + reg * np.eye(2), atol=1e-8)


def test_kronecker_covariances_exactly_kron_of_factors():
    rng = np.random.default_rng(23)
    cfg = ScenarioConfig(ntx_h=2, ntx_v=1, nrx=2)
    ds = ChannelDataset(complex_normal(rng, (200, 2, 2)), "DL", cfg)
    m = fit_kronecker(ds, 2, 2, max_iter=15, init_seed=0)
    assert m.k == 4
    for a in range(2):
        for b in range(2):
            i = a * 2 + b
            expected = np.kron(m.kronecker.cov_tx[a], m.kronecker.cov_rx[b])
            assert np.array_equal(m.covariances[i], expected)


def test_kronecker_weights_valid_and_param_count_below_full():
    rng = np.random.default_rng(24)
    cfg = ScenarioConfig(ntx_h=2, ntx_v=2, nrx=2)
    ds = ChannelDataset(complex_normal(rng, (300, 2, 4)), "DL", cfg)
    m = fit_kronecker(ds, 2, 2, max_iter=10)
    assert np.isclose(m.weights.sum(), 1.0, atol=1e-12)
    full_equivalent = 4 * 8 * 9 // 2
    assert parameter_count(m) < full_equivalent
    assert m.channel_shape == (2, 4)
