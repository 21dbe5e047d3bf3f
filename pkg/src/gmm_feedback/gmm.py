"""Complex-valued Gaussian mixture models with full or Kronecker covariances.

Densities are circularly symmetric complex Gaussians,
log N(x; mu, C) = -D log(pi) - log det C - (x-mu)^H C^{-1} (x-mu),
and all mixture computations run in the log domain with max-subtraction.
Models are treated as immutable once fitted; per-component Cholesky factors
and log-determinants are cached lazily so repeated evaluation is cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .channels import ChannelDataset
from .errors import ArgumentError, DegenerateDataError, ModelIntegrityError
from .pilots import complex_normal

_LOG_PI = float(np.log(np.pi))
_COLLAPSE_TOL = 1e-12


@dataclass
class KroneckerFactors:
    """Per-side covariance factors: component (a, b) has C = cov_tx[a] kron cov_rx[b]."""

    cov_tx: np.ndarray  # [K_tx, ntx, ntx]
    cov_rx: np.ndarray  # [K_rx, nrx, nrx]

    @property
    def k_tx(self) -> int:
        return self.cov_tx.shape[0]

    @property
    def k_rx(self) -> int:
        return self.cov_rx.shape[0]


class _DensityCache:
    """Cholesky-based evaluation helpers for a bank of Gaussian components."""

    def __init__(self, means: np.ndarray, covariances: np.ndarray):
        self.means = means
        k, d, _ = covariances.shape
        chol = np.empty_like(covariances)
        for i in range(k):
            try:
                chol[i] = np.linalg.cholesky(covariances[i])
            except np.linalg.LinAlgError as exc:
                raise ModelIntegrityError(
                    f"component {i} covariance is not positive definite") from exc
        eye = np.eye(d, dtype=complex)
        # inverse Cholesky factors let log-densities be one batched einsum
        self.chol = chol
        self.chol_inv = np.array(
            [np.linalg.solve(chol[i], eye) for i in range(k)])
        diag = np.real(np.einsum("kii->ki", chol))
        self.log_dets = 2.0 * np.sum(np.log(diag), axis=1)

    def log_prob(self, x: np.ndarray) -> np.ndarray:
        """Per-component log densities; x is [M x D] or [D], result [M x K] or [K]."""
        single = x.ndim == 1
        xs = x[None, :] if single else x
        m, d = xs.shape
        k = self.means.shape[0]
        out = np.empty((m, k))
        for i in range(k):
            # rows become L^{-1} (x - mu); the squared norm is the quadratic form
            z = (xs - self.means[i]) @ self.chol_inv[i].T
            out[:, i] = -d * _LOG_PI - self.log_dets[i] - np.sum(
                z.real ** 2 + z.imag ** 2, axis=1)
        return out[0] if single else out


@dataclass
class GmmModel:
    """Mixture weights, complex means, and Hermitian PSD covariances."""

    weights: np.ndarray          # [K]
    means: np.ndarray            # [K, D]
    covariances: np.ndarray      # [K, D, D]
    kronecker: KroneckerFactors | None = None
    channel_shape: tuple[int, int] | None = None
    fit_log_likelihoods: np.ndarray | None = None
    _cache: _DensityCache | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=complex)
        self.covariances = np.asarray(self.covariances, dtype=complex)
        if self.weights.ndim != 1 or self.means.ndim != 2 or self.covariances.ndim != 3:
            raise ArgumentError("weights/means/covariances have inconsistent ranks")
        k = self.weights.shape[0]
        if self.means.shape[0] != k or self.covariances.shape[0] != k:
            raise ArgumentError("component count mismatch across parameters")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ModelIntegrityError("weights must be nonnegative and sum to 1")
        # positive semidefiniteness is checked lazily where factors are needed
        if not np.allclose(self.covariances,
                           self.covariances.conj().transpose(0, 2, 1), atol=1e-10):
            raise ModelIntegrityError("covariances must be Hermitian")
        if self.kronecker is not None and self.kronecker.k_tx * self.kronecker.k_rx != k:
            raise ModelIntegrityError("Kronecker factor counts do not multiply to K")

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def structure(self) -> str:
        return "full" if self.kronecker is None else "kronecker"

    def density_cache(self) -> _DensityCache:
        if self._cache is None:
            self._cache = _DensityCache(self.means, self.covariances)
        return self._cache

    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)


@dataclass
class AdaptedGmm:
    """Observation-domain view of a channel GMM for a fixed operator and noise level.

    Component k of the channel mixture maps to a Gaussian with mean A mu_k and
    covariance A C_k A^H + sigma2 I; the mixture weights are unchanged, so no
    refitting is needed when A or sigma2 change.
    """

    base: GmmModel
    A: np.ndarray
    sigma2: float
    means_y: np.ndarray
    _cache: _DensityCache
    _filters: np.ndarray | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.base.k

    @property
    def dim(self) -> int:
        return self.means_y.shape[1]

    def density_cache(self) -> _DensityCache:
        return self._cache

    def log_weights(self) -> np.ndarray:
        return self.base.log_weights()

    def filters(self) -> np.ndarray:
        """Cached per-component cross-covariance factors C_k A^H, shape [K, D, L]."""
        if self._filters is None:
            self._filters = np.einsum(
                "kde,le->kdl", self.base.covariances, self.A.conj())
        return self._filters


def adapt_to_observation(model: GmmModel, a: np.ndarray, sigma2: float) -> AdaptedGmm:
    """Build the observation-domain mixture for operator ``a`` and noise ``sigma2``."""
    if sigma2 <= 0:
        raise ArgumentError("sigma2 must be positive to keep covariances definite")
    a = np.asarray(a, dtype=complex)
    if a.shape[1] != model.dim:
        raise ArgumentError(
            f"operator width {a.shape[1]} does not match model dimension {model.dim}")
    means_y = model.means @ a.T
    l = a.shape[0]
    covs_y = np.empty((model.k, l, l), dtype=complex)
    for i in range(model.k):
        ac = a @ model.covariances[i]
        covs_y[i] = ac @ a.conj().T
        covs_y[i][np.diag_indices(l)] += sigma2
        covs_y[i] = 0.5 * (covs_y[i] + covs_y[i].conj().T)
    return AdaptedGmm(base=model, A=a, sigma2=float(sigma2), means_y=means_y,
                      _cache=_DensityCache(means_y, covs_y))


def _weighted_log_prob(model: GmmModel | AdaptedGmm, x: np.ndarray) -> np.ndarray:
    return model.density_cache().log_prob(x) + model.log_weights()


def responsibilities(model: GmmModel | AdaptedGmm, x: np.ndarray) -> np.ndarray:
    """Posterior component probabilities p(k | x); rows sum to 1."""
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise ArgumentError("input contains non-finite values")
    if x.shape[-1] != model.dim:
        raise ArgumentError(
            f"input dimension {x.shape[-1]} does not match model dimension {model.dim}")
    wlp = _weighted_log_prob(model, x)
    wlp = wlp - np.max(wlp, axis=-1, keepdims=True)
    p = np.exp(wlp)
    return p / np.sum(p, axis=-1, keepdims=True)


def log_likelihood(model: GmmModel, data: ChannelDataset | np.ndarray) -> float:
    """Total log mixture density of a dataset under the model."""
    x = data.vectors() if isinstance(data, ChannelDataset) else np.asarray(data)
    if x.ndim == 1:
        x = x[None, :]
    return float(np.sum(logsumexp(_weighted_log_prob(model, x), axis=1)))


def sample_component(model: GmmModel, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from component ``k`` (1-based): mu_k + chol(C_k) z, z standard complex normal."""
    if not 1 <= k <= model.k:
        raise ArgumentError(f"component index must be in [1, {model.k}], got {k}")
    c = model.covariances[k - 1]
    factor = _psd_factor(c)
    z = complex_normal(rng, model.dim)
    return model.means[k - 1] + factor @ z


def _psd_factor(c: np.ndarray) -> np.ndarray:
    """Square root factor F with F F^H = C for Hermitian PSD C (may be singular)."""
    try:
        return np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(0.5 * (c + c.conj().T))
        scale = max(vals.max(initial=0.0), 1.0)
        if vals.min(initial=0.0) < -1e-10 * scale:
            raise ModelIntegrityError("covariance has significantly negative eigenvalues")
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def full_parameter_count(k: int, dim: int) -> int:
    return k * dim * (dim + 1) // 2


def kronecker_parameter_count(k_tx: int, k_rx: int, ntx: int, nrx: int) -> int:
    return (k_rx * nrx * (nrx + 1) // 2) + (k_tx * ntx * (ntx + 1) // 2)


def parameter_count(model: GmmModel) -> int:
    """Covariance parameter count; Hermitian D x D matrices carry D(D+1)/2 parameters."""
    if model.kronecker is None:
        return full_parameter_count(model.k, model.dim)
    kf = model.kronecker
    return kronecker_parameter_count(kf.k_tx, kf.k_rx,
                                     kf.cov_tx.shape[1], kf.cov_rx.shape[1])


# ---------------------------------------------------------------------------
# EM fitting


def _kmeans_pp_assign(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ center seeding followed by a single hard assignment pass."""
    m = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=complex)
    centers[0] = x[rng.integers(m)]
    d2 = np.sum(np.abs(x - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = x[rng.integers(m)]
            continue
        centers[i] = x[rng.choice(m, p=d2 / total)]
        d2 = np.minimum(d2, np.sum(np.abs(x - centers[i]) ** 2, axis=1))
    dists = np.empty((m, k))
    for i in range(k):
        dists[:, i] = np.sum(np.abs(x - centers[i]) ** 2, axis=1)
    return np.argmin(dists, axis=1)


def _cluster_init(x: np.ndarray, k: int, reg: float, rng: np.random.Generator,
                  zero_mean: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m, d = x.shape
    labels = _kmeans_pp_assign(x, k, rng)
    weights = np.empty(k)
    means = np.zeros((k, d), dtype=complex)
    covs = np.empty((k, d, d), dtype=complex)
    global_mean = np.zeros(d) if zero_mean else x.mean(axis=0)
    diff_all = x - global_mean
    global_cov = diff_all.T @ diff_all.conj() / m
    for i in range(k):
        sel = x[labels == i]
        weights[i] = max(len(sel), 1) / m
        if len(sel) == 0:
            covs[i] = global_cov.copy()
        else:
            if not zero_mean:
                means[i] = sel.mean(axis=0)
            diff = sel - means[i]
            covs[i] = diff.T @ diff.conj() / len(sel)
        covs[i][np.diag_indices(d)] += reg
    weights /= weights.sum()
    return weights, means, covs


def _m_step(x: np.ndarray, resp: np.ndarray, reg: float, zero_mean: bool
            ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m, d = x.shape
    nk = resp.sum(axis=0)
    weights = nk / m
    safe_nk = nk + 10 * np.finfo(float).eps
    means = (resp.T @ x) / safe_nk[:, None]
    if zero_mean:
        means = np.zeros_like(means)
    covs = np.empty((resp.shape[1], d, d), dtype=complex)
    for i in range(resp.shape[1]):
        diff = x - means[i]
        covs[i] = (resp[:, i] * diff.T) @ diff.conj() / safe_nk[i]
        covs[i][np.diag_indices(d)] += reg
    return weights, means, covs


def default_reg_eps(x: np.ndarray) -> float:
    """Default covariance regularizer: 1e-6 times the average per-dimension energy."""
    return 1e-6 * float(np.mean(np.abs(x) ** 2))


def fit_em(data: ChannelDataset | np.ndarray, k: int, *, max_iter: int = 100,
           tol: float = 1e-5, reg_eps: float | None = None, init_seed: int = 0,
           zero_mean: bool = False) -> GmmModel:
    """Fit a K-component complex GMM by expectation maximization.

    The per-iteration log-likelihood trace (evaluated before each M-step) is
    stored on the returned model; it is nondecreasing up to regularization
    noise.  A component whose weight collapses below 1e-12 is re-seeded once
    from the worst-modeled sample; a second collapse raises.
    """
    x = data.vectors() if isinstance(data, ChannelDataset) else np.asarray(data, dtype=complex)
    m, d = x.shape
    if k < 1 or k > m:
        raise ArgumentError(f"need 1 <= K <= {m} samples, got K={k}")
    if max_iter < 1:
        raise ArgumentError("max_iter must be >= 1")
    reg = default_reg_eps(x) if reg_eps is None else float(reg_eps)
    rng = np.random.default_rng(init_seed)
    weights, means, covs = _cluster_init(x, k, reg, rng, zero_mean)

    ll_trace: list[float] = []
    prev_ll = -np.inf
    reseeded = set()
    for it in range(max_iter):
        cache = _DensityCache(means, covs)
        with np.errstate(divide="ignore"):
            wlp = cache.log_prob(x) + np.log(weights)
        norm = logsumexp(wlp, axis=1)
        ll = float(norm.sum())
        ll_trace.append(ll)
        if it > 0 and abs(ll - prev_ll) <= tol * max(1.0, abs(prev_ll)):
            break
        prev_ll = ll
        resp = np.exp(wlp - norm[:, None])
        weights, means, covs = _m_step(x, resp, reg, zero_mean)
        collapsed = np.flatnonzero(weights < _COLLAPSE_TOL)
        for i in collapsed:
            if i in reseeded:
                raise DegenerateDataError(
                    f"component {i} collapsed twice during EM")
            reseeded.add(int(i))
            worst = int(np.argmin(norm))
            means[i] = 0 if zero_mean else x[worst]
            covs[i] = covs.mean(axis=0)
            weights[i] = 1.0 / m
        if len(collapsed):
            weights /= weights.sum()

    weights = weights / weights.sum()
    shape = data.shape if isinstance(data, ChannelDataset) else None
    return GmmModel(weights=weights, means=means, covariances=covs,
                    channel_shape=shape, fit_log_likelihoods=np.array(ll_trace))


def fit_kronecker(ds: ChannelDataset, k_tx: int, k_rx: int, *,
                  max_iter: int = 100, tol: float = 1e-5,
                  reg_eps: float | None = None, init_seed: int = 0,
                  zero_mean: bool = False,
                  weight_refine_steps: int = 10) -> GmmModel:
    """Fit a Kronecker-structured GMM with K = k_tx * k_rx components.

    A transmit-side mixture is fitted on all matrix rows (one per receive
    antenna) and a receive-side mixture on all matrix columns; the full model
    combines every pair of side covariances as a Kronecker product, pairs the
    side means as vec(mu_rx mu_tx^T), initializes weights as products, and
    then refines the weights only with a few EM steps on the full set.
    """
    h = ds.channels
    m, nr, nc = h.shape
    if max(k_tx, k_rx) > m:
        raise ArgumentError(f"need max(k_tx, k_rx) <= {m} samples")
    rows = h.reshape(m * nr, nc)
    cols = np.ascontiguousarray(h.transpose(0, 2, 1)).reshape(m * nc, nr)
    gm_tx = fit_em(rows, k_tx, max_iter=max_iter, tol=tol, reg_eps=reg_eps,
                   init_seed=init_seed, zero_mean=zero_mean)
    gm_rx = fit_em(cols, k_rx, max_iter=max_iter, tol=tol, reg_eps=reg_eps,
                   init_seed=init_seed + 1, zero_mean=zero_mean)

    k = k_tx * k_rx
    d = nr * nc
    weights = np.empty(k)
    means = np.empty((k, d), dtype=complex)
    covs = np.empty((k, d, d), dtype=complex)
    for a in range(k_tx):
        for b in range(k_rx):
            i = a * k_rx + b
            weights[i] = gm_tx.weights[a] * gm_rx.weights[b]
            means[i] = np.kron(gm_tx.means[a], gm_rx.means[b])
            covs[i] = np.kron(gm_tx.covariances[a], gm_rx.covariances[b])
    weights /= weights.sum()

    # weight-only refinement: component densities are fixed, so the per-sample
    # log-probabilities can be computed once
    x = ds.vectors()
    log_prob = _DensityCache(means, covs).log_prob(x)
    for _ in range(weight_refine_steps):
        with np.errstate(divide="ignore"):
            wlp = log_prob + np.log(weights)
        resp = np.exp(wlp - logsumexp(wlp, axis=1)[:, None])
        weights = resp.sum(axis=0) / m
        weights = np.maximum(weights, 1e-300)
        weights /= weights.sum()

    return GmmModel(weights=weights, means=means, covariances=covs,
                    kronecker=KroneckerFactors(cov_tx=gm_tx.covariances,
                                               cov_rx=gm_rx.covariances),
                    channel_shape=(nr, nc))
