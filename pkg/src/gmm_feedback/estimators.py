"""Baseline downlink channel estimators: mixture-of-LMMSE, sample-covariance
LMMSE, and genie-aided orthogonal matching pursuit on an angular dictionary."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ArgumentError, ConfigurationError
from .gmm import AdaptedGmm, responsibilities


def estimate_gmm(adapted: AdaptedGmm, y: np.ndarray) -> np.ndarray:
    """Mixture-of-LMMSE channel estimate.

    Each component contributes its own LMMSE estimate
    C_k A^H (A C_k A^H + sigma2 I)^{-1} (y - A mu_k) + mu_k, weighted by the
    posterior probability of that component given the observation.
    """
    y = np.asarray(y, dtype=complex)
    if y.shape[0] != adapted.dim:
        raise ArgumentError(
            f"observation length {y.shape[0]} does not match adapted dimension {adapted.dim}")
    p = responsibilities(adapted, y)
    cache = adapted.density_cache()
    diff = y[None, :] - adapted.means_y                       # [K, L]
    z = np.einsum("kle,ke->kl", cache.chol_inv, diff)
    t = np.einsum("kel,ke->kl", cache.chol_inv.conj(), z)      # (cov_y)^{-1} diff
    per_comp = np.einsum("kdl,kl->kd", adapted.filters(), t) + adapted.base.means
    return p @ per_comp


def sample_covariance(vectors: np.ndarray) -> np.ndarray:
    """Hermitian sample covariance (1/M) sum h h^H of row-stacked vectors."""
    x = np.asarray(vectors, dtype=complex)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] == 0:
        raise ArgumentError("dataset must be non-empty")
    c = x.T @ x.conj() / x.shape[0]
    return 0.5 * (c + c.conj().T)


def estimate_lmmse(c_s: np.ndarray, a: np.ndarray, sigma2: float,
                   y: np.ndarray) -> np.ndarray:
    """LMMSE estimate C A^H (A C A^H + sigma2 I)^{-1} y for a zero-mean prior."""
    a = np.asarray(a, dtype=complex)
    w = a @ c_s @ a.conj().T
    w[np.diag_indices(w.shape[0])] += sigma2
    z = cho_solve(cho_factor(w, lower=True), y)
    return c_s @ (a.conj().T @ z)


@dataclass
class Dictionary:
    """Angular dictionary of Kronecker-structured oversampled DFT atoms.

    Atoms are ordered transmit-major so they match the column-stacking
    vectorization of [nrx x ntx] channels: D = (D_tx_h kron D_tx_v) kron D_rx.
    All columns have unit norm.
    """

    matrix: np.ndarray
    oversampling: tuple[int, int, int]  # (rx, tx_h, tx_v)


def _axis_dictionary(n: int, oversampling: int) -> np.ndarray:
    grid = oversampling * n
    m = np.arange(n)[:, None]
    g = np.arange(grid)[None, :]
    return np.exp(-2j * np.pi * m * g / grid) / np.sqrt(n)


def build_dictionary(ntx_h: int, ntx_v: int, nrx: int,
                     oversampling: tuple[int, int, int] = (2, 2, 2)) -> Dictionary:
    """Dictionary for vectorized channels of an (ntx_h x ntx_v) URA and nrx ULA."""
    ov_rx, ov_h, ov_v = oversampling
    d_rx = _axis_dictionary(nrx, ov_rx)
    d_h = _axis_dictionary(ntx_h, ov_h)
    d_v = _axis_dictionary(ntx_v, ov_v)
    return Dictionary(matrix=np.kron(np.kron(d_h, d_v), d_rx),
                      oversampling=oversampling)


def estimate_omp_genie(dictionary: Dictionary, a: np.ndarray, y: np.ndarray,
                       h_true: np.ndarray, s_max: int) -> tuple[np.ndarray, int]:
    """Orthogonal matching pursuit with genie-aided sparsity selection.

    Runs OMP on the effective dictionary A D, keeping the reconstruction
    D t_s for every support size s = 1..s_max, and returns the one closest
    to the true channel together with the chosen sparsity.
    """
    d = dictionary.matrix
    y = np.asarray(y, dtype=complex)
    h_true = np.asarray(h_true, dtype=complex).reshape(-1)
    if s_max < 1 or s_max > y.shape[0]:
        raise ArgumentError(f"s_max must be in [1, {y.shape[0]}], got {s_max}")
    ad = a @ d
    norms = np.linalg.norm(ad, axis=0)
    if np.any(norms == 0):
        raise ConfigurationError("effective dictionary contains a zero column")
    ad_unit = ad / norms

    support: list[int] = []
    residual = y.copy()
    best = (np.inf, np.zeros_like(h_true), 0)
    # larger supports must beat the incumbent by more than roundoff, so exact
    # recoveries keep the smallest sparsity
    margin = 1e-12 * float(np.linalg.norm(h_true)) + 1e-15
    for s in range(1, s_max + 1):
        scores = np.abs(ad_unit.conj().T @ residual)
        scores[support] = -1.0
        support.append(int(np.argmax(scores)))
        coeff, *_ = np.linalg.lstsq(ad[:, support], y, rcond=None)
        residual = y - ad[:, support] @ coeff
        h_s = d[:, support] @ coeff
        err = float(np.linalg.norm(h_s - h_true))
        if err < best[0] - margin:
            best = (err, h_s, s)
    return best[1], best[2]
