"""Spectral efficiency and water-filling primitives shared by codebook
construction and precoding."""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, DegenerateDataError

LOG2 = float(np.log(2.0))


def _check_psd(q: np.ndarray, tol: float = 1e-8) -> None:
    q = np.asarray(q)
    if q.shape[0] != q.shape[1] or not np.allclose(q, q.conj().T, atol=1e-8):
        raise ArgumentError("Q must be a Hermitian matrix")
    vals = np.linalg.eigvalsh(q)
    scale = max(float(vals[-1]), 1.0)
    if vals[0] < -tol * scale:
        raise ArgumentError(f"Q is not positive semidefinite (min eig {vals[0]:.3e})")


def spectral_efficiency(h: np.ndarray, q: np.ndarray, sigma2: float,
                        validate: bool = True) -> float:
    """Achievable rate log2 det(I + H Q H^H / sigma2) in bits/s/Hz."""
    if validate:
        _check_psd(q)
    h = np.asarray(h, dtype=complex)
    m = h @ q @ h.conj().T / sigma2
    m[np.diag_indices(m.shape[0])] += 1.0
    sign, logdet = np.linalg.slogdet(m)
    return max(float(logdet) / LOG2, 0.0)


def rates_for_entries(h: np.ndarray, entries: np.ndarray, sigma2: float) -> np.ndarray:
    """Rate of one channel against a stack of covariance entries [K x nt x nt].

    Trusts the entries to be Hermitian PSD (they come from validated codebooks).
    """
    hq = np.einsum("rt,ktu->kru", h, entries)
    m = np.einsum("kru,su->krs", hq, h.conj()) / sigma2
    nr = h.shape[0]
    m[:, np.arange(nr), np.arange(nr)] += 1.0
    _, logdet = np.linalg.slogdet(m)
    return np.maximum(logdet / LOG2, 0.0)


def rates_for_channels(hs: np.ndarray, q: np.ndarray, sigma2: float) -> np.ndarray:
    """Rate of a stack of channels [V x nr x nt] against one covariance."""
    hq = np.einsum("vrt,tu->vru", hs, q)
    m = np.einsum("vru,vsu->vrs", hq, hs.conj()) / sigma2
    nr = hs.shape[1]
    m[:, np.arange(nr), np.arange(nr)] += 1.0
    _, logdet = np.linalg.slogdet(m)
    return np.maximum(logdet / LOG2, 0.0)


def rates_matrix(hs: np.ndarray, entries: np.ndarray, sigma2: float,
                 chunk: int = 512) -> np.ndarray:
    """All-pairs rates of channels [M x nr x nt] against entries [K x nt x nt]."""
    m = hs.shape[0]
    k, nr = entries.shape[0], hs.shape[1]
    out = np.empty((m, k))
    for start in range(0, m, chunk):
        block = hs[start:start + chunk]
        hq = np.einsum("vrt,ktu->vkru", block, entries)
        mat = np.einsum("vkru,vsu->vkrs", hq, block.conj()) / sigma2
        mat[:, :, np.arange(nr), np.arange(nr)] += 1.0
        _, logdet = np.linalg.slogdet(mat)
        out[start:start + chunk] = logdet / LOG2
    return np.maximum(out, 0.0)


def waterfill_power(gains: np.ndarray, rho: float, sigma2: float) -> np.ndarray:
    """Optimal power split over parallel channels with power gains ``gains``.

    Maximizes sum log2(1 + g_i p_i / sigma2) subject to p >= 0, sum p = rho;
    the full budget is always used.
    """
    gains = np.asarray(gains, dtype=float)
    if np.all(gains <= 0):
        raise DegenerateDataError("all channel gains are zero; water-filling undefined")
    if rho <= 0:
        raise ArgumentError("rho must be positive")
    order = np.argsort(gains)[::-1]
    g = gains[order]
    n_active = int(np.sum(g > 0))
    inv = sigma2 / g[:n_active]
    # largest m such that the water level over the m strongest stays above 1/g_m
    m = n_active
    while m > 1:
        level = (rho + inv[:m].sum()) / m
        if level > inv[m - 1]:
            break
        m -= 1
    level = (rho + inv[:m].sum()) / m
    p_sorted = np.zeros_like(g)
    p_sorted[:m] = level - inv[:m]
    # exact budget in the face of roundoff
    p_sorted[:m] += (rho - p_sorted[:m].sum()) / m
    p = np.zeros_like(gains)
    p[order] = p_sorted
    return p
