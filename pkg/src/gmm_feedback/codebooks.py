"""Codebook construction: Lloyd and GMM-component transmit-covariance
codebooks via projected gradient ascent, directional extraction, and random
Grassmannian codebooks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelDataset
from .errors import ArgumentError, RankDeficiencyError
from .gmm import GmmModel, responsibilities
from .pilots import complex_normal
from .rates import (LOG2, rates_for_channels, rates_for_entries, rates_matrix,
                    spectral_efficiency, waterfill_power)

__all__ = [
    "CovCodebook", "DirCodebook", "PgaOptions", "spectral_efficiency",
    "project_psd_trace", "pga_sum_rate", "lloyd_codebook", "lau_update",
    "gmm_codebook", "extract_directions", "random_grassmann_codebook",
]


@dataclass
class CovCodebook:
    """Transmit-covariance codebook: K Hermitian PSD entries with tr <= rho."""

    entries: np.ndarray  # [K, nt, nt]
    design_snr_db: float
    rho: float

    def __len__(self) -> int:
        return self.entries.shape[0]


@dataclass
class DirCodebook:
    """Directional codebook of semi-unitary [nt x nr] matrices."""

    entries: np.ndarray  # [K, nt, nr]

    def __len__(self) -> int:
        return self.entries.shape[0]


@dataclass
class PgaOptions:
    max_iter: int = 150
    step_init: float = 1.0
    tol: float = 1e-8
    max_backtracks: int = 30
    armijo: float = 1e-4


def project_psd_trace(q_raw: np.ndarray, rho: float) -> np.ndarray:
    """Euclidean projection onto {Q >= 0, tr Q <= rho}.

    Eigenvalues are projected onto the capped simplex {lam >= 0,
    sum lam <= rho}; eigenvectors are untouched.
    """
    q_raw = 0.5 * (q_raw + q_raw.conj().T)
    vals, vecs = np.linalg.eigh(q_raw)
    clipped = np.clip(vals, 0.0, None)
    if clipped.sum() > rho:
        # project onto the simplex sum = rho: lam_i = max(vals_i - tau, 0)
        desc = np.sort(vals)[::-1]
        cumsum = np.cumsum(desc)
        idx = np.arange(1, len(desc) + 1)
        taus = (cumsum - rho) / idx
        m = int(np.max(np.flatnonzero(desc - taus > 0)) + 1)
        tau = (cumsum[m - 1] - rho) / m
        clipped = np.clip(vals - tau, 0.0, None)
    q = (vecs * clipped) @ vecs.conj().T
    return 0.5 * (q + q.conj().T)


def _mean_rate(hs: np.ndarray, q: np.ndarray, sigma2: float) -> float:
    return float(np.mean(rates_for_channels(hs, q, sigma2)))


def _mean_rate_gradient(hs: np.ndarray, q: np.ndarray, sigma2: float) -> np.ndarray:
    """Gradient of the mean rate (in bits) with respect to Hermitian Q."""
    hq = np.einsum("vrt,tu->vru", hs, q)
    m = np.einsum("vru,vsu->vrs", hq, hs.conj())
    nr = hs.shape[1]
    m[:, np.arange(nr), np.arange(nr)] += sigma2
    minv = np.linalg.inv(m)
    grad = np.einsum("vrt,vrs,vsu->tu", hs.conj(), minv, hs) / (hs.shape[0] * LOG2)
    return 0.5 * (grad + grad.conj().T)


def pga_sum_rate(cluster: np.ndarray | list, rho: float, sigma2: float,
                 opts: PgaOptions | None = None,
                 warm_start: np.ndarray | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Maximize the mean rate over a channel cluster by projected gradient ascent.

    Armijo backtracking guarantees the objective trace is nondecreasing; the
    iterate stays feasible because every step ends with a projection.
    Returns the optimized covariance and the objective trace.
    """
    hs = np.asarray(cluster, dtype=complex)
    if hs.ndim != 3 or hs.shape[0] == 0:
        raise ArgumentError("cluster must be a non-empty [V x nr x nt] stack")
    opts = opts or PgaOptions()
    nt = hs.shape[2]
    q = project_psd_trace(
        warm_start if warm_start is not None else (rho / nt) * np.eye(nt, dtype=complex),
        rho)
    f = _mean_rate(hs, q, sigma2)
    trace = [f]
    for _ in range(opts.max_iter):
        grad = _mean_rate_gradient(hs, q, sigma2)
        step = opts.step_init
        accepted = False
        for _ in range(opts.max_backtracks):
            q_new = project_psd_trace(q + step * grad, rho)
            f_new = _mean_rate(hs, q_new, sigma2)
            gain = np.real(np.vdot(grad, q_new - q))
            if f_new >= f + opts.armijo * gain and f_new >= f:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        delta = f_new - f
        q, f = q_new, f_new
        trace.append(f)
        if delta <= opts.tol * max(1.0, abs(f)):
            break
    return q, np.asarray(trace)


def lau_update(cluster: np.ndarray | list, nrx: int, rho: float,
               sigma2: float) -> np.ndarray:
    """Water-filling heuristic codebook update.

    Forms the cluster representative S = mean(H^H H), keeps its top-nrx
    eigenpairs, and water-fills the power budget over them.  The trace of the
    result equals rho exactly.
    """
    hs = np.asarray(cluster, dtype=complex)
    if hs.ndim != 3 or hs.shape[0] == 0:
        raise ArgumentError("cluster must be a non-empty [V x nr x nt] stack")
    s = np.einsum("vrt,vru->tu", hs.conj(), hs) / hs.shape[0]
    return _waterfill_representative(0.5 * (s + s.conj().T), nrx, rho, sigma2)


def _waterfill_representative(s: np.ndarray, nrx: int, rho: float,
                              sigma2: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(s)
    top = np.argsort(vals)[::-1][:nrx]
    gains = np.clip(vals[top], 0.0, None)
    p = waterfill_power(gains, rho, sigma2)
    v = vecs[:, top]
    q = (v * p) @ v.conj().T
    return 0.5 * (q + q.conj().T)


@dataclass
class LloydOptions:
    max_outer: int = 30
    seed: int = 0
    pga: PgaOptions = field(default_factory=lambda: PgaOptions(max_iter=25))


def lloyd_codebook(train: ChannelDataset | np.ndarray, k: int, rho: float,
                   sigma2: float, opts: LloydOptions | None = None
                   ) -> tuple[CovCodebook, np.ndarray]:
    """Rate-based Lloyd clustering with PGA codebook updates.

    Starts from a seeded random partition, alternates rate-maximizing
    assignment (ties to the lowest index) with per-cluster PGA updates warm
    started from the previous entries, and stops at an assignment fixed point
    or after ``max_outer`` iterations.  Also returns the per-iteration mean
    selected rate over the training set.
    """
    hs = train.channels if isinstance(train, ChannelDataset) else np.asarray(train)
    m = hs.shape[0]
    if m < k:
        raise ArgumentError(f"need at least {k} training channels, got {m}")
    opts = opts or LloydOptions()
    rng = np.random.default_rng(opts.seed)
    assign = rng.integers(k, size=m)
    entries: list[np.ndarray | None] = [None] * k
    selected_trace = []
    for _ in range(opts.max_outer):
        entries = _update_entries(hs, assign, entries, k, rho, sigma2, opts.pga)
        rate_matrix = rates_matrix(hs, np.stack(entries), sigma2)
        new_assign = np.argmax(rate_matrix, axis=1)
        selected_trace.append(float(np.mean(np.max(rate_matrix, axis=1))))
        if np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign
    cb = CovCodebook(entries=np.stack(entries), design_snr_db=_snr_db(sigma2), rho=rho)
    return cb, np.asarray(selected_trace)


def _update_entries(hs, assign, entries, k, rho, sigma2, pga_opts):
    counts = np.bincount(assign, minlength=k)
    new_entries = list(entries)
    for i in range(k):
        members = hs[assign == i]
        if len(members) == 0:
            largest = int(np.argmax(counts))
            cluster = hs[assign == largest]
            if new_entries[largest] is not None:
                member_rates = rates_for_channels(cluster, new_entries[largest], sigma2)
                farthest = cluster[int(np.argmin(member_rates))]
            else:
                farthest = cluster[0]
            new_entries[i] = _waterfill_representative(
                farthest.conj().T @ farthest, hs.shape[1], rho, sigma2)
            continue
        q, _ = pga_sum_rate(members, rho, sigma2, pga_opts,
                            warm_start=new_entries[i])
        new_entries[i] = q
    return new_entries


def gmm_codebook(model: GmmModel, train: ChannelDataset | np.ndarray, rho: float,
                 sigma2: float, pga: PgaOptions | None = None) -> CovCodebook:
    """One PGA-optimized covariance entry per mixture component.

    Training channels are partitioned by their channel-domain component
    posteriors (ties to the lowest index).  A component whose cluster is
    empty falls back to water-filling on its own implied transmit
    representative E[H^H H].
    """
    if isinstance(train, ChannelDataset):
        hs = train.channels
        x = train.vectors()
        nr, nc = train.shape
    else:
        hs = np.asarray(train)
        nr, nc = hs.shape[1], hs.shape[2]
        x = hs.transpose(0, 2, 1).reshape(hs.shape[0], nr * nc)
    if model.dim != nr * nc:
        raise ArgumentError("model dimension does not match the training channels")
    pga = pga or PgaOptions(max_iter=25)
    labels = np.argmax(responsibilities(model, x), axis=1)
    entries = np.empty((model.k, nc, nc), dtype=complex)
    for i in range(model.k):
        members = hs[labels == i]
        if len(members) == 0:
            entries[i] = _waterfill_representative(
                component_tx_representative(model, i, nr, nc), nr, rho, sigma2)
        else:
            entries[i], _ = pga_sum_rate(members, rho, sigma2, pga)
    return CovCodebook(entries=entries, design_snr_db=_snr_db(sigma2), rho=rho)


def component_tx_representative(model: GmmModel, k: int, nr: int, nc: int
                                ) -> np.ndarray:
    """E[H^H H] implied by component k of a vectorized-channel mixture.

    With column-stacking vec, entry (a, b) sums the receive-diagonal of the
    (b, a) block of C + mu mu^H.
    """
    second_moment = model.covariances[k] + np.outer(model.means[k],
                                                    model.means[k].conj())
    blocks = second_moment.reshape(nc, nr, nc, nr)
    s = np.einsum("biai->ab", blocks)
    return 0.5 * (s + s.conj().T)


def extract_directions(cb: CovCodebook, nrx: int) -> DirCodebook:
    """Top-nrx eigenvector basis of every covariance entry, eigenvalues descending."""
    k, nt, _ = cb.entries.shape
    out = np.empty((k, nt, nrx), dtype=complex)
    for i in range(k):
        vals, vecs = np.linalg.eigh(cb.entries[i])
        vals, vecs = vals[::-1], vecs[:, ::-1]
        if vals[nrx - 1] <= 1e-8 * max(vals[0], 0.0) or vals[0] <= 0:
            raise RankDeficiencyError(
                f"codebook entry {i} has rank < {nrx}; rebuild the codebook at a "
                f"higher design SNR (eigenvalue {nrx} is {vals[nrx - 1]:.3e})")
        out[i] = vecs[:, :nrx]
    return DirCodebook(entries=out)


def random_grassmann_codebook(k: int, ntx: int, nrx: int,
                              rng: np.random.Generator) -> DirCodebook:
    """K independent subspaces drawn uniformly from the Grassmann manifold.

    Each entry orthonormalizes an ntx x nrx matrix of i.i.d. complex Gaussian
    entries.
    """
    if nrx > ntx:
        raise ArgumentError("nrx must not exceed ntx")
    entries = np.empty((k, ntx, nrx), dtype=complex)
    for i in range(k):
        g = complex_normal(rng, (ntx, nrx))
        q, _ = np.linalg.qr(g)
        entries[i] = q[:, :nrx]
    return DirCodebook(entries=entries)


def _snr_db(sigma2: float) -> float:
    return float(-10.0 * np.log10(sigma2))
