"""Single-user transmit strategies and multi-user joint precoder design.

Multi-user precoders (RBD, RCI, iterative WMMSE, stochastic WMMSE) take one
channel representation per user; with limited feedback that representation is
the selected codebook subspace transposed, X_bar^H.  All returned precoder
sets satisfy the sum power constraint exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import unvec
from .errors import ArgumentError, DegenerateDataError
from .gmm import GmmModel, sample_component
from .pilots import complex_normal
from .rates import LOG2, waterfill_power


@dataclass
class PrecoderSet:
    """Per-user precoding matrices [nt x d_j] and the shared power budget."""

    precoders: list[np.ndarray]
    rho: float

    def total_power(self) -> float:
        return float(sum(np.sum(np.abs(m) ** 2) for m in self.precoders))


def normalize_power(precoders: PrecoderSet, rho: float) -> PrecoderSet:
    """Uniformly rescale so the total transmit power equals rho exactly."""
    power = precoders.total_power()
    if power == 0.0:
        raise DegenerateDataError("cannot normalize an all-zero precoder set")
    scale = np.sqrt(rho / power)
    return PrecoderSet([m * scale for m in precoders.precoders], rho)


def waterfilling_capacity(h: np.ndarray, rho: float, sigma2: float
                          ) -> tuple[np.ndarray, float]:
    """Capacity-achieving transmit covariance and capacity of one channel.

    Decomposes the channel into parallel streams via the SVD and water-fills
    the power budget over the squared singular values.
    """
    h = np.asarray(h, dtype=complex)
    if not np.any(h):
        raise DegenerateDataError("channel is all-zero; capacity undefined")
    _, s, vh = np.linalg.svd(h, full_matrices=False)
    gains = s ** 2
    p = waterfill_power(gains, rho, sigma2)
    v = vh.conj().T
    q = (v * p) @ v.conj().T
    capacity = float(np.sum(np.log2(1.0 + gains * p / sigma2)))
    return 0.5 * (q + q.conj().T), capacity


def baseline_tx_strategy(kind: str, h: np.ndarray | None, ntx: int, nrx: int,
                         rho: float) -> np.ndarray:
    """Reference transmit covariances without a codebook.

    ``uniform_cov`` spreads power isotropically; ``uniform_eigsp`` puts equal
    power on the channel's top-nrx right singular vectors (requires CSI).
    """
    if kind == "uniform_cov":
        return (rho / ntx) * np.eye(ntx, dtype=complex)
    if kind == "uniform_eigsp":
        if h is None:
            raise ArgumentError("uniform_eigsp requires the channel")
        _, _, vh = np.linalg.svd(np.asarray(h, dtype=complex), full_matrices=False)
        v = vh[:nrx].conj().T
        return (rho / nrx) * (v @ v.conj().T)
    raise ArgumentError(f"unknown baseline kind {kind!r}")


def sum_rate(h_true: list[np.ndarray] | np.ndarray, precoders: PrecoderSet,
             sigma2: float) -> float:
    """Instantaneous achievable sum rate with inter-user interference."""
    total = 0.0
    for j, h in enumerate(h_true):
        h = np.asarray(h, dtype=complex)
        nr = h.shape[0]
        signal = h @ precoders.precoders[j]
        interference = sigma2 * np.eye(nr, dtype=complex)
        for m, mat in enumerate(precoders.precoders):
            if m == j:
                continue
            hm = h @ mat
            interference += hm @ hm.conj().T
        full = interference + signal @ signal.conj().T
        _, ld_full = np.linalg.slogdet(full)
        _, ld_int = np.linalg.slogdet(interference)
        total += max(float(ld_full - ld_int) / LOG2, 0.0)
    return total


def _regularized_inverse_sqrt(gram: np.ndarray, alpha: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(gram)
    return (vecs / np.sqrt(np.clip(vals, 0.0, None) + alpha)) @ vecs.conj().T


def rbd(h_tilde: list[np.ndarray], rho: float, sigma2: float,
        d: int | None = None) -> PrecoderSet:
    """Regularized block diagonalization with uniform per-stream power.

    For each user the other users' rows are whitened through
    (Hbar^H Hbar + alpha I)^{-1/2} with alpha = J nrx sigma2 / rho; the
    precoder points along the dominant right singular vectors of the
    whitened own channel.
    """
    j_users = len(h_tilde)
    if j_users < 2:
        raise ArgumentError("rbd requires at least two users")
    hs = [np.asarray(h, dtype=complex) for h in h_tilde]
    nrx = hs[0].shape[0]
    if any(h.shape != hs[0].shape for h in hs):
        raise ArgumentError("all users must share the channel dimensions")
    d = nrx if d is None else d
    alpha = j_users * nrx * sigma2 / rho
    precoders = []
    for j in range(j_users):
        hbar = np.vstack([hs[m] for m in range(j_users) if m != j])
        t = _regularized_inverse_sqrt(hbar.conj().T @ hbar, alpha)
        _, _, vh = np.linalg.svd(hs[j] @ t, full_matrices=False)
        m_j = t @ vh[:d].conj().T
        norms = np.linalg.norm(m_j, axis=0)
        m_j = m_j / np.where(norms > 0, norms, 1.0) * np.sqrt(rho / (j_users * d))
        precoders.append(m_j)
    return normalize_power(PrecoderSet(precoders, rho), rho)


def rci(h_tilde: list[np.ndarray], rho: float, sigma2: float) -> PrecoderSet:
    """Regularized channel inversion across the stacked multi-user channel."""
    j_users = len(h_tilde)
    if j_users < 2:
        raise ArgumentError("rci requires at least two users")
    hs = [np.asarray(h, dtype=complex) for h in h_tilde]
    nrx = hs[0].shape[0]
    stacked = np.vstack(hs)
    alpha = j_users * nrx * sigma2 / rho
    gram = stacked @ stacked.conj().T
    gram[np.diag_indices(gram.shape[0])] += alpha
    m_all = stacked.conj().T @ np.linalg.inv(gram)
    precoders = [m_all[:, j * nrx:(j + 1) * nrx] for j in range(j_users)]
    return normalize_power(PrecoderSet(precoders, rho), rho)


def _solve_power_constrained(gram: np.ndarray, rhs: list[np.ndarray],
                             rho: float) -> list[np.ndarray]:
    """Solve M_j = (gram + mu I)^{-1} B_j with mu >= 0 chosen for total power rho.

    Works in the eigenbasis of the Hermitian PSD gram so the bisection over mu
    only rescales scalars.  Components of the right-hand sides outside the
    numerical range of gram are dropped (they are roundoff when B_j lies in
    the channel row spaces).  The result is rescaled to hit the budget
    exactly; uniform up-scaling never reduces any user's rate.
    """
    vals, vecs = np.linalg.eigh(gram)
    vals = np.clip(vals, 0.0, None)
    keep = vals > 1e-12 * max(float(vals[-1]), 1e-300)
    vals_k = vals[keep]
    vecs_k = vecs[:, keep]
    proj = [vecs_k.conj().T @ b for b in rhs]
    wsum = np.zeros(vals_k.shape)
    for p in proj:
        wsum += np.sum(np.abs(p) ** 2, axis=1)

    def power(mu: float) -> float:
        return float(np.sum(wsum / (vals_k + mu) ** 2))

    mu = 0.0
    if vals_k.size and power(0.0) > rho:
        lo, hi = 0.0, 1.0
        for _ in range(200):
            if power(hi) < rho:
                break
            hi *= 2.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if power(mid) > rho:
                lo = mid
            else:
                hi = mid
        mu = hi
    out = [vecs_k @ (p / (vals_k + mu)[:, None]) for p in proj]
    total = sum(float(np.sum(np.abs(m) ** 2)) for m in out)
    if total == 0.0:
        raise DegenerateDataError("power-constrained solve produced zero precoders")
    scale = np.sqrt(rho / total)
    return [m * scale for m in out]


def _mmse_receivers(hs: list[np.ndarray], precoders: list[np.ndarray],
                    sigma2: float) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-user MMSE receive filters and inverse-MSE weight matrices."""
    us, ws = [], []
    for j, h in enumerate(hs):
        nr = h.shape[0]
        cov = sigma2 * np.eye(nr, dtype=complex)
        for mat in precoders:
            hm = h @ mat
            cov += hm @ hm.conj().T
        hmj = h @ precoders[j]
        u = np.linalg.solve(cov, hmj)
        e = np.eye(precoders[j].shape[1], dtype=complex) - u.conj().T @ hmj
        e = 0.5 * (e + e.conj().T)
        ws.append(np.linalg.inv(e))
        us.append(u)
    return us, ws


@dataclass
class IterativeTrace:
    """Per-iteration diagnostics of an iterative precoder design."""

    objective: np.ndarray
    eval_sum_rate: np.ndarray | None = None


def wmmse(h_tilde: list[np.ndarray], rho: float, sigma2: float, d: int,
          i_max: int = 300, tol: float = 1e-6,
          trace_channels: list[np.ndarray] | None = None
          ) -> tuple[PrecoderSet, IterativeTrace]:
    """Iterative weighted-MMSE sum-rate maximization.

    Alternates MMSE receivers, inverse-MSE weights, and the power-constrained
    precoder update until the sum rate on the input channels stalls or
    ``i_max`` iterations elapse.  The sum-rate trace on the inputs is
    nondecreasing; ``trace_channels`` adds an evaluation trace on held-out
    (e.g. true) channels.
    """
    hs = [np.asarray(h, dtype=complex) for h in h_tilde]
    nrx = hs[0].shape[0]
    if not 1 <= d <= nrx:
        raise ArgumentError(f"d must be in [1, {nrx}], got {d}")
    precoders = [h.conj().T[:, :d] for h in hs]
    precoders = normalize_power(PrecoderSet(precoders, rho), rho).precoders

    objective = []
    eval_trace = [] if trace_channels is not None else None
    prev = np.nan
    for it in range(i_max):
        us, ws = _mmse_receivers(hs, precoders, sigma2)
        gram = np.zeros((hs[0].shape[1], hs[0].shape[1]), dtype=complex)
        rhs = []
        for j, h in enumerate(hs):
            hu = h.conj().T @ us[j]
            gram += hu @ ws[j] @ hu.conj().T
            rhs.append(hu @ ws[j])
        gram = 0.5 * (gram + gram.conj().T)
        precoders = _solve_power_constrained(gram, rhs, rho)
        current = sum_rate(hs, PrecoderSet(precoders, rho), sigma2)
        objective.append(current)
        if eval_trace is not None:
            eval_trace.append(sum_rate(trace_channels, PrecoderSet(precoders, rho), sigma2))
        if it > 0 and abs(current - prev) <= tol * max(1.0, abs(prev)):
            break
        prev = current
    trace = IterativeTrace(np.asarray(objective),
                           None if eval_trace is None else np.asarray(eval_trace))
    return PrecoderSet(precoders, rho), trace


def swmmse(model: GmmModel, k_stars: list[int], rho: float, sigma2: float,
           i_max: int = 300, rng: np.random.Generator | None = None,
           d: int | None = None, beta: float | None = None,
           trace_channels: list[np.ndarray] | None = None
           ) -> tuple[PrecoderSet, IterativeTrace]:
    """Stochastic WMMSE on channels sampled from fed-back mixture components.

    Every iteration draws one fresh channel per user from its selected
    component, updates receivers and weights from the samples, and folds the
    quadratic terms into running averages (weight 1/(i+1)) before the
    power-constrained precoder update.  ``beta`` regularizes the running
    averages; the default is 1e-4 * rho.
    """
    if model.channel_shape is None:
        raise ArgumentError("model must carry channel_shape to draw matrix samples")
    nr, nt = model.channel_shape
    d = nr if d is None else d
    beta = 1e-4 * rho if beta is None else beta
    rng = np.random.default_rng() if rng is None else rng
    j_users = len(k_stars)
    for k in k_stars:
        if not 1 <= k <= model.k:
            raise ArgumentError(f"component index {k} outside [1, {model.k}]")

    precoders = [complex_normal(rng, (nt, d)) for _ in range(j_users)]
    precoders = normalize_power(PrecoderSet(precoders, rho), rho).precoders
    a_bar = np.zeros((nt, nt), dtype=complex)
    b_bar = [np.zeros((nt, d), dtype=complex) for _ in range(j_users)]

    objective = []
    eval_trace = [] if trace_channels is not None else None
    for i in range(i_max):
        samples = [unvec(sample_component(model, k, rng), nr, nt) for k in k_stars]
        us, ws = _mmse_receivers(samples, precoders, sigma2)
        gram = np.zeros((nt, nt), dtype=complex)
        for j, h in enumerate(samples):
            hu = h.conj().T @ us[j]
            gram += hu @ ws[j] @ hu.conj().T
        gamma = 1.0 / (i + 1.0)
        a_bar = (1.0 - gamma) * a_bar + gamma * (
            beta * np.eye(nt, dtype=complex) + gram)
        a_bar = 0.5 * (a_bar + a_bar.conj().T)
        for j, h in enumerate(samples):
            b_bar[j] = (1.0 - gamma) * b_bar[j] + gamma * (
                beta * precoders[j] + h.conj().T @ us[j] @ ws[j])
        precoders = _solve_power_constrained(a_bar, b_bar, rho)
        objective.append(sum_rate(samples, PrecoderSet(precoders, rho), sigma2))
        if eval_trace is not None:
            eval_trace.append(sum_rate(trace_channels, PrecoderSet(precoders, rho), sigma2))
    trace = IterativeTrace(np.asarray(objective),
                           None if eval_trace is None else np.asarray(eval_trace))
    return PrecoderSet(precoders, rho), trace
