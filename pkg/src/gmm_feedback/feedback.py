"""Feedback index selection from perfect CSI, estimated CSI, or raw pilot
observations.  All selectors are deterministic; ties break to the lowest
index.  Indices are 1-based to match the B-bit feedback convention."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebooks import CovCodebook, DirCodebook
from .gmm import AdaptedGmm, GmmModel, responsibilities
from .rates import rates_for_entries


@dataclass(frozen=True)
class FeedbackIndex:
    """A selected codebook index in [1, K] plus the selection method tag."""

    k_star: int
    method_tag: str

    @property
    def entry_index(self) -> int:
        """0-based array index of the selected entry."""
        return self.k_star - 1


def select_by_rate_cov(h_hat: np.ndarray, cb: CovCodebook,
                       sigma2: float) -> FeedbackIndex:
    """Pick the covariance entry maximizing the rate of the (estimated) channel."""
    rates = rates_for_entries(np.asarray(h_hat, dtype=complex), cb.entries, sigma2)
    return FeedbackIndex(int(np.argmax(rates)) + 1, "RateCov")


def _subspace_rates(h_hat: np.ndarray, entries: np.ndarray, rho: float,
                    sigma2: float) -> np.ndarray:
    nrx = entries.shape[2]
    covs = (rho / nrx) * np.einsum("ktr,kur->ktu", entries, entries.conj())
    return rates_for_entries(np.asarray(h_hat, dtype=complex), covs, sigma2)


def select_by_rate_subspace(h_hat: np.ndarray, cb: DirCodebook, rho: float,
                            sigma2: float) -> FeedbackIndex:
    """Capacity-inspired selection over a directional codebook.

    Scores each subspace W by the rate achieved with the uniform covariance
    (rho / nrx) W W^H.
    """
    rates = _subspace_rates(h_hat, cb.entries, rho, sigma2)
    return FeedbackIndex(int(np.argmax(rates)) + 1, "RateSubspace")


def select_by_responsibility(adapted: AdaptedGmm, y: np.ndarray) -> FeedbackIndex:
    """Feedback directly from the pilot observation: argmax_k p(k | y).

    No channel estimate is formed; the cost depends only on the observation
    dimension and component count, not on the transmit array size.
    """
    p = responsibilities(adapted, np.asarray(y, dtype=complex))
    return FeedbackIndex(int(np.argmax(p)) + 1, "Responsibility")


def select_by_responsibility_perfect(model: GmmModel, h: np.ndarray) -> FeedbackIndex:
    """Genie baseline: argmax_k p(k | h) with the true vectorized channel."""
    h = np.asarray(h, dtype=complex)
    if h.ndim == 2:
        h = h.reshape(-1, order="F")
    p = responsibilities(model, h)
    return FeedbackIndex(int(np.argmax(p)) + 1, "ResponsibilityPerfect")


def select_by_chordal(v_bar: np.ndarray, cb: DirCodebook) -> FeedbackIndex:
    """Minimum chordal distance nrx - tr(V^H W W^H V) over the codebook."""
    v_bar = np.asarray(v_bar, dtype=complex)
    nrx = v_bar.shape[1]
    overlap = np.einsum("kti,tj->kij", cb.entries.conj(), v_bar)
    dist = nrx - np.sum(np.abs(overlap) ** 2, axis=(1, 2))
    return FeedbackIndex(int(np.argmin(dist)) + 1, "Chordal")


def dominant_subspace(h: np.ndarray, nrx: int | None = None) -> np.ndarray:
    """First nrx right singular vectors of a channel, as an [nt x nrx] basis."""
    h = np.asarray(h, dtype=complex)
    nrx = h.shape[0] if nrx is None else nrx
    _, _, vh = np.linalg.svd(h, full_matrices=False)
    return vh[:nrx].conj().T
