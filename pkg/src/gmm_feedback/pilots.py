"""Pilot matrices, the lifted observation operator, and noisy observations.

The pilot matrix is a column subset of the 2D-DFT matrix F_h kron F_v with
every column rescaled to the transmit power budget.  Vectorizing the pilot
observation Y = H P + N gives y = A vec(H) + n with A = P^T kron I.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import vec
from .errors import ArgumentError


def dft_matrix(n: int) -> np.ndarray:
    """Unitary n-point DFT matrix."""
    m = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(m, m) / n) / np.sqrt(n)


def pilot_column_indices(ntx: int, n_p: int) -> np.ndarray:
    """Evenly strided column subset: floor(i * ntx / n_p) for i = 0..n_p-1."""
    return (np.arange(n_p) * ntx) // n_p


def build_pilot_matrix(ntx_h: int, ntx_v: int, n_p: int, rho: float) -> np.ndarray:
    """[ntx x n_p] pilot matrix; every column has squared norm rho."""
    ntx = ntx_h * ntx_v
    if not 1 <= n_p <= ntx:
        raise ArgumentError(f"n_p must be in [1, {ntx}], got {n_p}")
    if rho <= 0:
        raise ArgumentError("rho must be positive")
    f = np.kron(dft_matrix(ntx_h), dft_matrix(ntx_v))
    cols = f[:, pilot_column_indices(ntx, n_p)]
    # columns of a unitary Kronecker DFT have unit norm
    return np.sqrt(rho) * cols


def build_observation_operator(p: np.ndarray, nrx: int) -> np.ndarray:
    """Lifted operator A = P^T kron I so that A vec(H) = vec(H P)."""
    return np.kron(p.T, np.eye(nrx))


def complex_normal(rng: np.random.Generator, size, var: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian with E|z|^2 = var."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


@dataclass
class ObservationModel:
    """Pilot matrix, lifted operator, and noise/power levels for one setup."""

    P: np.ndarray
    A: np.ndarray
    sigma2: float
    rho: float

    @classmethod
    def build(cls, ntx_h: int, ntx_v: int, nrx: int, n_p: int,
              rho: float, sigma2: float) -> "ObservationModel":
        p = build_pilot_matrix(ntx_h, ntx_v, n_p, rho)
        return cls(P=p, A=build_observation_operator(p, nrx),
                   sigma2=float(sigma2), rho=float(rho))

    @property
    def n_p(self) -> int:
        return self.P.shape[1]

    @property
    def nrx(self) -> int:
        return self.A.shape[0] // self.n_p


def observe(h: np.ndarray, obs: ObservationModel,
            rng: np.random.Generator) -> np.ndarray:
    """Noisy vectorized pilot observation y = A vec(H) + n, n ~ CN(0, sigma2 I)."""
    h = np.asarray(h)
    x = vec(h) if h.ndim == 2 else h
    if x.shape[0] != obs.A.shape[1]:
        raise ArgumentError(
            f"channel dimension {x.shape[0]} does not match operator width {obs.A.shape[1]}")
    y = obs.A @ x
    if obs.sigma2 > 0:
        y = y + complex_normal(rng, y.shape, obs.sigma2)
    return y
