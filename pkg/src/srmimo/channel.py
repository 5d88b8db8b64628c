"""Correlated Rayleigh channels with a Kronecker-structured estimation error.

The true channels split as H_j = H_hat_j + dH_j, where the error follows the
Kronecker model dH_j = Sigma_j^{1/2} G Psi_j^{1/2} with i.i.d. CN(0,1) G, so
vec(dH_j) has covariance Sigma_j (x) Psi_j^T.  The estimate H_hat_j is scaled
so every entry of the reconstructed H_j has unit variance.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import toeplitz

from .rng import complex_gaussian


def exp_corr_matrix(n, coeff):
    """n x n exponential correlation matrix with entry (i, j) = coeff**|i-j|."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if not 0.0 <= coeff < 1.0:
        raise ValueError(f"correlation coefficient must be in [0, 1), got {coeff}")
    col = coeff ** np.arange(n)
    return toeplitz(col).astype(np.complex128)


def psd_sqrt(a, tol=1e-10):
    """Hermitian square root S of a Hermitian PSD matrix, S @ S = a.

    Eigenvalues in [-tol, 0) are clipped to zero; anything below -tol is
    rejected.  Eigen-based rather than Cholesky so singular correlation
    matrices (coeff -> 1) remain valid inputs.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.conj().T, atol=tol * max(1.0, np.abs(a).max())):
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(a)
    if w.min() < -tol * max(1.0, w.max()):
        raise ValueError(f"matrix is not PSD (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


@dataclass
class ErrorStats:
    """Second-order statistics of the CSI mismatch.

    psi1/psi2 are the transmit-side correlation matrices of the two hops
    (N_t x N_t and N_r x N_r); r1/r2 are the receive-side correlation
    patterns with unit diagonal (N_r x N_r and K x K).  The error covariance
    matrices sigma1/sigma2 are the patterns scaled by the estimation error
    variance sigma_e_sq.
    """

    psi1: np.ndarray
    psi2: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    sigma_e_sq: float
    theta: float = 0.0
    rho: float = 0.0

    @property
    def sigma1(self):
        return self.sigma_e_sq * self.r1

    @property
    def sigma2(self):
        return self.sigma_e_sq * self.r2

    @property
    def dims(self):
        """(N_t, N_r, K) implied by the matrix shapes."""
        return (self.psi1.shape[0], self.psi2.shape[0], self.r2.shape[0])

    @cached_property
    def _sqrt_factors(self):
        # (r1^{1/2}, psi1^{1/2}, r2^{1/2}, psi2^{1/2}), computed once per stats object
        return (psd_sqrt(self.r1), psd_sqrt(self.psi1), psd_sqrt(self.r2), psd_sqrt(self.psi2))


def error_stats(dims, sigma_e_sq, theta=0.0, rho=0.0, correlated_destinations=False):
    """Build ErrorStats from the exponential correlation model.

    Transmit sides use theta, the first-hop receive side uses rho.  The
    second-hop receive side defaults to the identity pattern (destination
    terminals are spatially separate); pass correlated_destinations=True to
    apply rho there as well.
    """
    n_t, n_r, k = dims
    if not 0.0 <= sigma_e_sq < 1.0:
        raise ValueError(f"sigma_e_sq must be in [0, 1), got {sigma_e_sq}")
    psi1 = exp_corr_matrix(n_t, theta)
    psi2 = exp_corr_matrix(n_r, theta)
    r1 = exp_corr_matrix(n_r, rho)
    r2 = exp_corr_matrix(k, rho) if correlated_destinations else np.eye(k, dtype=np.complex128)
    return ErrorStats(psi1=psi1, psi2=psi2, r1=r1, r2=r2, sigma_e_sq=sigma_e_sq, theta=theta, rho=rho)


@dataclass
class ChannelSet:
    """One realization of both hops: estimates, errors, and true channels.

    h1/h1_hat/dh1 are N_r x N_t (BS to relay), h2/h2_hat/dh2 are K x N_r
    (relay to destinations).  dh_j is retained so tests can check the exact
    reconstruction h_j == h_j_hat + dh_j and the error covariance.
    """

    h1_hat: np.ndarray
    h2_hat: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    dh1: np.ndarray
    dh2: np.ndarray
    stats: ErrorStats
    sigma1_sq: float
    sigma2_sq: float

    @property
    def dims(self):
        return (self.h1_hat.shape[1], self.h1_hat.shape[0], self.h2_hat.shape[0])


def draw_channel_set(dims, stats, noise, rng):
    """Draw one ChannelSet.

    The estimate is sqrt(1 - sigma_e_sq) * R^{1/2} G Psi^{1/2} and the error
    sqrt(sigma_e_sq) * R^{1/2} G' Psi^{1/2} with independent CN(0,1) G, G',
    which realizes the target covariances ((1-s)/s) Sigma (x) Psi^T and
    Sigma (x) Psi^T and gives unit-variance entries of the sum.  With
    sigma_e_sq = 0 the error is exactly zero and the estimate is the true
    channel.
    """
    n_t, n_r, k = dims
    if stats.dims != (n_t, n_r, k):
        raise ValueError(f"stats dimensions {stats.dims} do not match dims {dims}")
    sigma1_sq, sigma2_sq = noise
    se = stats.sigma_e_sq
    r1h, p1h, r2h, p2h = stats._sqrt_factors

    g1 = complex_gaussian(rng, (n_r, n_t))
    g2 = complex_gaussian(rng, (k, n_r))
    h1_hat = np.sqrt(1.0 - se) * (r1h @ g1 @ p1h)
    h2_hat = np.sqrt(1.0 - se) * (r2h @ g2 @ p2h)

    if se == 0.0:
        dh1 = np.zeros((n_r, n_t), dtype=np.complex128)
        dh2 = np.zeros((k, n_r), dtype=np.complex128)
    else:
        e1 = complex_gaussian(rng, (n_r, n_t))
        e2 = complex_gaussian(rng, (k, n_r))
        dh1 = np.sqrt(se) * (r1h @ e1 @ p1h)
        dh2 = np.sqrt(se) * (r2h @ e2 @ p2h)

    return ChannelSet(
        h1_hat=h1_hat, h2_hat=h2_hat,
        h1=h1_hat + dh1, h2=h2_hat + dh2,
        dh1=dh1, dh2=dh2,
        stats=stats, sigma1_sq=sigma1_sq, sigma2_sq=sigma2_sq,
    )
