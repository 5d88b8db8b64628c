"""Iterative MMSE design of one latent precoding pair per codebook entry.

For a codebook entry T the pair is a BS precoder P (N_t x K) and a relay
power scale beta > 0, chosen to minimize the CSI-error-averaged MSE

    zeta(P, beta) = K - 2 beta Re Tr{G P}
                  + beta^2 [ Tr{P^H A P} + c_psi Tr{P^H Psi1 P} ]
                  + (Tr{P P^H}/Pt) (beta^2 s1 C_n + s2 K)

with G = H2_hat T H1_hat the equivalent estimated channel, subject to the BS
power Tr{P P^H} = Pt and the relay power beta^2 Omega2 <= Pr.  CSI-error
expectations are closed via E[dH M dH^H] = Tr{M Psi} Sigma.  The alternating
updates (Lagrange multiplier, relay scale, precoder solve, BS-power rescale)
run until both iterates stop moving.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12


class DesignError(RuntimeError):
    """Base class for numerical failures inside the pair design."""


class NumericalDegeneracyError(DesignError):
    """Relay-power curvature Omega2 is not positive."""


class DegenerateGeometryError(DesignError):
    """The matched-filter inner product Re Tr{G P} is not positive."""


class IllConditionedError(DesignError):
    """The precoder system matrix is (near-)singular."""


@dataclass
class DesignInput:
    """Everything one pair design needs: channel estimates, codebook entry,
    error statistics, noise variances, and power budgets."""

    h1_hat: np.ndarray
    h2_hat: np.ndarray
    t: np.ndarray
    stats: "ErrorStats"
    sigma1_sq: float
    sigma2_sq: float
    pt: float
    pr: float
    eps: float = 1e-4
    max_iter: int = 200

    def __post_init__(self):
        if self.pt <= 0 or self.pr <= 0:
            raise ValueError("power budgets must be positive")
        if self.eps <= 0:
            raise ValueError("convergence threshold must be positive")


@dataclass
class PrecodingPair:
    """One designed latent pair and its convergence record."""

    index: int
    p: np.ndarray
    beta: float
    lam: float
    iters: int
    converged: bool
    mse: float


@dataclass
class DesignTerms:
    """Intermediate quantities of one update step (all deterministic)."""

    m_gram: np.ndarray
    d: np.ndarray
    omega1: float
    omega2: float


def _hermitian_quadratic(q, p):
    """Re Tr{P^H Q P} for Hermitian Q."""
    return float(np.real(np.einsum("ij,ij->", p.conj(), q @ p)))


class PairDesigner:
    """Precomputed operator for one (channel estimate, codebook entry) input.

    Everything that does not depend on the running iterates (P, beta, lambda)
    is formed once here; per-iteration work is then O(N^2) matrix assembly
    plus one Hermitian positive-definite solve.  This matters because the
    simulator designs 2^B pairs per channel block.
    """

    def __init__(self, din):
        self.din = din
        h1, h2, t = din.h1_hat, din.h2_hat, din.t
        st = din.stats
        n_t, n_r, k = st.dims
        if h1.shape != (n_r, n_t) or h2.shape != (k, n_r) or t.shape != (n_r, n_r):
            raise ValueError(
                f"shape mismatch: h1 {h1.shape}, h2 {h2.shape}, t {t.shape} vs dims {(n_t, n_r, k)}")
        self.n_t, self.n_r, self.k = n_t, n_r, k

        self.g = h2 @ t @ h1          # equivalent estimated channel, K x N_t
        self.x = self.g.conj().T      # right-hand side of the precoder solve, N_t x K
        self.m1 = self.x @ self.g

        h2t = h2 @ t
        t_psi2_t = t.conj().T @ st.psi2 @ t
        self.m2 = float(np.real(np.trace(h2t @ st.sigma1 @ h2t.conj().T)))
        self.m3 = h1.conj().T @ t_psi2_t @ h1
        self.m4 = float(np.real(np.trace(t_psi2_t @ st.sigma1)))

        self.tr_sigma1 = float(np.real(np.trace(st.sigma1)))
        self.tr_sigma2 = float(np.real(np.trace(st.sigma2)))
        self.tr_psi2 = float(np.real(np.trace(st.psi2)))
        self.tr_h2h2 = float(np.real(np.einsum("ij,ij->", h2.conj(), h2)))
        # forwarded-noise coefficient: Tr{H2 H2^H} averaged over the CSI error
        self.noise_const = self.tr_h2h2 + self.tr_psi2 * self.tr_sigma2

        self.d = t.conj().T @ (h2.conj().T @ h2 + self.tr_sigma2 * st.psi2) @ t
        self.q_d = h1.conj().T @ self.d @ h1         # Omega1 quadratic form on P
        self.d_trace_sigma1 = self.m2 + self.tr_sigma2 * self.m4  # Tr{D Sigma1}
        self.h1h1 = h1.conj().T @ h1
        self.relay_curv = self.h1h1 + self.tr_sigma1 * st.psi1
        # quadratic kernel of the signal part of the MSE (excludes the beta^2 factor)
        self.m_base = self.m1 + self.tr_sigma2 * self.m3 + self.d_trace_sigma1 * st.psi1
        self.psi1 = st.psi1

    # -- per-iterate scalars -------------------------------------------------

    def matched_gain(self, p):
        """Re Tr{P^H H1_hat^H T^H H2_hat^H} = Re Tr{G P}."""
        return float(np.real(np.vdot(p, self.x)))

    def omega1(self, p):
        return (_hermitian_quadratic(self.q_d, p)
                + self.d_trace_sigma1 * _hermitian_quadratic(self.psi1, p)
                + self.din.sigma1_sq * self.noise_const)

    def omega2(self, p):
        h1p = self.din.h1_hat @ p
        return (float(np.real(np.einsum("ij,ij->", h1p.conj(), h1p)))
                + self.tr_sigma1 * _hermitian_quadratic(self.psi1, p)
                + self.din.sigma1_sq * self.n_r)

    def terms(self, p, beta):
        return DesignTerms(m_gram=beta * beta * self.m_base, d=self.d,
                           omega1=self.omega1(p), omega2=self.omega2(p))

    # -- update steps --------------------------------------------------------

    def lambda_update(self, p, omega1=None, omega2=None):
        o1 = self.omega1(p) if omega1 is None else omega1
        o2 = self.omega2(p) if omega2 is None else omega2
        if o2 <= 0.0:
            raise NumericalDegeneracyError(f"omega2 = {o2:.3e} is not positive")
        r = self.matched_gain(p)
        return max(0.0, (r * np.sqrt(o2 / self.din.pr) - o1) / o2)

    def beta_update(self, p, lam, omega1=None, omega2=None):
        o1 = self.omega1(p) if omega1 is None else omega1
        o2 = self.omega2(p) if omega2 is None else omega2
        if o1 + lam * o2 <= 0.0:
            raise NumericalDegeneracyError(f"omega1 + lam*omega2 = {o1 + lam * o2:.3e} is not positive")
        r = self.matched_gain(p)
        if r <= 0.0:
            raise DegenerateGeometryError(f"matched gain {r:.3e} is not positive")
        return r / (o1 + lam * o2)

    def system_matrix(self, beta, lam):
        b2 = beta * beta
        din = self.din
        ridge = (b2 * din.sigma1_sq * self.tr_h2h2
                 + self.k * din.sigma2_sq
                 + b2 * din.sigma1_sq * self.tr_psi2 * self.tr_sigma2) / din.pt
        b = b2 * self.m_base + ridge * np.eye(self.n_t)
        if lam > 0.0:
            b = b + (lam * b2) * self.relay_curv
        return b

    def precoder_update(self, beta, lam):
        """Unnormalized stationary precoder: solve of the regularized system.

        The caller rescales the result to the BS power budget.  Solved via a
        Cholesky factorization; an explicit inverse is never formed.
        """
        b = self.system_matrix(beta, lam)
        try:
            c, low = cho_factor(b, lower=True, check_finite=False)
        except LinAlgError as exc:
            raise IllConditionedError(f"system matrix is not positive definite: {exc}") from None
        diag = np.abs(np.diagonal(c))
        if (diag.max() / max(diag.min(), np.finfo(float).tiny)) ** 2 > COND_LIMIT:
            raise IllConditionedError("system matrix condition estimate exceeds limit")
        return beta * cho_solve((c, low), self.x, check_finite=False)

    def normalize(self, p):
        return p * np.sqrt(self.din.pt / float(np.real(np.vdot(p, p))))

    # -- objective and constraints --------------------------------------------

    def mse(self, p, beta):
        """Closed-form MSE; valid at any P (the noise terms carry the
        Tr{P P^H}/Pt weight, so the expression stays consistent
        mid-iteration before the power rescale)."""
        din = self.din
        power_ratio = float(np.real(np.vdot(p, p))) / din.pt
        return (self.k
                - 2.0 * beta * self.matched_gain(p)
                + beta * beta * _hermitian_quadratic(self.m_base, p)
                + power_ratio * (beta * beta * din.sigma1_sq * self.noise_const
                                 + din.sigma2_sq * self.k))

    def relay_power(self, p, beta):
        return beta * beta * self.omega2(p)

    def lagrangian(self, p, beta, lam):
        return self.mse(p, beta) + lam * (self.relay_power(p, beta) - self.din.pr)

    # -- main loop -------------------------------------------------------------

    def initial_precoder(self):
        p0 = np.zeros((self.n_t, self.k), dtype=np.complex128)
        np.fill_diagonal(p0, 1.0)
        return p0

    def design(self, p0=None, index=0):
        din = self.din
        p = self.initial_precoder() if p0 is None else np.asarray(p0, dtype=np.complex128)
        if not np.any(p):
            raise ValueError("initial precoder must be nonzero")
        p = self.normalize(p)
        # (P, beta) -> (-P, -beta) leaves the MSE and both power constraints
        # unchanged; start on the positive-gain branch so beta stays > 0.
        if self.matched_gain(p) < 0.0:
            p = -p

        lam = 0.0
        beta = np.nan
        iters = 0
        converged = False
        try:
            o1, o2 = self.omega1(p), self.omega2(p)
            # reference scale for the first |beta^i - beta^{i-1}| test: the
            # unconstrained relay scale for the initial precoder
            beta = self.beta_update(p, 0.0, o1, o2)
            for iters in range(1, din.max_iter + 1):
                o1, o2 = self.omega1(p), self.omega2(p)
                lam = self.lambda_update(p, o1, o2)
                beta_new = self.beta_update(p, lam, o1, o2)
                p_new = self.normalize(self.precoder_update(beta_new, lam))
                dp = float(np.real(np.vdot(p_new - p, p_new - p)))
                db = (beta_new - beta) ** 2
                p, beta = p_new, beta_new
                if dp <= din.eps and db <= din.eps:
                    converged = True
                    break
        except DesignError as exc:
            logger.warning("pair %d design degenerated after %d iterations: %s", index, iters, exc)
            if not np.isfinite(beta) or beta <= 0.0:
                o2 = self.omega2(p)
                beta = np.sqrt(din.pr / o2) if o2 > 0.0 else 0.0

        return PrecodingPair(index=index, p=p, beta=float(beta), lam=float(lam),
                             iters=iters, converged=converged, mse=self.mse(p, beta))


# -- module-level operation surface -------------------------------------------


def design_terms(din, p, beta):
    """Deterministic update-step quantities for the current iterate."""
    return PairDesigner(din).terms(p, beta)


def update_lambda(din, p, beta, terms):
    """Relay-power Lagrange multiplier [.]^+ update."""
    return PairDesigner(din).lambda_update(p, terms.omega1, terms.omega2)


def update_beta(din, p, terms, lam):
    """Relay power scale update for the current precoder and multiplier."""
    return PairDesigner(din).beta_update(p, lam, terms.omega1, terms.omega2)


def update_precoder(din, beta, lam, terms):
    """Unnormalized precoder solve (BS power rescale is applied by the loop)."""
    return PairDesigner(din).precoder_update(beta, lam)


def mse_objective(din, p, beta):
    """Closed-form MSE of a candidate pair under the CSI error statistics."""
    return PairDesigner(din).mse(p, beta)


def relay_power(din, p, beta):
    """Expected relay transmit power of a candidate pair."""
    return PairDesigner(din).relay_power(p, beta)


def design_pair(din, p0=None, index=0):
    """Run the alternating design to convergence and return the pair.

    Numerical degeneracies inside the updates are logged and produce a pair
    flagged converged=False holding the best iterate so far; the simulator
    counts such events rather than aborting.
    """
    return PairDesigner(din).design(p0=p0, index=index)


def design_all_pairs(h1_hat, h2_hat, codebook, stats, sigma1_sq, sigma2_sq, pt, pr,
                     eps=1e-4, max_iter=200):
    """Design one pair per codebook entry for a single channel estimate."""
    pairs = []
    for l, t in enumerate(codebook.entries):
        din = DesignInput(h1_hat=h1_hat, h2_hat=h2_hat, t=t, stats=stats,
                          sigma1_sq=sigma1_sq, sigma2_sq=sigma2_sq,
                          pt=pt, pr=pr, eps=eps, max_iter=max_iter)
        pairs.append(design_pair(din, index=l))
    return pairs
