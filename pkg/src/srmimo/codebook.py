"""Unitary-matrix codebooks: random generation, offline MSC design, file I/O.

A codebook holds 2^B unitary N_r x N_r matrices shared by the BS and the
relay.  The MSC construction runs many offline experiments, designs a latent
pair for every candidate in a large random pool, scores each candidate by its
accumulated pre-estimation distance over a set of transmit vectors, and keeps
the 2^B most frequently winning candidates.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .channel import draw_channel_set
from .modulation import QPSK_SYMBOLS
from .precoder import DesignInput, design_pair
from .rng import complex_gaussian, substream

logger = logging.getLogger(__name__)

UNITARITY_TOL = 1e-10
FILE_UNITARITY_TOL = 1e-8
_FORMAT_VERSION = 1


class CodebookFormatError(ValueError):
    """Raised when a codebook file is malformed or fails validation."""


@dataclass
class Codebook:
    """Ordered unitary entries plus provenance metadata.

    For MSC codebooks, frequencies[i] is the number of offline experiments
    won by entries[i] and histogram is the full per-candidate win count.
    """

    entries: list
    bits: int
    method: str
    seed: int | None = None
    frequencies: list | None = None
    histogram: np.ndarray | None = None

    def __post_init__(self):
        if len(self.entries) != 2 ** self.bits:
            raise ValueError(f"expected {2 ** self.bits} entries for bits={self.bits}, got {len(self.entries)}")
        for i, t in enumerate(self.entries):
            check_unitary(t, UNITARITY_TOL, what=f"entry {i}")

    def __len__(self):
        return len(self.entries)

    @property
    def n(self):
        return self.entries[0].shape[0]


def check_unitary(t, tol, what="matrix"):
    n = t.shape[0]
    resid = np.linalg.norm(t.conj().T @ t - np.eye(n))
    if resid >= tol:
        raise ValueError(f"{what} is not unitary (residual {resid:.3e} >= {tol:g})")


def random_unitary(n, rng):
    """Haar-distributed n x n unitary matrix.

    QR of a complex Ginibre matrix with the R-diagonal phase correction;
    without the correction the factor is not Haar-distributed.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    z = complex_gaussian(rng, (n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def identity_codebook(n):
    """Single-entry identity codebook: the plain amplify-and-forward relay."""
    return Codebook(entries=[np.eye(n, dtype=np.complex128)], bits=0, method="identity")


def random_codebook(n, bits, seed):
    rng = substream(seed, 0)
    entries = [random_unitary(n, rng) for _ in range(2 ** bits)]
    return Codebook(entries=entries, bits=bits, method="random", seed=seed)


def transmit_vector_set(k, q, budget, rng=None):
    """Candidate transmit vectors for the offline codebook scoring.

    Full lexicographic enumeration of all q^k QPSK vectors when that fits the
    budget, otherwise `budget` i.i.d. uniformly drawn vectors.  Returns a
    (count, k) complex array.
    """
    if q != 4:
        raise ValueError(f"only QPSK (q=4) is supported, got q={q}")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    total = q ** k
    if total <= budget:
        idx = np.indices((q,) * k).reshape(k, -1).T  # lexicographic, first user most significant
        return QPSK_SYMBOLS[idx]
    if rng is None:
        raise ValueError("rng required when sampling below full enumeration")
    return QPSK_SYMBOLS[rng.integers(0, q, size=(budget, k))]


@dataclass
class MscConfig:
    """Parameters of the offline most-frequently-selected-candidates design."""

    alpha: int
    n_experiments: int
    bits: int
    phi_budget: int
    dims: tuple
    stats: "ErrorStats"
    sigma1_sq: float
    sigma2_sq: float
    pt: float | None = None
    pr: float | None = None
    eps: float = 1e-4
    max_iter: int = 200

    def __post_init__(self):
        if self.alpha < 1 or self.n_experiments < 1:
            raise ValueError("alpha and n_experiments must be >= 1")
        if 2 ** self.bits >= self.alpha:
            raise ValueError(f"codebook size 2^{self.bits} must be smaller than the pool alpha={self.alpha}")
        k = self.dims[2]
        if self.pt is None:
            self.pt = float(k)
        if self.pr is None:
            self.pr = float(k)


def msc_design(cfg, seed):
    """Design an MSC codebook.

    Per experiment: draw estimated channels, design a pair for every pool
    candidate, accumulate the squared pre-estimation distance over the
    transmit-vector set, and record the winning candidate.  The codebook is
    the 2^B most frequent winners, ordered by descending win count with ties
    broken toward the lower candidate index.  Experiments whose inner design
    fails to converge are logged and skipped.  Deterministic given (cfg,
    seed): candidate pool, transmit vectors, and each experiment's channels
    come from fixed substreams, so experiments can be evaluated in any order
    or in parallel without changing the result.
    """
    n_t, n_r, k = cfg.dims
    pool_rng = substream(seed, 0)
    candidates = [random_unitary(n_r, pool_rng) for _ in range(cfg.alpha)]
    vectors = transmit_vector_set(k, 4, cfg.phi_budget, substream(seed, 1))

    counts = np.zeros(cfg.alpha, dtype=np.int64)
    skipped = 0
    for ne in range(cfg.n_experiments):
        rng_e = substream(seed, 2, ne)
        cs = draw_channel_set(cfg.dims, cfg.stats, (cfg.sigma1_sq, cfg.sigma2_sq), rng_e)
        dists = np.empty(cfg.alpha)
        ok = True
        for l, t in enumerate(candidates):
            din = DesignInput(h1_hat=cs.h1_hat, h2_hat=cs.h2_hat, t=t, stats=cfg.stats,
                              sigma1_sq=cfg.sigma1_sq, sigma2_sq=cfg.sigma2_sq,
                              pt=cfg.pt, pr=cfg.pr, eps=cfg.eps, max_iter=cfg.max_iter)
            pair = design_pair(din, index=l)
            if not pair.converged:
                logger.warning("experiment %d: candidate %d did not converge; skipping experiment", ne, l)
                ok = False
                break
            est = pair.beta * (cs.h2_hat @ t @ cs.h1_hat @ pair.p)
            dists[l] = float(np.sum(np.abs(vectors - vectors @ est.T) ** 2))
        if not ok:
            skipped += 1
            continue
        counts[int(np.argmin(dists))] += 1

    if skipped:
        logger.warning("msc design skipped %d of %d experiments", skipped, cfg.n_experiments)
    # stable descending-count order, ties toward lower candidate index
    order = np.lexsort((np.arange(cfg.alpha), -counts))
    top = order[: 2 ** cfg.bits]
    return Codebook(entries=[candidates[i] for i in top], bits=cfg.bits, method="msc",
                    seed=seed, frequencies=[int(counts[i]) for i in top], histogram=counts)


# -- file format ----------------------------------------------------------------
#
# Plain text.  Header lines "key: value" for version, n, bits, method, seed,
# then per entry a "---" separator followed by n*n lines "re,im" in row-major
# order, 17 significant digits.


def save_codebook(cb, path):
    lines = [
        f"version: {_FORMAT_VERSION}",
        f"n: {cb.n}",
        f"bits: {cb.bits}",
        f"method: {cb.method}",
        f"seed: {'none' if cb.seed is None else cb.seed}",
    ]
    for t in cb.entries:
        lines.append("---")
        for v in t.reshape(-1):
            lines.append(f"{v.real:.17g},{v.imag:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_codebook(path):
    """Read a codebook file; re-validates shape and unitarity of every entry."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    header = {}
    pos = 0
    while pos < len(raw) and raw[pos] != "---":
        if ":" not in raw[pos]:
            raise CodebookFormatError(f"malformed header line: {raw[pos]!r}")
        key, _, val = raw[pos].partition(":")
        header[key.strip()] = val.strip()
        pos += 1
    try:
        version = int(header["version"])
        n = int(header["n"])
        bits = int(header["bits"])
        method = header["method"]
        seed = None if header["seed"] == "none" else int(header["seed"])
    except (KeyError, ValueError) as exc:
        raise CodebookFormatError(f"bad or missing header field: {exc}") from None
    if version != _FORMAT_VERSION:
        raise CodebookFormatError(f"unsupported format version {version}")

    count = 2 ** bits
    entries = []
    for e in range(count):
        if pos >= len(raw) or raw[pos] != "---":
            raise CodebookFormatError(f"expected entry separator before entry {e}")
        pos += 1
        if pos + n * n > len(raw):
            raise CodebookFormatError(f"file truncated inside entry {e}")
        vals = np.empty(n * n, dtype=np.complex128)
        for i in range(n * n):
            parts = raw[pos + i].split(",")
            if len(parts) != 2:
                raise CodebookFormatError(f"malformed element line: {raw[pos + i]!r}")
            try:
                vals[i] = float(parts[0]) + 1j * float(parts[1])
            except ValueError:
                raise CodebookFormatError(f"malformed element line: {raw[pos + i]!r}") from None
        pos += n * n
        t = vals.reshape(n, n)
        try:
            check_unitary(t, FILE_UNITARITY_TOL, what=f"entry {e}")
        except ValueError as exc:
            raise CodebookFormatError(str(exc)) from None
        entries.append(t)
    if pos != len(raw):
        raise CodebookFormatError("trailing data after last entry")
    return Codebook(entries=entries, bits=bits, method=method, seed=seed)
