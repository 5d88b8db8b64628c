"""Per-block selection of the latent pair by squared Euclidean distance.

The BS knows the transmitted block, so for every latent pair it forms the
noiseless pre-estimate of what the destinations would receive and picks the
pair whose stacked pre-estimate is closest to the stacked block.  Selection
runs once per data block.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class SelectionResult:
    """Winning index (0-based), all candidate distances, and the block id."""

    l_opt: int
    distances: np.ndarray
    block_id: int = 0


def preestimate_block(pair, t, h1_hat, h2_hat, block, beta_used):
    """Stacked noiseless pre-estimate of one block for one latent pair.

    block is (M, K); the result stacks the M per-symbol estimates
    beta_used * H2_hat T H1_hat P b in block order into a length-KM vector.
    beta_used is normally the quantized relay scale the RS will actually
    apply; pass the exact pair.beta for the idealized rule.
    """
    block = np.asarray(block)
    if block.ndim != 2:
        raise ValueError(f"block must be (M, K), got shape {block.shape}")
    eff = beta_used * (h2_hat @ t @ h1_hat @ pair.p)
    return (block @ eff.T).reshape(-1)


def select_pair(pairs, codebook, h1_hat, h2_hat, block, betas=None, block_id=0):
    """Pick the pair minimizing the block distance; ties go to the lowest index.

    betas overrides the relay scale used in the pre-estimates (one value per
    pair); by default each pair's exact beta is used.
    """
    if len(pairs) == 0 or len(codebook.entries) == 0:
        raise ValueError("empty codebook")
    if len(pairs) != len(codebook.entries):
        raise ValueError(f"{len(pairs)} pairs for {len(codebook.entries)} codebook entries")
    if betas is None:
        betas = [pair.beta for pair in pairs]
    s = np.asarray(block).reshape(-1)
    distances = np.empty(len(pairs))
    for l, (pair, t) in enumerate(zip(pairs, codebook.entries)):
        u = preestimate_block(pair, t, h1_hat, h2_hat, block, betas[l])
        distances[l] = float(np.sum(np.abs(s - u) ** 2))
    return SelectionResult(l_opt=int(np.argmin(distances)), distances=distances, block_id=block_id)
