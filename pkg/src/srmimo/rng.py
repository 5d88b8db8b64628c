"""Seed-stable random streams for parallel Monte-Carlo runs."""

import numpy as np


def substream(master_seed, *key):
    """Return an independent generator for (master seed, integer key path).

    Two calls with the same arguments yield identical streams; different key
    paths yield statistically independent streams.  All per-trial randomness
    is derived this way, so results do not depend on how trials are split
    across workers.
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key)))


def complex_gaussian(rng, shape):
    """i.i.d. CN(0, 1) matrix: real and imaginary parts each N(0, 1/2)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
