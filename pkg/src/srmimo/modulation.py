"""QPSK with Gray mapping and per-user minimum-distance demodulation."""

import numpy as np

# Gray map: bit pair (b0, b1) -> ((1-2*b0) + 1j*(1-2*b1)) / sqrt(2), indexed
# by (b0 << 1) | b1.  Unit symbol energy.
QPSK_SYMBOLS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)


def qpsk_mod(bits):
    """Map a bit array (length multiple of 2) to QPSK symbols."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % 2:
        raise ValueError("bit count must be a multiple of 2")
    pairs = bits.reshape(-1, 2)
    return QPSK_SYMBOLS[(pairs[:, 0] << 1) | pairs[:, 1]]


def qpsk_demod(y):
    """Per-entry minimum-distance decision back to bits (quadrant rule)."""
    y = np.asarray(y)
    bits = np.empty((y.size, 2), dtype=np.int64)
    bits[:, 0] = (y.real < 0).reshape(-1)
    bits[:, 1] = (y.imag < 0).reshape(-1)
    return bits.reshape(-1)


def qpsk_decide(y):
    """Per-entry symbol index decision (same quadrant rule as qpsk_demod)."""
    y = np.asarray(y)
    return ((y.real < 0).astype(np.int64) << 1) | (y.imag < 0).astype(np.int64)
