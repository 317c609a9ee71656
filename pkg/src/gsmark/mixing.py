"""64-bit mixing primitives shared by the keystream generator and seed derivation.

The finalizer is the split-mix permutation; it is implemented twice, once on
Python integers (for seed derivation) and once vectorized on ``uint64`` arrays
(for keystream blocks). Both paths are bit-exact with each other, which keeps
streams reproducible across processes and platforms.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(GOLDEN)
_U_MUL1 = np.uint64(_MUL1)
_U_MUL2 = np.uint64(_MUL2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


def finalize(x: int) -> int:
    """Split-mix finalizer on a 64-bit integer."""
    x &= _MASK
    x ^= x >> 30
    x = (x * _MUL1) & _MASK
    x ^= x >> 27
    x = (x * _MUL2) & _MASK
    x ^= x >> 31
    return x


def finalize_u64(x: np.ndarray) -> np.ndarray:
    """Vectorized split-mix finalizer on a uint64 array."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> _S30
    x *= _U_MUL1
    x ^= x >> _S27
    x *= _U_MUL2
    x ^= x >> _S31
    return x


def mix64(*parts: int) -> int:
    """Fold integers into one 64-bit value; order-sensitive and avalanche-mixed."""
    h = 0
    for p in parts:
        h = finalize((h + GOLDEN + (int(p) & _MASK)) & _MASK)
    return h


def derive_seed(*parts: int) -> int:
    """Derive an independent RNG seed from structured indices (base, sweep, trial...)."""
    return mix64(*parts)


def stream_words(master: int, count: int, offset: int = 0) -> np.ndarray:
    """Counter-mode words: ``finalize(master + (offset+i+1) * GOLDEN)`` for i < count."""
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    return finalize_u64(np.uint64(master & _MASK) + idx * _U_GOLDEN)
