"""Counter-based hashing to uniforms.

A draw is a pure function of ``(seed, stream, key...)`` so colours of a
point never depend on enumeration order, thread count or which other
points were sampled.  The mixer is the splitmix64 finaliser.
"""
from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31 = np.uint64(30), np.uint64(27), np.uint64(31)
_TO_UNIT = 1.0 / float(1 << 53)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def hash64(seed: int, *keys) -> np.ndarray:
    """Hash integer key columns (broadcast together) to uint64."""
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GAMMA)
        for k in keys:
            k = np.asarray(k).astype(np.int64).view(np.uint64)
            h = _mix(h ^ (k + _GAMMA))
    return h


def uniforms(seed: int, *keys) -> np.ndarray:
    """Uniforms in [0, 1) keyed by ``(seed, keys...)``."""
    h = hash64(seed, *keys)
    return (h >> np.uint64(11)).astype(np.float64) * _TO_UNIT


def key_columns(cells: np.ndarray):
    """Split an integer (n, d) array into its columns."""
    cells = np.atleast_2d(cells)
    return [cells[:, j] for j in range(cells.shape[1])]
