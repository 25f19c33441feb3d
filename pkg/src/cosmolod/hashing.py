"""Counter-based deterministic randomness.

Every random choice in the pipeline is a pure function of integer keys
(seed, stream tag, index / path / particle id) run through splitmix64
finalizer rounds. No generator state, so output never depends on call
order or thread scheduling.
"""

from __future__ import annotations

import numpy as np

_U64 = np.uint64
_GAMMA = _U64(0x9E3779B97F4A7C15)
_M1 = _U64(0xBF58476D1CE4E5B9)
_M2 = _U64(0x94D049BB133111EB)


def splitmix64(x):
    """splitmix64 finalizer, elementwise on uint64 arrays or scalars."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x + _GAMMA
        x = (x ^ (x >> _U64(30))) * _M1
        x = (x ^ (x >> _U64(27))) * _M2
        return x ^ (x >> _U64(31))


def mix(*keys):
    """Fold any number of integer keys (scalars or arrays) into one uint64."""
    h = np.uint64(0)
    for k in keys:
        h = splitmix64(h ^ np.asarray(k, dtype=np.uint64))
    return h


def uniform01(*keys):
    """Uniform deviate strictly inside (0, 1), one per broadcast element."""
    h = mix(*keys)
    return ((h >> _U64(11)).astype(np.float64) + 0.5) * 2.0**-53
