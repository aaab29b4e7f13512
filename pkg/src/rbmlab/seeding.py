"""Per-trial seed derivation.

``derive_trial_seed(m, g, t)`` is, in 64-bit wrapping arithmetic::

    h = splitmix64(m + GAMMA * (g + 1))
    h = splitmix64(h ^ (GAMMA * (t + 1)))

with ``splitmix64(x) = mix(x + GAMMA)``, ``GAMMA = 0x9E3779B97F4A7C15`` and
``mix`` the standard SplitMix64 finalizer (xor-shift 30, multiply
``0xBF58476D1CE4E5B9``, xor-shift 27, multiply ``0x94D049BB133111EB``,
xor-shift 31). Trials are therefore order independent.
"""

from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK = 0xFFFFFFFFFFFFFFFF


def splitmix64(x):
    """SplitMix64 step; accepts Python ints or uint64 arrays."""
    if isinstance(x, np.ndarray):
        with np.errstate(over="ignore"):
            z = x.astype(np.uint64) + np.uint64(GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
            return z ^ (z >> np.uint64(31))
    z = (int(x) + GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def derive_trial_seed(master, grid_index, trial_index):
    """Seed for trial ``trial_index`` of grid point ``grid_index``."""
    if isinstance(trial_index, np.ndarray) or isinstance(grid_index, np.ndarray):
        g = np.asarray(grid_index, dtype=np.uint64)
        t = np.asarray(trial_index, dtype=np.uint64)
        with np.errstate(over="ignore"):
            h = splitmix64(np.uint64(int(master) & _MASK) + np.uint64(GAMMA) * (g + np.uint64(1)))
            return splitmix64(h ^ (np.uint64(GAMMA) * (t + np.uint64(1))))
    h = splitmix64((int(master) + GAMMA * (int(grid_index) + 1)) & _MASK)
    return splitmix64(h ^ ((GAMMA * (int(trial_index) + 1)) & _MASK))


def retry_seed(seed: int) -> int:
    """Perturbed seed used when a trial is retried after a numerical failure."""
    return splitmix64(int(seed) ^ 0xD1B54A32D192ED03)
