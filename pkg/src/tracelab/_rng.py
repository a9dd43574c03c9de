"""Counter-based, splittable randomness.

Every stream is a Philox generator keyed by (seed, *key) through a
SeedSequence spawn key, so a draw is a pure function of its key and
serial and parallel runs see identical samples.
"""

from __future__ import annotations

import numpy as np

# Monte Carlo loops draw in fixed-size blocks; block b of stream s is keyed
# (seed, s, b). Changing this constant changes every MC sample.
BLOCK_ROWS = 2048


def generator(seed: int, *key: int) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def keep_mask(rng: np.random.Generator, rows: int, n: int, q: float) -> np.ndarray:
    """Boolean (rows, n) survival mask: each bit kept with probability 1 - q."""
    return rng.random((rows, n)) >= q
