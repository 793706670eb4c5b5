"""Deterministic random-stream derivation.

Every stochastic entry point derives a Philox generator from a 64-bit seed
plus a structured spawn key, so independent consumers (chains, synthetic
datasets, replicate draws, Sobol matrices) use non-overlapping streams and
results do not depend on call order or scheduling.
"""

from __future__ import annotations

import numpy as np

# Spawn-key domains.  Keeping them distinct guarantees that, e.g., chain 0
# and synthetic dataset 0 never share a stream even under the same seed.
DOMAIN_CHAIN = 1
DOMAIN_SYNTHETIC = 2
DOMAIN_REPLICATE = 3
DOMAIN_SOBOL = 4


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return a counter-based generator for (seed, key...).

    Parameters
    ----------
    seed : int
        64-bit base seed shared by a whole run.
    *key : int
        Domain constant plus any further indices (chain index, draw
        index, ...) identifying the consumer.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
