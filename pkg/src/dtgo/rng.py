"""Named random streams derived from a single master seed.

Each experiment axis (graph draw, delays, partition, gradient sampling, edge
drops, ...) gets its own stream so that changing one axis leaves the others
untouched.
"""

from __future__ import annotations

import numpy as np

PURPOSES = {
    "graph": 0,
    "delays": 1,
    "partition": 2,
    "sampling": 3,
    "edge_drop": 4,
    "init": 5,
    "ids": 6,
    "warmup_drop": 7,
    "data": 8,
}


def stream(seed: int, purpose: str, *extra: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, purpose, *extra)``."""
    try:
        code = PURPOSES[purpose]
    except KeyError:
        raise ValueError(f"unknown rng purpose {purpose!r}") from None
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, code, *(int(e) for e in extra)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def node_streams(seed: int, purpose: str, n: int, *extra: int) -> list[np.random.Generator]:
    """One generator per node, split from ``(seed, purpose, *extra)``."""
    return [stream(seed, purpose, *extra, i) for i in range(n)]
