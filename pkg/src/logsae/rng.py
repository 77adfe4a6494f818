"""Keyed random streams.

Every stochastic routine draws from a counter-based generator keyed by
``(seed, purpose, replicate)``.  Streams are therefore independent of
worker count, execution order, and of each other across purposes, and any
replicate's draws can be regenerated in isolation.
"""

from __future__ import annotations

import numpy as np

# purpose keys; never reuse a value
GENERATE = 1
BOOTSTRAP = 2
DERIVE = 3


def check_seed(seed) -> int:
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return int(seed)


def stream(seed: int, purpose: int, replicate: int) -> np.random.Generator:
    """Generator for one (seed, purpose, replicate) key."""
    entropy = (check_seed(seed), purpose, replicate)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, replicate: int) -> int:
    """A stable sub-seed, for handing to a nested seeded routine."""
    entropy = (check_seed(seed), DERIVE, replicate)
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
