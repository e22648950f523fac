"""Deterministic, splittable random streams."""

import numpy as np


def make_rng(*keys):
    """Return a counter-based generator keyed by a tuple of non-negative integers.

    The same keys always give the same stream, and distinct keys give
    statistically independent streams, so parallel tasks can be seeded
    from ``(master_seed, cell, replicate)`` without coordination.
    """
    if not keys:
        raise ValueError("at least one key is required")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in keys])))


def as_rng(rng):
    """Accept a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return make_rng(int(rng))
    raise TypeError(f"expected numpy Generator or int seed, got {type(rng).__name__}")
