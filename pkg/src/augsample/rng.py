"""Deterministic random-stream derivation.

All randomness in the package flows from a single user-supplied seed.
Independent trials, restarts, and sub-streams never share a generator;
they derive children by extending the seed with integer path components:
stream (seed, k) is ``numpy.random.default_rng([seed, k])``, stream
(seed, k, t) is ``default_rng([seed, k, t])``, and so on.  A seed may
itself already be such a tuple, so derivations compose.
"""

import numpy as np

Seed = int | tuple[int, ...] | list[int]


def seed_path(seed: Seed, *path: int) -> tuple[int, ...]:
    """Flatten a seed and extra path components into an integer tuple."""
    if isinstance(seed, (tuple, list)):
        base = tuple(int(s) for s in seed)
    else:
        base = (int(seed),)
    out = base + tuple(int(k) for k in path)
    if any(k < 0 for k in out):
        raise ValueError("seed components must be non-negative integers")
    return out


def child_rng(seed: Seed, *path: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *path)."""
    return np.random.default_rng(list(seed_path(seed, *path)))
