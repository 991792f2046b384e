"""Seeded random number streams.

All randomness flows through numpy ``Generator`` objects backed by PCG64,
whose output stream is fully determined by the seed: identical seed and call
sequence reproduce identical draws. Independent substreams are derived with
``SeedSequence`` spawn keys so that e.g. network init and the training loop
cannot perturb each other.
"""

from __future__ import annotations

import numpy as np

Rng = np.random.Generator


def make_rng(seed: int) -> Rng:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def child_rng(seed: int, *key: int) -> Rng:
    """Stream derived from `seed` and an integer path, e.g. child_rng(s, 2, 0)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def gaussian_sample(rng: Rng, n: int, mean, std) -> np.ndarray:
    """`n` i.i.d. draws from N(mean, std^2 I); mean may be a vector."""
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    std = float(std)
    if std < 0:
        raise ValueError(f"std must be >= 0, got {std}")
    return mean + std * rng.standard_normal((n, mean.shape[0]))
