"""Seed handling.

Every random draw in the package goes through a :class:`numpy.random.SeedSequence`
whose ``spawn_key`` encodes where the draw sits in an experiment::

    master seed ──> (stream, trial) ──> (branch | purpose)

Child sequences are built explicitly from ``(entropy, spawn_key)`` rather than
with ``SeedSequence.spawn`` so that deriving a child never mutates the parent.
Trial ``t`` therefore always sees the same stream, whatever the trial count.
"""

from __future__ import annotations

import numpy as np

# Stream identifiers used as the first spawn-key element.
FIELD_STREAM = 0
PILOT_STREAM = 1
CI_STREAM = 2


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        return np.random.SeedSequence()
    if isinstance(seed, (int, np.integer)):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        return np.random.SeedSequence(int(seed))
    raise TypeError(f"cannot build a seed sequence from {type(seed).__name__}")


def child(seed, *key: int) -> np.random.SeedSequence:
    """Derive the child sequence at ``key`` below ``seed`` without side effects."""
    ss = as_seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(key))


def trial_seed(master, stream: int, trial: int) -> np.random.SeedSequence:
    return child(master, stream, trial)


def generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(as_seed_sequence(seed)))
