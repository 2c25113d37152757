"""Deterministic seeding.

Every realization is drawn from a Philox4x64 counter generator keyed with a
64-bit seed.  Replication streams for an experiment are derived as
``stream_seed(base_seed, run_index)`` via a splitmix64 chain, so any run can
be reproduced from the (base_seed, run_index) pair recorded in the outputs.
The algorithm identifier below is pinned into run manifests.
"""

from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "philox4x64(key=splitmix64-stream(base_seed,run_index))/v1"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 step: bijective uint64 mix with good avalanche."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_seed(base_seed: int, run_index: int) -> int:
    """64-bit seed for replication `run_index` of an experiment."""
    if run_index < 0:
        raise ValueError("run_index must be non-negative")
    return splitmix64(splitmix64(base_seed & _MASK64) ^ run_index)


def make_generator(seed: int) -> np.random.Generator:
    """Philox-backed Generator for a 64-bit seed; streams are platform-stable."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))
