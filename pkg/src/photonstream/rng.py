"""Seed handling.

Every random draw in the package descends from one integer seed through
:class:`numpy.random.SeedSequence`. A component that needs independent
streams calls :func:`spawn` and uses the children in a fixed order, so the
derivation tree is part of the function's contract:

* ``sample_stream(seed)``: children 0, 1, 2 drive photon counts, emission
  offsets and the wandering trajectory.
* ``sample_stream_sharded(seed, n_shards)``: child ``i`` is the
  ``sample_stream`` seed of shard ``i``.
* ``simulate_mz(seed)``: children 0, 1, 2 drive arm choice, beamsplitter
  outcomes and detection; ``simulate_hbt(seed)``: children 0, 1 drive
  routing and detection.
* detection (child of the above): children 0, 1, 2 drive efficiency
  thinning, timing jitter and dark counts.
* CLI ``simulate --seed S``: child 0 feeds the (sharded) source, child 1 the
  interferometer/detector simulation.
"""

from __future__ import annotations

import numpy as np


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (int, np.integer)):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        return np.random.SeedSequence(int(seed))
    raise TypeError(f"seed must be an int or SeedSequence, got {type(seed).__name__}")


def spawn(seed, n: int) -> list[np.random.SeedSequence]:
    """Derive ``n`` independent child seeds.

    Children are derived from a fresh copy of the parent so repeated calls
    with the same integer seed give the same children.
    """
    ss = as_seed_sequence(seed)
    fresh = np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key, pool_size=ss.pool_size)
    return fresh.spawn(n)


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(as_seed_sequence(seed))
