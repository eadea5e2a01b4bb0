"""Seeded, collision-free random number streams.

All stochastic code in the package draws from counter-based Philox
generators keyed by an explicit integer path, so a master seed plus a
replication index (plus any deeper coordinates) names one reproducible
stream.  Replications can therefore run in any order, or in parallel,
without seed collisions.
"""

from __future__ import annotations

import numpy as np

GENERATOR_NAME = "philox4x64"
NORMAL_TRANSFORM = "ziggurat"  # numpy Generator.standard_normal


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream named (master_seed, *path)."""
    seq = np.random.SeedSequence([int(master_seed), *[int(p) for p in path]])
    return np.random.Generator(np.random.Philox(seed=seq))


def rng_metadata() -> dict:
    """Provenance of the sampling pipeline, recorded in result files."""
    return {"generator": GENERATOR_NAME, "normal_transform": NORMAL_TRANSFORM}
