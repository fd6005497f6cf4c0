"""Seed-derived independent random streams."""

import numpy as np

# spawn-key namespaces
INIT = 0
SWEEP = 1
REPEAT = 2
SYNTH = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the sub-stream ``key`` of ``seed``.

    Streams with different keys are statistically independent, and the same
    (seed, key) always yields the same sequence.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))
