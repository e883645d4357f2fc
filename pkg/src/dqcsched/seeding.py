"""Independent random streams derived from declared seeds.

Every consumer gets ``SeedSequence([seed, stream, *counters])`` so streams never
overlap and a cell's randomness does not depend on execution order.
"""

from __future__ import annotations

import numpy as np

CAPACITY = 0
WORKLOAD = 1
PARTITION = 2
BASELINE = 3


def seed_sequence(seed: int | np.random.SeedSequence, stream: int = PARTITION,
                  *counters: int) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        if not counters and stream == PARTITION:
            return seed
        return np.random.SeedSequence(seed.entropy,
                                      spawn_key=tuple(seed.spawn_key) + (stream, *counters))
    return np.random.SeedSequence([int(seed), int(stream), *map(int, counters)])


def stream_rng(seed, stream: int, *counters: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, stream, *counters))
