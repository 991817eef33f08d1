"""Deterministic random streams.

Every stochastic operation in the pipeline draws from a Philox 4x64
counter-based generator keyed by (global seed, stage tag, per-item key).
Philox is platform-independent and numpy pins its output, so the same
(seed, stage, key) triple yields the same draws on any machine, and items
can be processed in any order or in parallel without changing results.
"""

import numpy as np

# Stage tags keep the selection, corruption and sampling streams disjoint
# even when they share a global seed and item key.
STAGE_SELECT = 1
STAGE_CORRUPT = 2
STAGE_SAMPLE = 3

_U64 = (1 << 64) - 1


def stream(seed: int, stage: int, key: int = 0) -> np.random.Generator:
    """Return the Philox generator for (seed, stage, key)."""
    ss = np.random.SeedSequence([seed & _U64, stage & _U64, key & _U64])
    return np.random.Generator(np.random.Philox(ss))
