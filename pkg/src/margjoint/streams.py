"""Reproducible per-repetition random streams.

Every repetition draws from its own Philox generator. Philox is counter-based,
so a stream is fully determined by its key, and keys are derived with
:class:`numpy.random.SeedSequence` from ``(seed, purpose, rep_index)``. Results
therefore do not depend on execution order or on how repetitions are spread
over worker processes.
"""

from __future__ import annotations

import numpy as np

# Stream purposes; distinct simulators never share a stream for the same seed.
BINARY_SIM = 0
GAUSS_SIM = 1
RELATION = 2


def stream(seed: int, purpose: int, rep_index: int, *sub: int) -> np.random.Generator:
    """Independent generator for one repetition of one simulator."""
    if seed < 0 or rep_index < 0:
        raise ValueError("seed and rep_index must be non-negative")
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(purpose), int(rep_index), *map(int, sub)))
    return np.random.Generator(np.random.Philox(seq))
