"""Counter-based random streams.

Streams are keyed by (seed, stream_id) pairs on top of the Philox
counter-based generator, so distinct ids give statistically independent
streams and the same pair is bit-reproducible across runs and platforms.
Streams are single-consumer: never share one across workers.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def rng_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Deterministic stream for the given (seed, stream_id) pair."""
    key = np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
