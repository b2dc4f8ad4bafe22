"""Counter-based random streams for deterministic parallel execution.

Every stochastic component draws from a Philox generator keyed by
(master seed, stream id).  Distinct keys give statistically independent
streams, so results never depend on execution order or thread count.

Chain streams use ids 0..B-1 under the run's seed; auxiliary components
use ids above 2^62 to stay clear of any chain index.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "TAG_TUNER", "TAG_BOOTSTRAP", "TAG_DIAGNOSTIC", "TAG_HARNESS"]

_MASK = (1 << 64) - 1

_TAG_BASE = 1 << 62
_TAG_STRIDE = 1 << 32
TAG_TUNER = _TAG_BASE + 1 * _TAG_STRIDE
TAG_BOOTSTRAP = _TAG_BASE + 2 * _TAG_STRIDE
TAG_DIAGNOSTIC = _TAG_BASE + 3 * _TAG_STRIDE
TAG_HARNESS = _TAG_BASE + 4 * _TAG_STRIDE


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent generator for (seed, stream_id)."""
    key = np.array([int(seed) & _MASK, int(stream_id) & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
