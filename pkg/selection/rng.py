"""Named, counter-indexed random substreams.

Every random draw in the app comes from `substream(seed, stream, index)`, so a
result depends only on (seed, stream, index) and never on how work was split
across threads.
"""

import numpy as np

# Stream identifiers; appending is fine, renumbering changes every result.
STREAMS = {
    "derangement": 1,
    "forecast": 2,
    "experiment": 3,
    "cv-fold": 4,
}


def _entropy(seed: int, stream: str, index: int, *more: int) -> list[int]:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return [int(seed), STREAMS[stream], int(index), *map(int, more)]


def substream(seed: int, stream: str, index: int, *more: int) -> np.random.Generator:
    """Independent generator for one (seed, stream, index) key."""
    return np.random.default_rng(np.random.SeedSequence(_entropy(seed, stream, index, *more)))


def derived_seed(seed: int, stream: str, index: int) -> int:
    """A 63-bit integer seed derived from a key, for handing to nested runs."""
    state = np.random.SeedSequence(_entropy(seed, stream, index)).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))
