"""Per-replicate seeds derived from one master seed.

Seed ``i`` of stream ``s`` depends only on ``(master, s, i)``, so results do
not change with chunking or with the number of workers.
"""

import numpy as np


def replicate_seeds(master: int, count: int, stream: int = 0, start: int = 0) -> np.ndarray:
    """``count`` 32-bit seeds for replicates ``start .. start+count-1``."""
    if master < 0:
        raise ValueError("master seed must be nonnegative")
    out = np.empty(count, dtype=np.int64)
    for k in range(count):
        ss = np.random.SeedSequence([int(master), int(stream), int(start + k)])
        out[k] = int(ss.generate_state(1, dtype=np.uint32)[0])
    return out


def substream(master: int, *keys: int) -> int:
    """One 32-bit seed labelled by ``keys`` (for auxiliary draws)."""
    ss = np.random.SeedSequence([int(master), 0x5EED, *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])
