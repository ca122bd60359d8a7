"""Counter-based random streams.

Every draw is addressed by ``(seed, index)`` through a Philox counter, so a
stream can be cut into chunks and regenerated piecewise without changing a
single value. Replication ``r`` of a simulation gets its own Philox key derived
from ``(seed, r)``, which makes results independent of how replications are
spread over workers.
"""

import numpy as np

_OUTPUTS_PER_COUNTER = 4  # Philox4x64 emits four uint64 per counter step


# third path component distinguishing sub-streams of one replication
RETRY = 1
REPLACE = 2
# first path component of streams not tied to a replication index
ORACLE = 1 << 62


def _key(seed, *path):
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in path))
    return ss.generate_state(2, dtype=np.uint64)


def stream(seed, *path):
    """Generator keyed by ``seed`` and an optional integer path (e.g. a replication index)."""
    return np.random.Generator(np.random.Philox(key=_key(seed, *path)))


def uniform_block(seed, start, count, *path):
    """Uniforms ``start .. start+count-1`` of the stream keyed by ``(seed, *path)``.

    Values lie in (0, 1]; the same index always maps to the same value.
    """
    if start < 0 or count < 0:
        raise ValueError("start and count must be non-negative")
    bg = np.random.Philox(key=_key(seed, *path))
    bg.advance(start // _OUTPUTS_PER_COUNTER)
    gen = np.random.Generator(bg)
    skip = start % _OUTPUTS_PER_COUNTER
    if skip:
        gen.random(skip)
    return 1.0 - gen.random(count)
