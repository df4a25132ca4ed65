"""Deterministic random streams.

Every random draw in the package comes from a stream addressed by
``(seed, tag, index)``.  The triple is fed to :class:`numpy.random.SeedSequence`
as ``entropy=seed, spawn_key=(tag, index)``, so streams are independent of
each other and of the order in which they are requested.  Restarts, instance
generators and sampling checks can therefore run in any order or in parallel
and still reproduce bit-for-bit.
"""

from __future__ import annotations

import numpy as np

# stream tags; never renumber, persisted experiments depend on them
GOE = 1
Z2SYNC = 2
SBM = 3
RESTART = 10
SUBSETS = 11
POWER_ITER = 12
HYPERPLANE = 13
PERTURB = 14
SHUFFLE = 15
PROBE = 16
CELL = 17

_MASK64 = (1 << 64) - 1


def stream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    """Return the generator for stream ``(seed, tag, index)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=(int(tag), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, tag: int, index: int = 0) -> int:
    """A 64-bit integer seed derived from ``(seed, tag, index)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=(int(tag), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
