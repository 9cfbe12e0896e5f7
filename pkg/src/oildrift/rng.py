"""Deterministic random streams.

Every stochastic phase draws from its own counter-based Philox stream,
keyed by (master seed, realization, step index, phase tag).  Per-particle
values are drawn as arrays indexed by particle id, so results are
bit-identical for any worker count or particle-update order.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "PHASE_RELEASE", "PHASE_ENTRAIN", "PHASE_TURB", "PHASE_SPREAD", "PHASE_PARAMS"]

PHASE_RELEASE = 1
PHASE_ENTRAIN = 2
PHASE_TURB = 3
PHASE_SPREAD = 4
PHASE_PARAMS = 5


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """A Philox generator at a fixed (seed, *path) address."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
