"""Named, independent random streams derived from a single run seed.

Every source of randomness in a run (proposal draws, mini-batch draws,
accept tests, ...) gets its own generator so that changing how often one
consumer draws never perturbs the others.
"""

from __future__ import annotations

import numpy as np

# Fixed registry: stream identity must never depend on dict ordering or
# on a hash that could change between interpreter versions.
_STREAM_IDS = {
    "init": 0,
    "proposal": 1,
    "batches": 2,
    "accept": 3,
    "noise": 4,
    "tune": 5,
    "data": 6,
}


def stream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Return the named generator for this seed.

    `index` selects a sub-stream (e.g. per-chain) within the same name.
    """
    try:
        sid = _STREAM_IDS[name]
    except KeyError:
        raise ValueError(f"unknown stream name {name!r}") from None
    return np.random.default_rng(np.random.SeedSequence((int(seed), sid, int(index))))


def stream_names() -> tuple[str, ...]:
    return tuple(_STREAM_IDS)
