"""Deterministic seed splitting.

Every random quantity in the library is drawn from a substream addressed by
(root_seed, purpose, counter...). Substreams are independent PCG64 generators
derived through numpy's SeedSequence, so any trace replays exactly from its
root seed and adding a consumer never shifts the draws of another.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "subseed"]


def _encode(part) -> int:
    # SeedSequence entropy must be ints; purposes are short ASCII tags.
    if isinstance(part, str):
        return int.from_bytes(part.encode("ascii"), "little")
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"seed path components must be non-negative, got {part}")
        return int(part)
    raise TypeError(f"seed path component must be str or int, got {type(part).__name__}")


def subseed(root_seed: int, *path) -> int:
    """64-bit seed for the substream addressed by (root_seed, *path)."""
    entropy = (_encode(root_seed),) + tuple(_encode(p) for p in path)
    ss = np.random.SeedSequence(entropy=entropy)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def substream(root_seed: int, *path) -> np.random.Generator:
    """Independent generator for the substream addressed by (root_seed, *path)."""
    entropy = (_encode(root_seed),) + tuple(_encode(p) for p in path)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=entropy)))
