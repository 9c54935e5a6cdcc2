"""Counter-based random streams.

Every random draw in the package goes through :func:`stream`, which maps a
root seed plus a tuple of integer keys to an independent Philox generator.
Any single (cell, trial) of an experiment can therefore be re-run in
isolation and gives bitwise-identical numbers on every platform.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "key"]


def key(label: str) -> int:
    """Stable 32-bit integer key for a text label."""
    return zlib.crc32(label.encode("utf-8"))


def stream(seed: int, *keys: int | str) -> np.random.Generator:
    """Generator for the substream ``(seed, *keys)``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for k in keys:
        entropy.append(key(k) if isinstance(k, str) else int(k) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
