"""Named, index-addressable random substreams.

A run has one integer seed. Every consumer asks for ``substream(seed, name, index)``
so that draws for pair 7 never depend on how many pairs came before it.
"""

from __future__ import annotations

import zlib

import numpy as np


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFF_FFFF_FFFF_FFFF, spawn_key=(_name_key(name), int(index)))
    return np.random.default_rng(ss)


def as_generator(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
