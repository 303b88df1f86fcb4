"""Seeded random streams for reproducible simulation and sampling.

A stream is a seed plus a key path. Child streams extend the path, so the
numbers a component draws depend only on (seed, path) and never on how many
draws other components made before it. Keys may be strings (agent ids,
purposes) or integers (sample or step indices).
"""
from __future__ import annotations

import zlib
from typing import Tuple, Union

import numpy as np

Key = Union[int, str]


def _key_word(key: Key) -> int:
    if isinstance(key, str):
        # crc32 is stable across interpreter runs, unlike hash()
        return zlib.crc32(key.encode("utf-8"))
    return int(key) & 0xFFFFFFFF


class RandomStream:
    """Value-type handle on a keyed numpy random generator"""

    __slots__ = ("seed", "path")

    def __init__(self, seed: int, path: Tuple[int, ...] = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.path = tuple(path)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, path={self.path})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RandomStream) and (self.seed, self.path) == (other.seed, other.path)

    def __hash__(self) -> int:
        return hash((self.seed, self.path))

    def child(self, *keys: Key) -> RandomStream:
        """Independent sub-stream keyed by the given path suffix"""
        return RandomStream(self.seed, self.path + tuple(_key_word(key) for key in keys))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream"""
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(sequence))

    def normal(self, mean=0.0, std=1.0, size=None):
        return self.generator().normal(mean, std, size)

    def uniform(self, size=None):
        return self.generator().random(size)
