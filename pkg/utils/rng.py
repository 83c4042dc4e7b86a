"""
Deterministic random streams
One master seed, split per subsystem and entity by stable label hashing.
"""
import hashlib
from typing import Hashable

import numpy as np


def derive_key(seed: int, *labels: Hashable) -> int:
    """Stable 128-bit key for (seed, labels); independent of PYTHONHASHSEED"""
    text = ":".join([str(int(seed))] + [str(label) for label in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def stream(seed: int, *labels: Hashable) -> np.random.Generator:
    """Independent generator for one labelled consumer"""
    return np.random.default_rng(np.random.SeedSequence(derive_key(seed, *labels)))


class StreamPool:
    """Lazily created generators keyed by label tuple"""

    def __init__(self, seed: int, *prefix: Hashable):
        self.seed = int(seed)
        self.prefix = prefix
        self._streams: dict = {}

    def get(self, *labels: Hashable) -> np.random.Generator:
        key = labels
        gen = self._streams.get(key)
        if gen is None:
            gen = stream(self.seed, *self.prefix, *labels)
            self._streams[key] = gen
        return gen
