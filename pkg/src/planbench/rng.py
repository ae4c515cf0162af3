"""Deterministic, splittable random streams.

Every stream is a Philox (counter-based) generator keyed by a seed and a
spawn path. Splitting derives a child key from ``(seed, path + (k,))``
without advancing the parent, so the parent sequence is the same whether
or not children were created.
"""

from __future__ import annotations

import numpy as np


class RandomStream:
    """A single-owner random stream. Do not share one across threads."""

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, path={self.path})"

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def split(self, k: int) -> "RandomStream":
        """Child stream ``k``; independent of the parent and of other children."""
        if k < 0:
            raise ValueError("split index must be non-negative")
        return RandomStream(self.seed, self.path + (k,))

    def normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size)

    def gumbel(self, size=None) -> np.ndarray:
        return self._gen.gumbel(0.0, 1.0, size)

    def seed_int(self) -> int:
        """Draw a 63-bit integer, e.g. to seed an environment reset."""
        return int(self._gen.integers(0, 2**63 - 1))


def make_rng(seed: int) -> RandomStream:
    return RandomStream(seed)


def episode_seed(seed: int, index: int) -> int:
    """Reset seed of episode ``index`` in a run seeded with ``seed``."""
    return RandomStream(seed, (index, 0)).seed_int()


def episode_stream(seed: int, index: int) -> RandomStream:
    """Policy-side stream of episode ``index``; disjoint from the reset seed."""
    return RandomStream(seed, (index, 1))
