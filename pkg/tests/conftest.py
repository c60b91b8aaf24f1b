"""Shared fixtures and deterministic pseudo-random models for tests."""

from __future__ import annotations

import hashlib

import numpy as np
import pytest

from simtkit import Vocabulary
from simtkit.core import Distribution


def make_vocab(n_content: int = 8) -> Vocabulary:
    tokens = ("<bos>", "<eos>", "<unk>") + tuple(f"w{i}" for i in range(n_content))
    return Vocabulary(tokens=tokens, bos=0, eos=1, unk=2)


class HashedModel:
    """Deterministic 'random' translation model for stress tests.

    The distribution for a context is derived from a hash of the context, so
    outputs look arbitrary but identical queries always agree, sessions are
    reproducible, and no training is needed.
    """

    def __init__(self, n_vocab: int, seed: int = 0):
        self.n_vocab = n_vocab
        self.seed = seed
        self._cache: dict[tuple, Distribution] = {}

    def next_dist(self, source_prefix, target_prefix) -> Distribution:
        key = (tuple(source_prefix), tuple(target_prefix))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        digest = hashlib.blake2b(
            repr((self.seed, key)).encode(), digest_size=8).digest()
        rng = np.random.Generator(
            np.random.PCG64(int.from_bytes(digest, "little")))
        vec = rng.random(self.n_vocab) + 1e-3
        dist = Distribution(vec / vec.sum())
        self._cache[key] = dist
        return dist


@pytest.fixture
def vocab11() -> Vocabulary:
    """3 specials + 8 content tokens (|V| = 11)."""
    return make_vocab(8)
