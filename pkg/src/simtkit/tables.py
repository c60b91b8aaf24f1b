"""Exact conditional next-token tables with context backoff.

A TableModel stands in for a trained translation model when analyzing policy
behavior: lookups are total, deterministic, and cheap, so read/write traces
can be verified against hand derivations.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .core import Distribution

# Fixed truncation schedule: with the full source context, try the full
# target context, then target suffixes of length 2, 1, 0; then truncate the
# source context the same way. First probe that hits wins; otherwise the
# default distribution applies.
BACKOFF_SCHEDULE = "t2,t1,t0,s*"

Context = tuple[int, ...]
Key = tuple[Context, Context]


def _levels(length: int) -> list[int]:
    out = []
    for lvl in (length, 2, 1, 0):
        if lvl <= length and lvl not in out:
            out.append(lvl)
    return out


def backoff_probes(source_ctx: Sequence[int], target_ctx: Sequence[int]) -> list[Key]:
    """All candidate keys for a query, most specific first."""
    src = tuple(source_ctx)
    tgt = tuple(target_ctx)
    probes: list[Key] = []
    for sl in _levels(len(src)):
        s = src[len(src) - sl:]
        for tl in _levels(len(tgt)):
            key = (s, tgt[len(tgt) - tl:])
            if key not in probes:
                probes.append(key)
    return probes


class TableModel:
    """Next-token distribution table keyed by (source ctx, target ctx)."""

    def __init__(
        self,
        n_vocab: int,
        entries: Mapping[Key, np.ndarray | Sequence[float]],
        default: np.ndarray | Sequence[float],
        backoff: str = BACKOFF_SCHEDULE,
        vocab=None,
    ):
        if backoff != BACKOFF_SCHEDULE:
            raise ValueError(f"unsupported backoff schedule {backoff!r}")
        self.n_vocab = n_vocab
        self.backoff = backoff
        self.vocab = vocab
        self.default = self._as_dist(default, n_vocab)
        self.entries: dict[Key, np.ndarray] = {}
        for (src, tgt), dist in entries.items():
            key = (tuple(src), tuple(tgt))
            self.entries[key] = self._as_dist(dist, n_vocab)

    @staticmethod
    def _as_dist(vec, n_vocab: int) -> np.ndarray:
        arr = Distribution(vec).probs
        if arr.size != n_vocab:
            raise ValueError(f"distribution length {arr.size} != vocab size {n_vocab}")
        return arr

    def next_dist(self, source_prefix: Sequence[int], target_prefix: Sequence[int]) -> Distribution:
        """Longest-match lookup over the backoff schedule; total by construction."""
        for key in backoff_probes(source_prefix, target_prefix):
            hit = self.entries.get(key)
            if hit is not None:
                return Distribution(hit)
        return Distribution(self.default)
