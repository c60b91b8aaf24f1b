"""Shared domain types: vocabulary, sentence pairs, distributions, stream state.

Conventions used throughout the package:
  * token ids are dense integers 0..|V|-1; BOS/EOS/UNK are always present
  * every source/target sequence ends with exactly one EOS token
  * BOS is a decoder-side sentinel only; it is never counted in source or
    target lengths, cursors, or write records
  * probabilities are 64-bit floats everywhere
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

DIST_TOL = 1e-9

DEFAULT_SPECIALS = ("<bos>", "<eos>", "<unk>")


class ConfigError(ValueError):
    """Invalid configuration or construction arguments."""


class CorpusError(ValueError):
    """Malformed corpus data (sentences, ids, alignments)."""


class CapacityError(ValueError):
    """Sequence exceeds a model's maximum supported length."""


class NumericError(RuntimeError):
    """Non-finite value encountered in a numeric computation."""


class ModelFileError(ValueError):
    """Unreadable, corrupt, or incompatible model file."""


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Vocabulary:
    """Token/id bijection with special tokens and optional frequency ranks.

    ``freq_rank`` maps ranked tokens to 1-based ranks (1 = most frequent)
    and, when present, is a bijection onto 1..n_ranked. Special tokens are
    never ranked; ranks drive random-suffix sampling of real words.
    """

    tokens: tuple[str, ...]
    bos: int
    eos: int
    unk: int
    freq_rank: Mapping[str, int] | None = None
    id_of: Mapping[str, int] = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        if self.id_of is None:
            object.__setattr__(self, "id_of", {t: i for i, t in enumerate(self.tokens)})
        if len(self.id_of) != len(self.tokens):
            raise ConfigError("duplicate tokens in vocabulary")
        for name, i in (("bos", self.bos), ("eos", self.eos), ("unk", self.unk)):
            if not (0 <= i < len(self.tokens)):
                raise ConfigError(f"{name} id {i} out of range")
        if len({self.bos, self.eos, self.unk}) != 3:
            raise ConfigError("BOS, EOS, UNK ids must be distinct")
        if self.freq_rank is not None:
            ranks = sorted(self.freq_rank.values())
            if ranks != list(range(1, len(ranks) + 1)):
                raise ConfigError("freq_rank is not a bijection onto 1..n_ranked")
            for tok in self.freq_rank:
                if tok not in self.id_of:
                    raise ConfigError(f"ranked token {tok!r} not in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    def id(self, token: str) -> int:
        """Id of ``token``, falling back to UNK for out-of-vocabulary tokens."""
        return self.id_of.get(token, self.unk)

    def top_ranked_ids(self, top_k: int) -> list[int]:
        """Ids of the ``top_k`` most frequent ranked tokens, best rank first."""
        if self.freq_rank is None:
            raise ConfigError("vocabulary has no frequency ranks")
        if top_k > len(self.freq_rank):
            raise ConfigError(
                f"top_k={top_k} exceeds {len(self.freq_rank)} ranked tokens")
        by_rank = sorted(self.freq_rank.items(), key=lambda kv: kv[1])
        return [self.id_of[tok] for tok, _ in by_rank[:top_k]]

    def hash_hex(self) -> str:
        """Stable fingerprint of the token list and special ids."""
        payload = "\x1f".join(self.tokens) + f"|{self.bos},{self.eos},{self.unk}"
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def build_vocabulary(
    corpus: Iterable[Sequence[str]],
    specials: tuple[str, str, str] = DEFAULT_SPECIALS,
) -> Vocabulary:
    """Build a vocabulary from tokenized sentences.

    Specials occupy ids 0..2; remaining tokens follow in first-occurrence
    order. Frequency ranks come from corpus counts with ties broken by first
    occurrence; special tokens are excluded from the ranking.
    """
    if len(set(specials)) != 3:
        raise ConfigError(f"special tokens must be distinct, got {specials}")
    counts: Counter[str] = Counter()
    first_seen: dict[str, int] = {}
    n_sentences = 0
    for sent in corpus:
        n_sentences += 1
        for tok in sent:
            counts[tok] += 1
            first_seen.setdefault(tok, len(first_seen))
    if n_sentences == 0:
        raise ConfigError("cannot build a vocabulary from an empty corpus")

    tokens = list(specials)
    for tok in sorted(first_seen, key=first_seen.__getitem__):
        if tok not in specials:
            tokens.append(tok)

    ranked = [t for t in counts if t not in specials]
    ranked.sort(key=lambda t: (-counts[t], first_seen[t]))
    freq_rank = {tok: r for r, tok in enumerate(ranked, start=1)}
    return Vocabulary(tokens=tuple(tokens), bos=0, eos=1, unk=2, freq_rank=freq_rank)


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

class Distribution:
    """A probability vector over the vocabulary.

    Construction rejects negative entries and vectors whose mass is not
    within 1e-9 of one. The underlying array is read-only.
    """

    __slots__ = ("probs",)

    def __init__(self, probs):
        vec = np.asarray(probs, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise ValueError("distribution must be a non-empty 1-d vector")
        if np.any(vec < 0.0):
            raise ValueError("distribution has negative entries")
        total = float(vec.sum())
        if abs(total - 1.0) > DIST_TOL:
            raise ValueError(f"distribution mass {total!r} not within {DIST_TOL} of 1")
        vec = vec.copy()
        vec.setflags(write=False)
        self.probs = vec

    def __len__(self) -> int:
        return int(self.probs.size)

    def argmax(self) -> int:
        """Lowest index among maximal entries (deterministic tie-break)."""
        return int(np.argmax(self.probs))


def delta_distribution(n_vocab: int, token_id: int) -> Distribution:
    vec = np.zeros(n_vocab)
    vec[token_id] = 1.0
    return Distribution(vec)


def uniform_distribution(n_vocab: int, support: Sequence[int] | None = None) -> Distribution:
    """Uniform over ``support`` ids (or the whole vocabulary)."""
    vec = np.zeros(n_vocab)
    if support is None:
        vec[:] = 1.0 / n_vocab
    else:
        ids = sorted(set(support))
        if not ids:
            raise ValueError("empty support")
        vec[ids] = 1.0 / len(ids)
    return Distribution(vec)


# ---------------------------------------------------------------------------
# Sentence pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SentencePair:
    """One parallel sentence: id sequences ending in EOS, optional alignment.

    Alignment links are 1-based (target_index, source_index) pairs.
    """

    source: tuple[int, ...]
    target: tuple[int, ...]
    alignment: frozenset[tuple[int, int]] | None = None


def validate_pair(pair: SentencePair, vocab: Vocabulary) -> None:
    """Raise CorpusError unless all SentencePair invariants hold under vocab."""
    n_vocab = len(vocab)
    for side, seq in (("source", pair.source), ("target", pair.target)):
        if len(seq) == 0:
            raise CorpusError(f"{side} sequence is empty")
        if seq[-1] != vocab.eos:
            raise CorpusError(f"{side} sequence does not end with EOS")
        if seq.count(vocab.eos) != 1:
            raise CorpusError(f"{side} sequence contains more than one EOS")
        for tok in seq:
            if not (0 <= tok < n_vocab):
                raise CorpusError(f"{side} id {tok} out of range 0..{n_vocab - 1}")
    if pair.alignment is not None:
        n, t = len(pair.source), len(pair.target)
        for ti, si in pair.alignment:
            if not (1 <= ti <= t and 1 <= si <= n):
                raise CorpusError(f"alignment link ({ti},{si}) outside [1,{t}]x[1,{n}]")


# ---------------------------------------------------------------------------
# Policy configuration and decisions
# ---------------------------------------------------------------------------

READ = "R"
WRITE = "W"


@dataclass(frozen=True)
class PolicyConfig:
    """Knobs of the adaptive read/write loop.

    ``lam`` is the divergence threshold (negative values are allowed and
    degenerate to read-everything-first). ``r_max=None`` means no cap on
    consecutive reads. ``initial_prefix`` counts real source tokens.
    """

    lam: float = 0.2
    r_max: int | None = None
    initial_prefix: int = 2
    max_target_len: int = 64

    def __post_init__(self):
        if self.initial_prefix < 1:
            raise ConfigError("initial_prefix must be >= 1")
        if self.max_target_len < 1:
            raise ConfigError("max_target_len must be >= 1")
        if self.r_max is not None and self.r_max < 1:
            raise ConfigError("r_max must be >= 1 or None (unbounded)")


@dataclass(frozen=True)
class Decision:
    kind: str  # READ or WRITE
    token: int | None = None

    def __post_init__(self):
        if self.kind == WRITE and self.token is None:
            raise ConfigError("WRITE decision requires a token")
        if self.kind == READ and self.token is not None:
            raise ConfigError("READ decision cannot carry a token")
        if self.kind not in (READ, WRITE):
            raise ConfigError(f"unknown decision kind {self.kind!r}")


class StreamState:
    """Cursor state of one in-flight simultaneous decoding session.

    ``j`` counts consumed source tokens, ``emitted`` starts with BOS, and
    ``g_record[t]`` is the value of ``j`` when the t-th target token was
    written. ``j`` and ``g_record`` are monotone by construction.
    """

    __slots__ = ("n_source", "j", "emitted", "r_c", "g_record")

    def __init__(self, n_source: int, initial_prefix: int, bos: int):
        if n_source < 1:
            raise ConfigError("source must contain at least one token")
        self.n_source = n_source
        self.j = min(initial_prefix, n_source)
        self.emitted: list[int] = [bos]
        self.r_c = 1  # the initial prefix counts as one continuous read
        self.g_record: list[int] = []

    @property
    def target_prefix(self) -> tuple[int, ...]:
        """Committed target tokens without the BOS sentinel."""
        return tuple(self.emitted[1:])

    def read(self) -> None:
        if self.j >= self.n_source:
            raise ConfigError("cannot read past the end of the source")
        self.j += 1
        self.r_c += 1

    def write(self, token: int) -> None:
        self.emitted.append(token)
        self.g_record.append(self.j)
        self.r_c = 0

    def apply(self, decision: Decision) -> None:
        if decision.kind == READ:
            self.read()
        else:
            self.write(decision.token)


# ---------------------------------------------------------------------------
# Corpus file I/O
# ---------------------------------------------------------------------------
# Format: UTF-8 text, one sentence per line, single-space separated tokens.
# EOS is appended on load and never written. Alignment files carry 1-based
# `t-s` pairs per line, line-aligned with the corpus.

def read_token_lines(path) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh.read().splitlines()]


def encode_sentence(tokens: Sequence[str], vocab: Vocabulary) -> tuple[int, ...]:
    """Map tokens to ids (OOV -> UNK) and append EOS."""
    return tuple(vocab.id(t) for t in tokens) + (vocab.eos,)


def decode_sentence(ids: Sequence[int], vocab: Vocabulary, strip_eos: bool = True) -> list[str]:
    out = [vocab.token(i) for i in ids]
    if strip_eos and out and ids[-1] == vocab.eos:
        out = out[:-1]
    return out


def parse_alignment_line(line: str) -> frozenset[tuple[int, int]]:
    links = set()
    for chunk in line.split():
        try:
            t_str, s_str = chunk.split("-")
            links.add((int(t_str), int(s_str)))
        except ValueError as exc:
            raise CorpusError(f"bad alignment link {chunk!r}") from exc
    return frozenset(links)


def load_parallel_corpus(
    src_path,
    tgt_path,
    vocab: Vocabulary | None = None,
    align_path=None,
) -> tuple[Vocabulary, list[SentencePair]]:
    """Load a line-aligned corpus, building a joint vocabulary if none given."""
    src_lines = read_token_lines(src_path)
    tgt_lines = read_token_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise CorpusError(
            f"source/target line counts differ: {len(src_lines)} vs {len(tgt_lines)}")
    if any(not line for line in src_lines) or any(not line for line in tgt_lines):
        raise CorpusError("corpus contains an empty sentence")
    if vocab is None:
        vocab = build_vocabulary(src_lines + tgt_lines)

    alignments: list[frozenset[tuple[int, int]] | None]
    if align_path is not None:
        with open(align_path, encoding="utf-8") as fh:
            align_lines = fh.read().splitlines()
        if len(align_lines) != len(src_lines):
            raise CorpusError("alignment file is not line-aligned with the corpus")
        alignments = [parse_alignment_line(line) for line in align_lines]
    else:
        alignments = [None] * len(src_lines)

    pairs = []
    for src, tgt, align in zip(src_lines, tgt_lines, alignments):
        pair = SentencePair(
            source=encode_sentence(src, vocab),
            target=encode_sentence(tgt, vocab),
            alignment=align,
        )
        validate_pair(pair, vocab)
        pairs.append(pair)
    return vocab, pairs


def write_parallel_corpus(pairs: Sequence[SentencePair], vocab: Vocabulary,
                          src_path, tgt_path, align_path=None) -> None:
    with open(src_path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(" ".join(decode_sentence(p.source, vocab)) + "\n")
    with open(tgt_path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(" ".join(decode_sentence(p.target, vocab)) + "\n")
    if align_path is not None:
        with open(align_path, "w", encoding="utf-8") as fh:
            for p in pairs:
                links = sorted(p.alignment or ())
                fh.write(" ".join(f"{t}-{s}" for t, s in links) + "\n")
