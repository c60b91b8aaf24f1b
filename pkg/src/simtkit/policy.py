"""Read/write policies for streaming translation.

The adaptive policy appends a pseudo-future suffix to the consumed source
prefix and measures how much the predicted next-token distribution moves
(cosine distance). A small divergence means the model already knows enough
to commit a token; a large one means more source is needed. Wait-k is the
fixed-schedule baseline.

The decision loop mirrors the streaming inference procedure:
  * the source cursor starts at ``initial_prefix`` (clamped to the sentence)
  * a write fires when divergence <= lambda, when ``r_max`` consecutive
    reads have accumulated, or when the source is exhausted
  * a greedily decoded EOS is committed only once the whole source has been
    read; earlier EOS predictions turn the step into a read instead

One deliberate divergence from the literal decision procedure: when a write
is *forced* by the r_max cap and the greedy token is a premature EOS, the
best non-EOS token is committed instead of reading again. Reading there
would let runs of consecutive reads exceed r_max, defeating the cap's
purpose of guaranteeing progress.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .core import (
    ConfigError,
    Distribution,
    PolicyConfig,
    READ,
    WRITE,
    StreamState,
    Vocabulary,
    decode_sentence,
)

# force-reason codes carried by trace records
THRESHOLD = "THRESHOLD"
RMAX = "RMAX"
EXHAUSTED = "EXHAUSTED"
EOS_DEFERRED = "EOS_DEFERRED"  # write intent downgraded to a read by the EOS guard


def cosine_divergence(p: Distribution, q: Distribution) -> float:
    """1 - cos(p, q), clamped into [0, 1].

    Non-negative entries make the raw value lie in [0, 1] up to float
    round-off; the clamp removes the round-off. The denominator is computed
    as sqrt(dot(p,p) * dot(q,q)) so identical vectors give exactly 0 and the
    result is symmetric bit for bit.
    """
    num = float(np.dot(p.probs, q.probs))
    den = math.sqrt(float(np.dot(p.probs, p.probs)) * float(np.dot(q.probs, q.probs)))
    return min(max(1.0 - num / den, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Pseudo-future suffixes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedSuffix:
    """A constant token-id suffix; must end with EOS."""
    tokens: tuple[int, ...]
    name: str = "fixed"


@dataclass(frozen=True)
class RandomSuffix:
    """``count`` ids drawn uniformly from the ``top_k`` most frequent ranked
    tokens, resampled on every decision."""
    count: int = 4
    top_k: int = 200
    seed: int | None = None
    name: str = "random"


@dataclass(frozen=True)
class OracleSuffix:
    """The true source continuation; the upper-bound suffix."""
    name: str = "oracle"


@dataclass(frozen=True)
class ExternalSuffix:
    """Delegates to a provider(prefix_text, vocab) -> token strings."""
    provider: Callable[[str, Vocabulary], Sequence[str]]
    name: str = "external"


SuffixSpec = Union[FixedSuffix, RandomSuffix, OracleSuffix, ExternalSuffix]


def echo_provider(text: str) -> Callable[[str, Vocabulary], list[str]]:
    """External-provider stub that always returns the same token strings."""
    tokens = text.split()

    def provide(_prefix_text: str, _vocab: Vocabulary) -> list[str]:
        return list(tokens)

    return provide


def suffix_from_name(name: str, vocab: Vocabulary,
                     tokens: Sequence[str] | None = None,
                     random_count: int = 4,
                     random_top_k: int = 200) -> SuffixSpec:
    """Resolve a registry name into a suffix spec.

    Named fixed suffixes: ``eos``, ``unk-eos``, ``ellipsis-eos``; ``random``
    and ``oracle`` are keywords; ``custom`` uses ``tokens`` (OOV mapped to
    UNK, EOS appended when missing).
    """
    if name == "eos":
        return FixedSuffix((vocab.eos,), name="eos")
    if name == "unk-eos":
        return FixedSuffix((vocab.unk, vocab.eos), name="unk-eos")
    if name == "ellipsis-eos":
        return FixedSuffix((vocab.id("..."), vocab.eos), name="ellipsis-eos")
    if name == "random":
        return RandomSuffix(count=random_count, top_k=random_top_k)
    if name == "oracle":
        return OracleSuffix()
    if name == "custom":
        if not tokens:
            raise ConfigError("custom suffix requires tokens")
        ids = [vocab.id(t) for t in tokens]
        if ids[-1] != vocab.eos:
            ids.append(vocab.eos)
        return FixedSuffix(tuple(ids), name="custom")
    raise ConfigError(f"unknown suffix name {name!r}")


def make_suffix(
    spec: SuffixSpec,
    vocab: Vocabulary,
    rng: np.random.Generator | None = None,
    full_source: Sequence[int] | None = None,
    j: int = 0,
) -> tuple[int, ...]:
    """Produce the pseudo-future token ids for one decision."""
    if isinstance(spec, FixedSuffix):
        if not spec.tokens or spec.tokens[-1] != vocab.eos:
            raise ConfigError("fixed suffix must end with EOS")
        return spec.tokens
    if isinstance(spec, RandomSuffix):
        if spec.count < 1:
            raise ConfigError("random suffix count must be >= 1")
        pool = vocab.top_ranked_ids(spec.top_k)
        if rng is None:
            rng = np.random.default_rng(spec.seed)
        return tuple(int(pool[i]) for i in rng.integers(0, len(pool), size=spec.count))
    if isinstance(spec, OracleSuffix):
        if full_source is None:
            raise ConfigError("oracle suffix requires the full source")
        if j >= len(full_source):
            raise ConfigError("oracle suffix undefined once the source is exhausted")
        return tuple(full_source[j:])
    if isinstance(spec, ExternalSuffix):
        prefix_text = " ".join(decode_sentence(full_source[:j], vocab, strip_eos=False)) \
            if full_source is not None else ""
        produced = spec.provider(prefix_text, vocab)
        if not produced:
            raise ConfigError("external suffix provider returned an empty sequence")
        ids = tuple(vocab.id(t) for t in produced)
        if ids[-1] != vocab.eos:
            raise ConfigError("external suffix must end with EOS")
        return ids
    raise ConfigError(f"unknown suffix spec {spec!r}")


# ---------------------------------------------------------------------------
# Divergence probes and decisions
# ---------------------------------------------------------------------------

def psfuture_divergence(model, source_prefix, target_prefix, suffix) -> float:
    """Divergence between predictions with and without the pseudo future."""
    part = model.next_dist(tuple(source_prefix), tuple(target_prefix))
    pseudo = model.next_dist(tuple(source_prefix) + tuple(suffix), tuple(target_prefix))
    return cosine_divergence(part, pseudo)


@dataclass(frozen=True)
class Intent:
    write: bool
    reason: str | None = None  # THRESHOLD / RMAX / EXHAUSTED for writes


def decide(divergence: float | None, cfg: PolicyConfig, r_c: int,
           source_exhausted: bool) -> Intent:
    """Write intent iff divergence <= lambda, r_c >= r_max, or the source is done.

    Forced conditions are checked first so callers may skip computing the
    divergence (passing None) when a write is already forced.
    """
    if source_exhausted:
        return Intent(True, EXHAUSTED)
    if cfg.r_max is not None and r_c >= cfg.r_max:
        return Intent(True, RMAX)
    if divergence is not None and divergence <= cfg.lam:
        return Intent(True, THRESHOLD)
    return Intent(False)


@dataclass
class SimulationResult:
    hypothesis: tuple[int, ...]   # committed tokens, EOS last unless truncated
    g_record: tuple[int, ...]
    trace: list[dict]
    truncated: bool


def simulate_sentence(
    model,
    vocab: Vocabulary,
    cfg: PolicyConfig,
    suffix_spec: SuffixSpec,
    source: Sequence[int],
    rng: np.random.Generator | None = None,
) -> SimulationResult:
    """Run the adaptive read/write loop over one source sentence.

    The trace holds one record per decision: kind R/W, the cursor at
    decision time, the divergence when one was computed, the force reason
    for writes, and the emitted token id for writes.
    """
    source = tuple(source)
    if not source or source[-1] != vocab.eos:
        raise ConfigError("source must be non-empty and end with EOS")
    if isinstance(suffix_spec, RandomSuffix) and rng is None:
        rng = np.random.default_rng(suffix_spec.seed)

    n = len(source)
    state = StreamState(n, cfg.initial_prefix, vocab.bos)
    trace: list[dict] = []
    truncated = False
    step = 0

    while state.emitted[-1] != vocab.eos:
        if len(state.g_record) >= cfg.max_target_len:
            truncated = True
            break
        step += 1
        exhausted = state.j >= n
        divergence = None
        if not exhausted and (cfg.r_max is None or state.r_c < cfg.r_max):
            suffix = make_suffix(suffix_spec, vocab, rng, full_source=source, j=state.j)
            divergence = psfuture_divergence(
                model, source[:state.j], state.target_prefix, suffix)
        intent = decide(divergence, cfg, state.r_c, exhausted)

        if not intent.write:
            trace.append({"step": step, "kind": READ, "j": state.j,
                          "divergence": divergence})
            state.read()
            continue

        dist = model.next_dist(source[:state.j], state.target_prefix)
        token = dist.argmax()
        record = {"step": step, "kind": WRITE, "j": state.j, "reason": intent.reason}
        if intent.reason == THRESHOLD:
            record["divergence"] = divergence
        if token != vocab.eos or state.j >= n:
            record["token"] = token
            trace.append(record)
            state.write(token)
        elif intent.reason == RMAX:
            # forced write: committing a premature EOS would truncate the
            # sentence, and reading would breach the r_max cap, so emit the
            # best non-EOS token instead
            masked = dist.probs.copy()
            masked[vocab.eos] = -1.0
            token = int(np.argmax(masked))
            record["token"] = token
            record["swapped_eos"] = True
            trace.append(record)
            state.write(token)
        else:
            trace.append({"step": step, "kind": READ, "j": state.j,
                          "reason": EOS_DEFERRED, "divergence": divergence})
            state.read()

    return SimulationResult(
        hypothesis=state.target_prefix,
        g_record=tuple(state.g_record),
        trace=trace,
        truncated=truncated,
    )


# ---------------------------------------------------------------------------
# Wait-k
# ---------------------------------------------------------------------------

def waitk_g(t: int, k: int, n: int) -> int:
    """Source tokens read before writing target token t: min(t+k-1, n)."""
    if t < 1 or k < 1 or n < 1:
        raise ConfigError("t, k, n must all be >= 1")
    return min(t + k - 1, n)


def simulate_waitk(
    model,
    vocab: Vocabulary,
    k: int,
    source: Sequence[int],
    max_target_len: int = 64,
) -> SimulationResult:
    """Greedy decoding under the fixed wait-k schedule."""
    source = tuple(source)
    if k < 1:
        raise ConfigError("k must be >= 1")
    n = len(source)
    hyp: list[int] = []
    g_rec: list[int] = []
    while len(hyp) < max_target_len:
        t = len(hyp) + 1
        g = waitk_g(t, k, n)
        dist = model.next_dist(source[:g], tuple(hyp))
        token = dist.argmax()
        hyp.append(token)
        g_rec.append(g)
        if token == vocab.eos:
            break
    truncated = not hyp or hyp[-1] != vocab.eos
    return SimulationResult(tuple(hyp), tuple(g_rec), [], truncated)


# ---------------------------------------------------------------------------
# Divergence matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DivergenceMatrix:
    """Teacher-forced divergences: rows are reference target steps, columns
    source prefix lengths."""
    values: np.ndarray  # (T, N)
    mask: np.ndarray    # cell validity

    def __post_init__(self):
        valid = self.values[self.mask]
        if valid.size and (np.any(valid < 0.0) or np.any(valid > 1.0)):
            raise ValueError("divergence entries must lie in [0, 1]")


def divergence_matrix(
    model,
    vocab: Vocabulary,
    pair,
    suffix_spec: SuffixSpec,
    rng: np.random.Generator | None = None,
) -> DivergenceMatrix:
    """Entry (t, g) = divergence at reference prefix y_<t and source x_<=g.

    With the oracle suffix the g = N column is defined as zero: no future
    remains to append.
    """
    if isinstance(suffix_spec, RandomSuffix) and rng is None:
        rng = np.random.default_rng(suffix_spec.seed)
    n = len(pair.source)
    t_len = len(pair.target)
    values = np.zeros((t_len, n))
    for ti in range(t_len):
        tgt_prefix = pair.target[:ti]
        for g in range(1, n + 1):
            if isinstance(suffix_spec, OracleSuffix) and g == n:
                values[ti, g - 1] = 0.0
                continue
            suffix = make_suffix(suffix_spec, vocab, rng,
                                 full_source=pair.source, j=g)
            values[ti, g - 1] = psfuture_divergence(
                model, pair.source[:g], tgt_prefix, suffix)
    return DivergenceMatrix(values=values, mask=np.ones_like(values, dtype=bool))


def threshold_path(matrix: DivergenceMatrix, lam: float) -> list[tuple[int, int]]:
    """Greedy staircase through the matrix: write (t, g) when the cell clears
    the threshold or the source is spent, else read. 1-based coordinates."""
    t_len, n = matrix.values.shape
    path = []
    g = 1
    for t in range(1, t_len + 1):
        while g < n and matrix.values[t - 1, g - 1] > lam:
            g += 1
        path.append((t, g))
    return path
