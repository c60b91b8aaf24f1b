"""Configuration-driven latency/quality sweeps and divergence reports.

A sweep evaluates one (lambda or k) x suffix cell at a time over a corpus
and emits one EvalResult row per cell, sorted by AL. Per-sentence RNGs are
derived from (global seed, sentence index) so serial and parallel runs, and
re-runs of individual cells, agree byte for byte.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConfigError, PolicyConfig, SentencePair, Vocabulary
from .metrics import EvalResult, evaluate_run
from .policy import (
    divergence_matrix,
    simulate_sentence,
    simulate_waitk,
    suffix_from_name,
    threshold_path,
)

DEFAULT_LAMBDA_GRID = (0.02, 0.05, 0.08, 0.1, 0.2, 0.4)


@dataclass(frozen=True)
class SweepSpec:
    policy: str                                  # "psfuture" | "waitk"
    lambdas: tuple[float, ...] = ()
    suffixes: tuple[str, ...] = ("eos",)
    suffix_tokens: tuple[str, ...] = ()          # for the "custom" suffix name
    ks: tuple[int, ...] = ()
    r_max: int | None = None
    initial_prefix: int = 2
    max_target_len: int = 64
    seed: int = 0
    parallel: bool = False
    workers: int = 4
    random_count: int = 4      # random-suffix knobs
    random_top_k: int = 200

    def __post_init__(self):
        if self.policy == "psfuture":
            if not self.lambdas:
                raise ConfigError("psfuture sweep requires a non-empty lambda list")
            if list(self.lambdas) != sorted(self.lambdas):
                raise ConfigError("lambda list must be sorted ascending")
            if not self.suffixes:
                raise ConfigError("psfuture sweep requires at least one suffix")
        elif self.policy == "waitk":
            if not self.ks or any(k < 1 for k in self.ks):
                raise ConfigError("waitk sweep requires positive k values")
        else:
            raise ConfigError(f"unknown policy {self.policy!r}")


def _sentence_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def run_sweep(
    model,
    vocab: Vocabulary,
    pairs: Sequence[SentencePair],
    spec: SweepSpec,
) -> list[EvalResult]:
    """One EvalResult row per sweep cell, sorted by AL."""
    if not pairs:
        raise ConfigError("sweep corpus is empty")
    results = []
    if spec.policy == "waitk":
        for k in spec.ks:
            results.append(_run_cell(model, vocab, pairs, spec, k=k))
    else:
        for suffix_name in spec.suffixes:
            for lam in spec.lambdas:
                results.append(_run_cell(model, vocab, pairs, spec,
                                         lam=lam, suffix_name=suffix_name))
    results.sort(key=lambda r: (r.al, r.lambda_or_k, r.suffix))
    return results


def _run_cell(model, vocab, pairs, spec, k=None, lam=None, suffix_name=None) -> EvalResult:
    if k is not None:
        def one(item):
            _i, pair = item
            sim = simulate_waitk(model, vocab, k, pair.source,
                                 max_target_len=spec.max_target_len)
            return sim.hypothesis, sim.g_record
        policy, value, suffix_id = "waitk", k, ""
    else:
        suffix = suffix_from_name(suffix_name, vocab, tokens=spec.suffix_tokens or None,
                                  random_count=spec.random_count,
                                  random_top_k=spec.random_top_k)
        cfg = PolicyConfig(lam=lam, r_max=spec.r_max,
                           initial_prefix=spec.initial_prefix,
                           max_target_len=spec.max_target_len)

        def one(item):
            i, pair = item
            sim = simulate_sentence(model, vocab, cfg, suffix, pair.source,
                                    rng=_sentence_rng(spec.seed, i))
            return sim.hypothesis, sim.g_record
        policy, value, suffix_id = "psfuture", lam, suffix.name

    try:
        if spec.parallel:
            with ThreadPoolExecutor(max_workers=spec.workers) as pool:
                outs = list(pool.map(one, enumerate(pairs)))
        else:
            outs = [one(item) for item in enumerate(pairs)]
    except Exception as exc:
        raise RuntimeError(
            f"sweep cell failed (policy={policy}, value={value}, "
            f"suffix={suffix_id or '-'}): {exc}") from exc

    hyps = [h for h, _ in outs]
    g_records = [g for _, g in outs]
    alignments = None
    if all(p.alignment is not None for p in pairs) and \
            all(h == p.target for h, p in zip(hyps, pairs)):
        # hypotheses match the references exactly, so the gold alignments apply
        alignments = [p.alignment for p in pairs]
    return evaluate_run(
        vocab,
        [p.source for p in pairs],
        [p.target for p in pairs],
        hyps,
        g_records,
        alignments,
        policy=policy,
        lambda_or_k=value,
        suffix=suffix_id,
        r_max=spec.r_max if k is None else None,
        seed=spec.seed,
    )


def sweep_csv_lines(results: Sequence[EvalResult], spec: SweepSpec,
                    provenance: dict | None = None) -> list[str]:
    """CSV text for a sweep: effective-config header comments, then rows."""
    lines = ["# simtkit sweep"]
    echo = {
        "policy": spec.policy,
        "lambdas": ",".join(repr(v) for v in spec.lambdas),
        "suffixes": ",".join(spec.suffixes),
        "ks": ",".join(str(k) for k in spec.ks),
        "r_max": "unbounded" if spec.r_max is None else spec.r_max,
        "initial_prefix": spec.initial_prefix,
        "max_target_len": spec.max_target_len,
        "seed": spec.seed,
    }
    if provenance:
        echo.update(provenance)
    for key in sorted(echo):
        lines.append(f"# {key}={echo[key]}")
    lines.append(EvalResult.CSV_HEADER)
    lines += [r.csv_row() for r in results]
    return lines


def emit_divergence_report(model, vocab, pair, suffix_spec, lam, path,
                           rng=None) -> None:
    """Write the divergence matrix as CSV plus the lambda-thresholded path.

    Rows are labelled with the reference target tokens; columns are source
    prefix lengths 1..N.
    """
    matrix = divergence_matrix(model, vocab, pair, suffix_spec, rng=rng)
    t_len, n = matrix.values.shape
    lines = ["# simtkit divergence matrix",
             f"# suffix={suffix_spec.name} lambda={lam!r}",
             "token," + ",".join(str(g) for g in range(1, n + 1))]
    for ti in range(t_len):
        label = vocab.token(pair.target[ti])
        row = ",".join(repr(float(v)) for v in matrix.values[ti])
        lines.append(f"{label},{row}")
    lines.append(f"# write path (t,g) at lambda={lam!r}")
    lines.append("t,token,g")
    for t, g in threshold_path(matrix, lam):
        lines.append(f"{t},{vocab.token(pair.target[t - 1])},{g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
