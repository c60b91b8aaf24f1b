#!/usr/bin/env python3
"""Latency/quality curves on a synthetic corpus with its exact table model.

Generates a corpus, runs the adaptive policy against a lambda grid plus a
wait-k baseline, and prints both curves. On the exact model every hypothesis
matches the reference, so the interesting axis is latency.

Usage: python scripts/copy_sweep_demo.py [--kind tail-first] [--seed 7]
"""

import argparse

from simtkit import DEFAULT_LAMBDA_GRID, SweepSpec, SyntheticSpec, generate_corpus, run_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--kind", default="copy",
                    choices=["copy", "local-swap", "tail-first"])
    ap.add_argument("--n-pairs", type=int, default=60)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    vocab, pairs, model = generate_corpus(SyntheticSpec(
        kind=args.kind.replace("-", "_"), vocab_size=10, n_range=(5, 9),
        n_pairs=args.n_pairs, seed=args.seed))
    print(f"{args.kind}: {len(pairs)} pairs, vocab {len(vocab)}")

    header = f"{'policy':10} {'lam/k':>6} {'suffix':>8} {'AL':>7} {'BLEU':>6} {'HR':>5}"
    print(header)
    print("-" * len(header))
    rows = run_sweep(model, vocab, pairs, SweepSpec(
        policy="psfuture", lambdas=DEFAULT_LAMBDA_GRID,
        suffixes=("eos", "oracle"), seed=args.seed))
    rows += run_sweep(model, vocab, pairs, SweepSpec(
        policy="waitk", ks=(1, 2, 3, 5, 7), seed=args.seed))
    for r in rows:
        hr = f"{r.hr:.2f}" if r.hr is not None else "-"
        print(f"{r.policy:10} {r.lambda_or_k:>6} {r.suffix:>8} "
              f"{r.al:7.3f} {r.bleu:6.1f} {hr:>5}")


if __name__ == "__main__":
    main()
