#!/usr/bin/env python3
"""Effect of the prefix-to-full mixing ratio on prefix competence.

Trains one bidirectional micro model per mixing ratio on the copy language
(identical seeds and step counts) and reports the mean next-token NLL when
conditioning on half-length source prefixes: the desk-scale version of the
ratio ablation. Ratio 0 is plain offline training.

Usage: python scripts/p2f_benefit.py [--ratios 0,0.2,0.5,0.8,1.0]
"""

import argparse

from simtkit import MicroModel, SyntheticSpec, TrainConfig, generate_corpus, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ratios", default="0,0.2,0.5,0.8,1.0")
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--seed", type=int, default=4)
    args = ap.parse_args()
    ratios = [float(x) for x in args.ratios.split(",")]

    vocab, pairs, _ = generate_corpus(SyntheticSpec(
        kind="copy", vocab_size=11, n_range=(4, 7), n_pairs=200, seed=1))
    _, eval_pairs, _ = generate_corpus(SyntheticSpec(
        kind="copy", vocab_size=11, n_range=(4, 7), n_pairs=50, seed=99))

    def half_prefix_nll(model):
        total = count = 0
        for pair in eval_pairs:
            l = (len(pair.source) + 1) // 2
            nlls = model.sentence_nlls(pair.source[:l], pair.target)
            total += float(nlls.sum())
            count += len(nlls)
        return total / count

    def full_nll(model):
        total = count = 0
        for pair in eval_pairs:
            nlls = model.sentence_nlls(pair.source, pair.target)
            total += float(nlls.sum())
            count += len(nlls)
        return total / count

    print(f"{'ratio':>6} {'half-prefix NLL':>16} {'full-source NLL':>16}")
    for ratio in ratios:
        model = MicroModel(vocab, d=32, max_len=16, mode="BIDIRECTIONAL",
                           seed=args.seed)
        train(model, pairs, TrainConfig(regime="p2f", ratio_r=ratio,
                                        epochs=args.epochs, batch_size=16,
                                        lr=0.5, seed=args.seed))
        print(f"{ratio:>6} {half_prefix_nll(model):>16.4f} {full_nll(model):>16.4f}")


if __name__ == "__main__":
    main()
