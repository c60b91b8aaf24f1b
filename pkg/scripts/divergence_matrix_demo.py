#!/usr/bin/env python3
"""Print a divergence matrix and its thresholded read/write staircase.

The tail-first language makes the lookahead structure visible: the first
target token stays undecidable (high divergence) until the last content
token has been read.

Usage: python scripts/divergence_matrix_demo.py [--lambda 0.2]
"""

import argparse

from simtkit import OracleSuffix, SyntheticSpec, divergence_matrix, generate_corpus, threshold_path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lambda", dest="lam", type=float, default=0.2)
    ap.add_argument("--n", type=int, default=7, help="sentence length incl. EOS")
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    vocab, pairs, model = generate_corpus(SyntheticSpec(
        kind="tail_first", vocab_size=9, n_range=(args.n, args.n),
        n_pairs=1, seed=args.seed))
    pair = pairs[0]
    mat = divergence_matrix(model, vocab, pair, OracleSuffix())
    path = dict((t, g) for t, g in threshold_path(mat, args.lam))

    n = len(pair.source)
    print("source: ", " ".join(vocab.token(i) for i in pair.source))
    print("target: ", " ".join(vocab.token(i) for i in pair.target))
    print()
    print(f"{'':>8}" + "".join(f"{g:>8}" for g in range(1, n + 1)))
    for ti in range(len(pair.target)):
        label = vocab.token(pair.target[ti])
        cells = []
        for g in range(1, n + 1):
            mark = "*" if path.get(ti + 1) == g else " "
            cells.append(f"{mat.values[ti, g - 1]:7.3f}{mark}")
        print(f"{label:>8}" + "".join(cells))
    print(f"\n* = write cell on the lambda={args.lam} staircase")


if __name__ == "__main__":
    main()
