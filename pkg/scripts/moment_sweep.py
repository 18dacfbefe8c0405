"""CV log-likelihood against the number of predicted moments on synthetic data."""

import argparse

import numpy as np

from hcrspread.basis import enumerate_basis
from hcrspread.evaluation import make_folds
from hcrspread.selection import sweep_moments
from hcrspread.synthetic import sample_conditional


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--max-moments", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    terms = [(0.5, 1, (1, 0)), (0.3, 2, (0, 1)), (0.2, 3, (1, 1))]
    x, y = sample_conditional(rng, args.n, 2, terms)
    result = sweep_moments(x, y, enumerate_basis("B((3,3),4,2)"), args.max_moments,
                           make_folds(args.n, 10, args.seed), min_moments=0)
    for desc, q, p, ll in result.grid:
        print(f"{desc:>16s}  moments={q:2d}  features={p:3d}  ll={ll:+.4f}")
    desc, q, _, ll = result.best()
    print(f"best: {q} moments, ll={ll:+.4f}")
    if args.csv:
        result.write_csv(args.csv)


if __name__ == "__main__":
    main()
