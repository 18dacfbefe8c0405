"""Build a merge tree over entities drawn from two planted conditional models."""

import argparse

import numpy as np

from hcrspread.basis import enumerate_basis
from hcrspread.grouping import ScoreParams, build_tree, cut_tree
from hcrspread.synthetic import sample_conditional


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--per-group", type=int, default=3)
    ap.add_argument("--n", type=int, default=1500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--cv", action="store_true")
    ap.add_argument("--json")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    data = {f"{g}{i}": sample_conditional(rng, args.n, 1, [(sign * 0.7, 1, (1,))])
            for g, sign in (("a", 1), ("b", -1)) for i in range(args.per_group)}
    tree = build_tree(data, enumerate_basis("B((2),2,1)"), enumerate_basis("B((3),3,1)"),
                      ScoreParams(cv=args.cv, seed=args.seed))
    for step, m in enumerate(tree.merges, 1):
        print(f"{step}: {'+'.join(m.left)} | {'+'.join(m.right)}  criterion={m.criterion:.4f}")
    print("k=2:", [sorted(c.members) for c in cut_tree(tree, 2)])
    if args.json:
        tree.write_json(args.json)


if __name__ == "__main__":
    main()
