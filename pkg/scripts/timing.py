"""Time fit + 10-fold CV of the three-feature model over a range of sample sizes."""

import argparse
import time

import numpy as np

from hcrspread.basis import enumerate_basis
from hcrspread.evaluation import cross_validate, make_folds
from hcrspread.model import fit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 2000, 5000, 20000])
    ap.add_argument("--basis-x", default="B((4,4,4),5,3)")
    ap.add_argument("--basis-y", default="B((8),8,1)")
    args = ap.parse_args()
    bx, by = enumerate_basis(args.basis_x), enumerate_basis(args.basis_y)
    rng = np.random.default_rng(0)
    print(f"|B_X|={len(bx)}  moments={len(by) - 1}")
    for n in args.sizes:
        x, y = rng.random((n, bx.dimension)), rng.random(n)
        t0 = time.perf_counter()
        fit(bx, by, x, y)
        cross_validate(x, y, bx, by, make_folds(n, 10, 0))
        print(f"n={n:6d}  {time.perf_counter() - t0:.3f}s")


if __name__ == "__main__":
    main()
