"""Write a synthetic multi-entity market CSV usable as pipeline input."""

import argparse

import numpy as np

from hcrspread.synthetic import market_table, write_market_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    ap.add_argument("--entities", type=int, default=4)
    ap.add_argument("--rows", type=int, default=2500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tab", action="store_true")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    # alternate the sign of the price effect so grouping has two regimes to find
    tables = {f"E{i:02d}": market_table(rng, args.rows, price_effect=0.6 if i % 2 else -0.6)
              for i in range(args.entities)}
    write_market_csv(args.out, tables, "\t" if args.tab else ",")
    print(f"wrote {args.entities} entities x {args.rows} rows to {args.out}")


if __name__ == "__main__":
    main()
