"""Sweep the education coefficient beta_E and write a plot-ready TSV."""
import argparse
import sys

from orthofair.datagen import LoanParams
from orthofair.experiments import LOAN_METHODS, beta_sweep, rows_to_tsv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", default="0,0.25,0.5,0.75,1")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--methods", default=",".join(LOAN_METHODS))
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    rows = beta_sweep([float(g) for g in args.grid.split(",")], LoanParams(),
                      methods=args.methods.split(","), seeds=args.seeds)
    tsv = rows_to_tsv(rows)
    if args.out == "-":
        sys.stdout.write(tsv)
    else:
        with open(args.out, "w") as fh:
            fh.write(tsv)


if __name__ == "__main__":
    main()
