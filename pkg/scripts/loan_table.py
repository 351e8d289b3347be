"""Loan experiment averaged over seeds: mean (std) per method and metric."""
import argparse
from dataclasses import replace

import numpy as np

from orthofair.datagen import LoanParams
from orthofair.experiments import LOAN_METHODS, run_loan

METRICS = ("acc", "auc", "cf_metric", "eo_gap", "aa_gap")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--beta-e", type=float, default=None)
    args = ap.parse_args()

    base = LoanParams(n=args.n)
    if args.beta_e is not None:
        base = replace(base, beta_E=args.beta_e)
    runs = [run_loan(replace(base, seed=s)) for s in range(args.seeds)]
    print("method\t" + "\t".join(METRICS))
    for m in LOAN_METHODS:
        cells = []
        for metric in METRICS:
            v = np.array([r[m][metric] for r in runs])
            cells.append(f"{v.mean():.4f} ({v.std(ddof=1) if v.size > 1 else 0:.4f})")
        print(m + "\t" + "\t".join(cells))


if __name__ == "__main__":
    main()
