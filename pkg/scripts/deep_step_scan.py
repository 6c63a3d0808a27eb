"""Measure the obstruction at the first step not covered by the general argument (n = k - 8).

    python scripts/deep_step_scan.py --metrics 20 --k 8 9 10 --seed 0
"""
import argparse
import json
import sys

import numpy as np

from torus_integrals.cascade import run_cascade
from torus_integrals.fourier_field import TorusLattice, random_metric


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--metrics", type=int, default=20)
    ap.add_argument("--k", type=int, nargs="+", default=[8, 9, 10])
    ap.add_argument("--band", type=int, default=3)
    ap.add_argument("--amplitude", type=float, default=0.6)
    ap.add_argument("--N", type=int, default=48, help="lattice band limit (products grow the band)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    lat = TorusLattice(N=args.N)
    metrics = [random_metric(rng, lat, args.band, args.amplitude) for _ in range(args.metrics)]
    rows = []
    for k in args.k:
        rel = []
        trunc = []
        for g in metrics:
            rep = run_cascade(g, k, 1.0, tol=np.inf)
            rel.append(rep.relative[k - 8])
            trunc.append(max(rep.truncation.values()))
        rows.append({"k": k, "step": k - 8, "max_relative": max(rel), "median_relative": float(np.median(rel)),
                     "max_truncation": max(trunc)})
    if args.json:
        json.dump(rows, sys.stdout, indent=2, sort_keys=True)
        print()
        return
    print(f"{'k':>3} {'n':>3} {'max rel':>10} {'median rel':>11} {'truncation':>11}")
    for r in rows:
        print(f"{r['k']:>3} {r['step']:>3} {r['max_relative']:>10.2e} {r['median_relative']:>11.2e} "
              f"{r['max_truncation']:>11.2e}")


if __name__ == "__main__":
    main()
