"""Replicated comparison of the three estimators on the synthetic task.

Each replicate trains on 100 of 1000 points and scores the other 900.  The
full protocol uses 50 replicates; pass a count on the command line, e.g.
``python demos/synthetic_comparison.py 50``.
"""
import sys

from gpvine.experiments import synthetic_protocol

replicates = int(sys.argv[1]) if len(sys.argv) > 1 else 5
result = synthetic_protocol(replicates=replicates, seed=0)
for row in result.table():
    print(f"{row['estimator']:8s} trees={row['trees']}  {row['mean']:+.4f} +/- {row['sd']:.4f}")
for a, b, p in result.pvalues():
    print(f"wilcoxon {a} vs {b}: p = {p if isinstance(p, str) else format(p, '.3g')}")
