"""Ratio ||W f_w||_q / ||f_w||_p along a radial sweep of the parameter w.

For the identity map from B^1 into B^q with q < 1 the ratio grows like
(1 - |w|^2)^(q - 1); the fitted exponent is printed at the end.

    python3 scripts/lower_bound_sweep.py [--q 0.5] [--kind FW_P1]
"""

import argparse

import numpy as np

from blochlab.bloch import bloch_norm
from blochlab.operators import ComposedFunction, SymbolPair
from blochlab.sampling import SampleBudget
from blochlab.testfn import FamilyKind, TestFamily, budget_for, make_test_function


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--q", type=float, default=0.5)
    ap.add_argument("--kind", default="FW_P1")
    args = ap.parse_args()
    pair = SymbolPair.build("1", ["z1"], 1)
    base = SampleBudget(base_count=20_000, refine_rounds=2)
    ws = 1 - np.logspace(-1, -4, 10)
    ratios = []
    print(f"{'|w|':>10s} {'||f||_1':>12s} {'||Wf||_q':>12s} {'ratio':>10s}")
    for w in ws:
        f = make_test_function(TestFamily(FamilyKind(args.kind), w), 1)
        b = budget_for(w, base)
        nf = bloch_norm(f, 1.0, b).norm
        nW = bloch_norm(ComposedFunction(pair, f), args.q, b).norm
        ratios.append(nW / nf)
        print(f"{w:10.6f} {nf:12.5g} {nW:12.5g} {nW / nf:10.4g}")
    slope = np.polyfit(np.log(1 - ws**2), np.log(ratios), 1)[0]
    print(f"fitted exponent of (1-|w|^2): {slope:.3f}  (expected {args.q - 1:.3f})")


if __name__ == "__main__":
    main()
