"""Classify every entry of the golden corpus and print a verdict table.

    python3 scripts/run_golden.py [--write problems/]
"""

import argparse
import json
import time
from pathlib import Path

from blochlab.bloch import BlochParams
from blochlab.operators import SymbolPair, classify
from blochlab.suites import GOLDEN


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--write", help="also write each entry as a problem file into this directory")
    args = ap.parse_args()
    if args.write:
        out = Path(args.write)
        out.mkdir(parents=True, exist_ok=True)
        for case in GOLDEN:
            name = case.label.replace(" ", "_").replace("/", "-").replace("=", "")
            (out / f"{name}.json").write_text(json.dumps(case.problem(), indent=2) + "\n")

    print(f"{'case':24s} {'expected':24s} {'got':24s} {'sup A':>10s} {'sup B':>10s} {'time':>6s}")
    for case in GOLDEN:
        t = time.perf_counter()
        pair = SymbolPair.build(case.psi, list(case.phi), case.n)
        cls = classify(pair, BlochParams(case.p, case.q, case.n))
        got = f"{cls.bounded.value}/{cls.compact.value}"
        mark = "" if got == f"{case.bounded}/{case.compact}" else "  <-- differs"
        print(
            f"{case.label:24s} {case.bounded + '/' + case.compact:24s} {got:24s} "
            f"{cls.sup_A.value:10.4g} {cls.sup_B.value:10.4g} {time.perf_counter() - t:6.2f}{mark}"
        )


if __name__ == "__main__":
    main()
