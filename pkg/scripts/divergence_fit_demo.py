"""Shell profiles and fitted growth exponents for (1 - |z|^2)^(-a).

    python3 scripts/divergence_fit_demo.py
"""

import numpy as np

from blochlab.sampling import SampleBudget, estimate_sup


def main():
    budget = SampleBudget(base_count=100_000)
    for a in (0.0, 0.05, 0.2, 0.5, 1.0, 2.0):
        est = estimate_sup(lambda Z, a=a: (1 - np.abs(Z[:, 0]) ** 2) ** -a, 1, budget)
        expo = "-" if est.growth_exponent is None else f"{est.growth_exponent:.4f}"
        print(f"a = {a:4.2f}  {est.divergence.value:12s} exponent {expo}")
    est = estimate_sup(lambda Z: np.log(4 / (1 - np.abs(Z[:, 0]) ** 2)), 1, budget)
    print(f"ln(4/(1-|z|^2))  {est.divergence.value:12s} exponent {est.growth_exponent:.4f}")
    print("shell  delta_high        sup")
    for s in est.shell_sups:
        print(f"{s.index:5d}  {s.delta_high:10.3e}  {s.sup:9.4f}")


if __name__ == "__main__":
    main()
