"""Tabulate the MMM profit rate rho(a) on a grid for the built-in densities
and mark the fixed point.

    python3 scripts/profit_curve.py [OUT.csv]
"""

import csv
import sys

import numpy as np

from marketgames.mmm import GaussianDensity, UniformDensity, fixed_point_withdrawal, profit_rate

DENSITIES = {
    "gaussian": GaussianDensity(0.0, 1.0),
    "uniform": UniformDensity(-1.0, 1.0),
    "wide_gaussian": GaussianDensity(0.0, 2.0),
}


def main(out: str = "results/profit_curve.csv") -> None:
    grid = np.round(np.arange(0.0, 2.0 + 1e-9, 0.01), 10)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["density", "a", "rho"])
        for name, eta in DENSITIES.items():
            for a in grid:
                w.writerow([name, f"{a:.12g}", f"{profit_rate(eta, a):.12g}"])
            a_max = fixed_point_withdrawal(eta)
            print(f"{name:<14} a_max = {a_max:.10f}  rho(a_max) = {profit_rate(eta, a_max):.10f}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
