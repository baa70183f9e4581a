"""Error of the DP value against u(1, 0) as n and the volatility interval vary.

Writes one CSV per test function with columns sigma_max_sq,n,dp,pde,abs_err
and prints the fitted log-log slope of the error per row group.
"""

import argparse
import math
from pathlib import Path

import numpy as np

from sublim.cli import compare_rows
from sublim.clt import GridConfig, StepFamily, TestFunction
from sublim.measures import rademacher
from sublim.pde import PdeConfig

FUNCTIONS = {
    "cos": TestFunction(np.cos, 1.0, 1.0, "cos"),
    "tanh": TestFunction(np.tanh, 1.0, 1.0, "tanh"),
    "abs5": TestFunction(lambda x: np.clip(np.abs(x), 0, 5), 5.0, 1.0, "abs5"),
}


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scales", type=float, nargs="+", default=[1.0, 1.5, 2.0], help="upper Rademacher scale")
    p.add_argument("--n", type=int, nargs="+", default=[4, 8, 16, 32, 64, 128, 256])
    p.add_argument("--dx", type=float, default=0.01)
    p.add_argument("--out", type=Path, default=Path("results") / "convergence")
    return p.parse_args()


def main():
    args = parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, phi in FUNCTIONS.items():
        lines = ["sigma_max_sq,n,dp,pde,abs_err"]
        for scale in args.scales:
            F = StepFamily([rademacher(1.0), rademacher(scale)])
            half = math.ceil((8 * scale + 4) / args.dx) * args.dx
            rows = compare_rows(F, phi, args.n, GridConfig(args.dx), PdeConfig(half, args.dx))
            lines += [f"{scale**2:.12g},{n},{a:.12g},{b:.12g},{e:.12g}" for n, a, b, e in rows]
            errs = np.array([e for *_, e in rows])
            keep = errs > 0
            slope = np.polyfit(np.log(np.array(args.n)[keep]), np.log(errs[keep]), 1)[0] if keep.sum() > 1 else float("nan")
            print(f"{name:5s} sigma_max^2={scale**2:<5g} final_err={errs[-1]:.2e} loglog_slope={slope:+.2f}")
        (args.out / f"{name}.csv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
