"""CLT values from the DP engine against the G-normal reference from the PDE solver.

    python3 scripts/run_compare.py scripts/configs/two_rademacher.json --out results/compare
"""

import argparse
import sys
from pathlib import Path

from sublim.cli import main


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config", type=Path, nargs="?", default=Path(__file__).parent / "configs" / "two_rademacher.json")
    p.add_argument("--out", type=Path, default=Path("results") / "compare")
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    sys.exit(main(["compare", str(args.config), "-o", str(args.out)]))
