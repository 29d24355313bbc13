#!/usr/bin/env python3
"""Run the whole pipeline on a small synthetic market and print the plan.

Usage: python scripts/demo_pipeline.py [OUT_DIR]
"""

import csv
import sys
from pathlib import Path

from freshplan import cli

REDUCED = [
    "synth.products=12", "synth.days=200", "tcn.channels=8", "train.epochs=20",
    "bootstrap.replicas=8", "bootstrap.epochs=10", "topsis.top_k=6",
    "ga.pop=60", "ga.gens=120",
]


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
    flags = [f for key in REDUCED for f in ("--set", key)]
    code = cli.run([*flags, "--seed", "7", "--out", str(out), "run-all", "--baseline", "random"])
    if code != 0:
        sys.exit(code)
    with open(out / "plan.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    print(f"\nplan for {len(rows)} products (weekly):")
    print(f"{'product':<10}{'price':>10}{'alloc kg':>12}{'sales kg':>12}{'profit':>12}")
    for r in rows:
        print(f"{r['product_id']:<10}{float(r['price']):>10.2f}"
              f"{float(r['allocation']):>12.1f}{float(r['expected_sales']):>12.1f}"
              f"{float(r['expected_profit']):>12.1f}")
    total = sum(float(r["expected_profit"]) for r in rows)
    print(f"{'total':<10}{'':>34}{total:>12.1f}")
    print(f"\nartifacts in {out}/")


if __name__ == "__main__":
    main()
