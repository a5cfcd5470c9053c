#!/usr/bin/env python3
"""Sweep D_emp against the ball radius and write a CSV.

    python3 scripts/sweep_bci.py --spec specs/malnormal_cyclic.spec --R 1 --radii 4 6 8 10 --out bci.csv

For a malnormal collection the column settles; for a non-malnormal one it
keeps growing.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from modules.experiments import fold_collection
from modules.export import write_csv
from modules.malnormal import bci_report
from modules.specfile import parse_spec


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--spec", required=True)
    parser.add_argument("--R", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--radii", type=int, nargs="+", default=[4, 6, 8, 10])
    parser.add_argument("--out", default="bci_sweep.csv")
    args = parser.parse_args()

    config = parse_spec(Path(args.spec).read_text(encoding="utf-8"))
    collection = fold_collection(config)
    print(f"Sweeping {len(collection)} subgroup(s) over R={args.R}, radii={args.radii}...")

    rows = []
    for R in args.R:
        previous = None
        for n in args.radii:
            if n < R:
                continue
            report = bci_report(collection, R, n)
            stable = previous is not None and previous == report.D_emp
            rows.append((R, n, report.D_emp, report.max_diameter, len(report.samples), report.empty_pairs, stable))
            print(f"  R={R} N={n}: D_emp={report.D_emp} ({len(report.samples)} non-empty pairs)")
            previous = report.D_emp

    count = write_csv(
        args.out,
        ("R", "ball_radius", "D_emp", "max_diameter", "nonempty_pairs", "empty_pairs", "same_as_previous"),
        rows,
    )
    print(f"Done. {count} row(s) written to {args.out}.")


if __name__ == "__main__":
    main()
