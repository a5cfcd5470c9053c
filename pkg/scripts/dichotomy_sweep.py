#!/usr/bin/env python3
"""Classify seeded random rational points as conical or parabolic and write a CSV.

    python3 scripts/dichotomy_sweep.py --spec specs/malnormal_cyclic.spec --count 50 --out dichotomy.csv

Exits non-zero if any point is left unclassified.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from modules.dynamics import UNCLASSIFIED, classify_point, random_rational_point
from modules.experiments import fold_collection
from modules.export import write_csv
from modules.specfile import parse_spec


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--spec", required=True)
    parser.add_argument("--count", type=int, default=50)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--imax", type=int, default=8)
    parser.add_argument("--depth", type=int, default=32)
    parser.add_argument("--out", default="dichotomy.csv")
    args = parser.parse_args()

    config = parse_spec(Path(args.spec).read_text(encoding="utf-8"))
    seed = config.seed if args.seed is None else args.seed
    collection = fold_collection(config)
    rng = np.random.default_rng(seed)
    points = [random_rational_point(rng, config.group.rank) for _ in range(args.count)]
    print(f"Classifying {len(points)} point(s) with seed {seed}...")

    rows = []
    for i, x in enumerate(points, 1):
        result = classify_point(x, collection, args.imax, args.depth)
        rows.append((str(x), result.kind, result.reason))
        print(f"  [{i}/{len(points)}] {x}: {result.kind}")

    write_csv(args.out, ("point", "kind", "reason"), rows)
    unclassified = sum(1 for r in rows if r[1] == UNCLASSIFIED)
    print(f"Done. {unclassified} unclassified.")
    return 1 if unclassified else 0


if __name__ == "__main__":
    sys.exit(main())
