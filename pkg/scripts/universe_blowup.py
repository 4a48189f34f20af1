"""Universe count and enumeration time for m disjoint conflict pairs."""

from __future__ import annotations

import argparse
import time

from sand.geometry import Point, RadioParams
from sand.protocol import DepGraph, announce, conflict, universes_from


def pairs_dep(m: int) -> DepGraph:
    d = DepGraph()
    pts = [Point(0.01 * (i + 1), 0.01 * j) for i in range(m) for j in (1, 2)]
    for q in pts:
        d.add(announce(q))
    for i in range(m):
        d.add(conflict(pts[2 * i], announce(pts[2 * i + 1])))
    return d


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-pairs", type=int, default=14)
    ap.add_argument("--cap", type=int, default=64)
    args = ap.parse_args()
    p = RadioParams.with_range(10.0, 10.0)
    print(" m  identities  universes  seconds")
    for m in range(args.max_pairs + 1):
        t = time.perf_counter()
        us = universes_from(pairs_dep(m), [], Point(0.0, 0.0), p, cap=args.cap)
        n = "overflow" if us.overflow else str(len(us.universes))
        print(f"{m:2d}  {len(us.identities):10d}  {n:>9s}  {time.perf_counter() - t:.4f}")


if __name__ == "__main__":
    main()
