"""Snare census for the 3x3 grid across neighborhood distances and fault sets."""

from __future__ import annotations

import argparse
import math

from sand.deception import PERFECT, find_snares
from sand.geometry import RadioParams
from sand.layouts import grid_layout, label


def census(d_n: float, faulty: list[int], resolution: float) -> dict:
    lay = grid_layout(3, 3, 1.0, RadioParams.with_range(d_n, d_n), faulty=faulty)
    out = {}
    for u in lay.correct:
        reps = find_snares(lay, u, resolution)
        if reps:
            out[label(lay, u)] = (sum(r.kind == PERFECT for r in reps), len(reps))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=float, default=0.02)
    args = ap.parse_args()
    cases = [
        ("sparse, corner fault", 1.2, [0]),
        ("sparse, center fault", 1.2, [4]),
        ("dense, single fault", 1.45, [0]),
        ("dense, single fault", 1.45, [1]),
        ("d_n = sqrt 2", math.sqrt(2), [3]),
        ("two faults u1,u4", 1.5, [0, 3]),
    ]
    for name, d_n, faulty in cases:
        hits = census(d_n, faulty, args.resolution)
        faults = ",".join(f"u{i + 1}" for i in faulty)
        print(f"{name:22s} d_n={d_n:.3f} faults={faults:6s} -> " + (", ".join(f"{k}: {p} perfect / {n}" for k, (p, n) in hits.items()) or "snare-free"))


if __name__ == "__main__":
    main()
