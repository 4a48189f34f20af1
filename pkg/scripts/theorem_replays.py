"""Replay the two indistinguishability constructions and report what the observer sees."""

from __future__ import annotations

import argparse

from sand.adversary import InfeasibleConstruction
from sand.geometry import RadioParams
from sand.scenarios import liveness_failures, theorem1_replay, theorem3_replay


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r-t", type=float, default=0.9)
    ap.add_argument("--d-n", type=float, default=1.0)
    args = ap.parse_args()
    p = RadioParams.with_range(args.r_t, args.d_n)

    r1 = theorem1_replay(p)
    u = r1.observer
    print("impersonation pair")
    print(f"  inboxes identical at u: {r1.inboxes_identical}")
    print(f"  output in L1: {sorted(r1.first.outputs()[u] or [])}")
    print(f"  output in L2: {sorted(r1.second.outputs()[u] or [])}  (v is absent from L2)")

    print("discredit pair")
    try:
        r3 = theorem3_replay(p)
    except InfeasibleConstruction as e:
        print(f"  infeasible: {e}")
        return
    v = r3.observer
    print(f"  inboxes identical at v: {r3.inboxes_identical}")
    print(f"  liveness failures with the real k: {liveness_failures(r3.second)}")


if __name__ == "__main__":
    main()
