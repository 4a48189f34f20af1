"""SAND on seeded snare-free layouts against the adversary mix, with the oracle detector."""

from __future__ import annotations

import argparse

from sand.detectors import make_detector
from sand.sim import World, check_problem, make_policy, run_until_quiescent, verdict_passes
from sand.workloads import SnareFreeFamily, attack_mix

KINDS = ["fabricate", "spurious", "silent"]
POLICIES = ["round_robin", "seeded_random", "adversarial_delay"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--layouts", type=int, default=20)
    ap.add_argument("--unverified", action="store_true", help="let fabricated identities sit anywhere near the target")
    args = ap.parse_args()
    fam = SnareFreeFamily()
    passed = 0
    for i, (seed, lay) in enumerate(fam.layouts(args.layouts)):
        kind = KINDS[i % 3]
        w = World(lay, make_detector({"kind": "oracle"}, lay, 0), attack_mix(lay, seed, kind, not args.unverified),
                  make_policy(POLICIES[i % 3], seed), full_trace=False)
        run_until_quiescent(w)
        ok = bool(verdict_passes(check_problem(w.trace, lay)))
        passed += ok
        print(f"seed {seed:3d}  {kind:9s}  {POLICIES[i % 3]:17s}  epochs {w.epoch:5d}  {'ok' if ok else 'FAIL'}")
    print(f"{passed}/{args.layouts} runs pass")


if __name__ == "__main__":
    main()
