"""Paired runs that replay one interleaving in two indistinguishable layouts."""

from __future__ import annotations

from dataclasses import dataclass

from .adversary import Scenario, discredit_schedule, impersonate_tss, theorem1_pair, theorem3_pair
from .detectors import Detector, OracleDetector, QuiescenceDetector
from .geometry import RadioParams
from .sim import Policy, RoundRobin, ScriptedPolicy, World, check_problem, run_until_quiescent, substitute_steps, trace_jsonl


@dataclass
class Replay:
    scenario: Scenario
    first: World
    second: World
    observer: object

    def inbox_lines(self, world: World) -> str:
        return trace_jsonl([{"msg": m.to_dict(), "rss": r} for m, r in world.inbox_of(self.observer)])

    @property
    def inboxes_identical(self) -> bool:
        return self.inbox_lines(self.first) == self.inbox_lines(self.second)


def _truth(layout):
    return {u: layout.correct_neighbors(u) for u in layout.correct}


def theorem1_replay(params: RadioParams, detector: str = "quiescence", policy: Policy | None = None, max_epochs: int = 10_000) -> Replay:
    """Run L1 (u, v correct) freely, then make f replay v's transmissions toward u in L2."""
    sc = theorem1_pair(params)
    u, v, f = sc["u"], sc["v"], sc["f"]

    def det(layout) -> Detector:
        return QuiescenceDetector(4 * len(sc.l1.nodes)) if detector == "quiescence" else OracleDetector(_truth(layout))

    w1 = World(sc.l1, det(sc.l1), policy=policy or RoundRobin())
    run_until_quiescent(w1, max_epochs)
    steps = substitute_steps(w1.steps, {u}, {v: (f, impersonate_tss(params, f, u, v))})
    w2 = World(sc.l2, det(sc.l2), policy=ScriptedPolicy(steps, w1.step_epochs), fairness=10**9, implicit_grace=w1.implicit_grace)
    run_until_quiescent(w2, max_epochs)
    return Replay(sc, w1, w2, u)


def theorem3_replay(params: RadioParams, policy: Policy | None = None, max_epochs: int = 10_000) -> Replay:
    """L2 runs with the discredit rule; L1 replays it with f1 speaking for a fictitious k.

    Raises InfeasibleConstruction when the geometry cannot exist.
    """
    sc = theorem3_pair(params)
    u, v, k, f1, f2 = (sc[n] for n in ("u", "v", "k", "f1", "f2"))
    rule = discredit_schedule(sc.l2, f2, k, v, f1)
    w2 = World(sc.l2, OracleDetector(_truth(sc.l2)), [rule], policy=policy or RoundRobin())
    run_until_quiescent(w2, max_epochs)
    steps = substitute_steps(w2.steps, {u, v}, {k: (f1, params.t_r)})
    w1 = World(sc.l1, OracleDetector(_truth(sc.l1)), policy=ScriptedPolicy(steps, w2.step_epochs), fairness=10**9, implicit_grace=w2.implicit_grace)
    run_until_quiescent(w1, max_epochs)
    return Replay(sc, w1, w2, v)


def liveness_failures(world: World) -> dict:
    v = check_problem(world.trace, world.layout)
    return {u: n["missing"] for u, n in v["nodes"].items() if n["liveness"] is not True}
