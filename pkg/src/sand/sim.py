"""Deterministic asynchronous scheduler for SAND runs.

A transmission is physically received the moment it is sent (inbox
insertion at every node whose measured RSS reaches R_min); processing the
inbox is a separate action that the scheduler interleaves freely. One
atomic action runs per epoch.
"""

from __future__ import annotations

import heapq
import json
import random
from pathlib import Path

from .adversary import ScriptedTransmission, Strategy
from .detectors import Detector, DetectorInput
from .geometry import LayoutSpec, Point, as_point, receives, rss_at
from .protocol import DEFAULT_UNIVERSE_CAP, Message, adopt_detector_output, classify_receipt, new_node, on_init, on_receive, resolve_suspicions

SNDP = "SNDP"
WNDP = "WNDP"
EVENTUAL_NDP = "EventualNDP"
VARIANTS = (SNDP, WNDP, EVENTUAL_NDP)


class SchedulerError(RuntimeError):
    pass


def _pts(s) -> list | None:
    return None if s is None else sorted(p.to_list() for p in s)


# -- policies --------------------------------------------------------------

class Policy:
    """Picks one candidate action per epoch; fairness is enforced by the world."""

    kind = "round_robin"

    def choose(self, world: "World", cands: list[tuple]) -> tuple:
        raise NotImplementedError


class RoundRobin(Policy):
    kind = "round_robin"

    def __init__(self):
        self.turn = 0

    def choose(self, world, cands):
        c = cands[self.turn % len(cands)]
        self.turn += 1
        return c


class SeededRandom(Policy):
    kind = "seeded_random"

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def choose(self, world, cands):
        return cands[self.rng.randrange(len(cands))]


class AdversarialDelay(Policy):
    """Adversary first, then the most recently enabled action; old work starves until forced."""

    kind = "adversarial_delay"

    def choose(self, world, cands):
        for c in cands:
            if c[0] == "adv":
                return c
        return max(cands, key=lambda c: (world.since.get(c, -1), world.order_key(c)))


class ScriptedPolicy(Policy):
    """Replays an explicit list of steps, then falls back to ``after``."""

    kind = "scripted"

    def __init__(self, steps: list[tuple], epochs: list[int] | None = None, after: Policy | None = None):
        self.steps = list(steps)
        self.epochs = list(epochs) if epochs is not None else None
        self.i = 0
        self.after = after or RoundRobin()

    @property
    def exhausted(self) -> bool:
        return self.i >= len(self.steps)

    def next_epoch(self) -> int | None:
        if self.epochs is None or self.exhausted:
            return None
        return self.epochs[self.i]

    def choose(self, world, cands):
        if self.exhausted:
            return self.after.choose(world, cands)
        step = self.steps[self.i]
        self.i += 1
        return step


def make_policy(kind: str, seed: int = 0) -> Policy:
    if kind == "round_robin":
        return RoundRobin()
    if kind == "seeded_random":
        return SeededRandom(seed)
    if kind == "adversarial_delay":
        return AdversarialDelay()
    raise SchedulerError(f"unknown policy {kind!r}")


# -- world -----------------------------------------------------------------

class World:
    """Layout, per-node protocol state, adversaries and the trace of one run."""

    def __init__(
        self,
        layout: LayoutSpec,
        detector: Detector | None = None,
        strategies: list[Strategy] = (),
        policy: Policy | None = None,
        fairness: int | None = None,
        cap: int = DEFAULT_UNIVERSE_CAP,
        full_trace: bool = True,
        implicit_grace: int | None = None,
    ):
        self.layout = layout
        self.params = layout.params
        self.detector = detector
        self.strategies = list(strategies)
        self.policy = policy or RoundRobin()
        self.fairness = fairness or max(4 * len(layout.nodes), 4)
        self.full_trace = full_trace
        self.epoch = 0
        self.trace: list[dict] = []
        self.steps: list[tuple] = []
        self.step_epochs: list[int] = []
        self.nodes = {p: new_node(p, self.params, cap) for p in layout.correct}
        # a correct original reaches us within two fairness bounds (process, then send)
        self.implicit_grace = 2 * self.fairness if implicit_grace is None else implicit_grace
        for st in self.nodes.values():
            st.implicit_grace = self.implicit_grace
        self.order = {p: i for i, p in enumerate(layout.correct)}
        self.since: dict[tuple, int] = {}
        self.max_wait = 0
        self.timers: dict[Point, int] = {}
        self._heap: list = []
        self._seq = 0
        self.quiesced = False
        faulty = set(layout.faulty)
        for s in self.strategies:
            for ld in s.leaders():
                if ld not in faulty:
                    raise SchedulerError(f"strategy leader {ld} is not a faulty node")
            for st in s.initial():
                self._push(st)
        for p, st in self.nodes.items():
            st.outbox.extend(on_init(st))
            self._log("init", p, {"emitted": 1})
            self.since[("tx", p)] = 0
        # a node that never hears anything still consults its detector
        for p in self.nodes:
            self._refresh(p)

    # bookkeeping

    def _log(self, kind, node, payload, essential=False):
        if self.full_trace or essential:
            self.trace.append({"epoch": self.epoch, "kind": kind, "node": None if node is None else list(node), "payload": payload})

    def _push(self, st: ScriptedTransmission):
        heapq.heappush(self._heap, (st.at_epoch, self._seq, st))
        self._seq += 1

    def order_key(self, c) -> tuple:
        kinds = {"adv": 0, "tx": 1, "proc": 2, "timer": 3}
        return (kinds[c[0]], self.order.get(c[1], -1) if len(c) > 1 else -1)

    def candidates(self) -> list[tuple]:
        out = []
        if self._heap and self._heap[0][0] <= self.epoch:
            out.append(("adv",))
        for p, st in self.nodes.items():
            if st.outbox:
                out.append(("tx", p))
            if st.pending:
                out.append(("proc", p))
        for p, t in self.timers.items():
            if t <= self.epoch:
                out.append(("timer", p))
        return out

    def correct_enabled(self) -> bool:
        return any(st.outbox or st.pending for st in self.nodes.values())

    def scripting(self) -> bool:
        return isinstance(self.policy, ScriptedPolicy) and not self.policy.exhausted

    def is_quiescent(self) -> bool:
        return not self.scripting() and not self.correct_enabled() and not self._heap and not self.timers

    def _forced(self) -> tuple | None:
        """Oldest correct-node action if waiting any longer could break the fairness bound."""
        waiting = sorted((since, self.order_key(a), a) for a, since in self.since.items())
        for i, (since, _, _) in enumerate(waiting):
            if self.fairness - (self.epoch - since) <= i + 1:
                return waiting[0][2]
        return None

    # actions

    def transmit(self, sender: Point, tss: float, msg: Message, by: str):
        self._log("transmit", sender, {"by": by, "msg": msg.to_dict(), "tss": tss})
        for p, st in self.nodes.items():
            if p == sender or not receives(self.params, tss, sender, p):
                continue
            rss = rss_at(self.params, tss, sender, p)
            rec = st.deliver(msg, rss, self.epoch)
            self.since.setdefault(("proc", p), self.epoch)
            self._log("deliver", p, {"index": rec.index, "rss": rss})
        for s in self.strategies:
            for st in s.react(sender, msg, self.epoch):
                self.transmit(st.leader, st.tss, st.message, "reaction")

    def _inject(self, st: ScriptedTransmission, strategy_queue: bool):
        if not self.layout.is_faulty(st.leader):
            raise SchedulerError(f"injection from non-faulty {st.leader}")
        self.transmit(st.leader, st.tss, st.message, "adversary")
        if strategy_queue:
            for s in self.strategies:
                for nxt in s.follow_up(st):
                    self._push(nxt)

    def _refresh(self, p: Point):
        st = self.nodes[p]
        due = None if st.pending else st.suspicion_due()
        if self.detector is None:
            self._set_timer(p, due)
            return
        inp = DetectorInput.of(st, self.epoch)
        before = st.output
        ptr = self.detector(inp)
        if ptr != st.detector_pointer:
            self._log("detector", p, {"pointer": _pts(ptr)}, essential=True)
        adopt_detector_output(st, ptr)
        if st.output != before:
            self._log("output", p, {"output": _pts(st.output)}, essential=True)
        wake = self.detector.wake_at(inp)
        if wake is not None and wake <= self.epoch:
            wake = None
        self._set_timer(p, min((w for w in (wake, due) if w is not None), default=None))

    def _set_timer(self, p: Point, at: int | None):
        if at is None:
            self.timers.pop(p, None)
        else:
            self.timers[p] = max(at, self.epoch + 1)

    def _run_correct(self, kind: str, p: Point):
        st = self.nodes[p]
        key = (kind, p)
        self.max_wait = max(self.max_wait, self.epoch - self.since.pop(key))
        if kind == "tx":
            msg = st.outbox.popleft()
            self.steps.append(("tx", p, msg))
            self.transmit(p, self.params.t_r, msg, "correct")
            if st.outbox:
                self.since[key] = self.epoch + 1
            return
        rec = st.inbox[st.processed]
        verdict = classify_receipt(st, rec)
        emitted = on_receive(st, rec, self.epoch)
        st.processed += 1
        self.steps.append(("proc", p))
        self._log("process", p, {"class": verdict.value, "emitted": len(emitted), "index": rec.index})
        if emitted:
            st.outbox.extend(emitted)
            self.since.setdefault(("tx", p), self.epoch + 1)
        if st.pending:
            self.since[key] = self.epoch + 1
        self._refresh(p)

    def execute(self, action: tuple):
        kind = action[0]
        self.step_epochs.append(self.epoch)
        if kind in ("tx", "proc"):
            p = as_point(action[1])
            st = self.nodes.get(p)
            if st is None or (kind == "tx" and not st.outbox) or (kind == "proc" and not st.pending):
                raise SchedulerError(f"action {kind} at {p} is not enabled at epoch {self.epoch}")
            self._run_correct(kind, p)
        elif kind == "adv":
            if len(action) > 1:
                self.steps.append(("adv", action[1]))
                self._inject(action[1], strategy_queue=False)
            else:
                if not self._heap or self._heap[0][0] > self.epoch:
                    raise SchedulerError("no adversary injection is due")
                st = heapq.heappop(self._heap)[2]
                self.steps.append(("adv", st))
                self._inject(st, strategy_queue=True)
        elif kind == "timer":
            p = as_point(action[1])
            self.timers.pop(p, None)
            self.steps.append(("timer", p))
            st = self.nodes[p]
            emitted = resolve_suspicions(st, self.epoch)
            self._log("timer", p, {"emitted": len(emitted)})
            if emitted:
                st.outbox.extend(emitted)
                self.since.setdefault(("tx", p), self.epoch + 1)
            self._refresh(p)
        elif kind == "idle":
            self.steps.append(("idle",))
        else:
            raise SchedulerError(f"unknown action {action!r}")
        self.epoch += 1

    def step(self):
        if self.scripting():
            e = self.policy.next_epoch()
            if e is not None:
                self.epoch = max(self.epoch, e)
            self.execute(self.policy.choose(self, []))
            return self
        cands = self.candidates()
        if not cands:
            nxt = [self._heap[0][0]] if self._heap else []
            nxt += list(self.timers.values())
            if not nxt:
                raise SchedulerError("no enabled action: the run is complete")
            self.epoch = max(self.epoch, min(nxt))
            cands = self.candidates()
        forced = self._forced()
        self.execute(forced if forced is not None else self.policy.choose(self, cands))
        return self

    def inbox_of(self, p) -> list[tuple]:
        return [(r.message, r.rss) for r in self.nodes[as_point(p)].inbox]

    def outputs(self) -> dict:
        return {p: st.output for p, st in self.nodes.items()}

    def finish(self):
        self._log("end", None, {"max_wait": self.max_wait, "quiesced": self.quiesced}, essential=True)


def step(world: World) -> World:
    return world.step()


def run_until_quiescent(world: World, max_epochs: int = 100_000) -> tuple[World, bool]:
    if max_epochs <= 0:
        raise ValueError("max_epochs must be positive")
    while world.epoch < max_epochs:
        if world.is_quiescent():
            world.quiesced = True
            break
        world.step()
    else:
        world.quiesced = world.is_quiescent()
    world.finish()
    return world, world.quiesced


# -- trace export and checks -------------------------------------------------

def dump_event(ev: dict) -> str:
    return json.dumps(ev, sort_keys=True, separators=(",", ":"))


def trace_jsonl(trace: list[dict]) -> str:
    return "".join(dump_event(ev) + "\n" for ev in trace)


def write_trace(trace: list[dict], path) -> None:
    Path(path).write_text(trace_jsonl(trace))


def read_trace(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line]


def check_problem(trace: list[dict], layout: LayoutSpec, variant: str = SNDP) -> dict:
    """Per-node verdicts on safety and liveness for one problem variant."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    truth = {u: layout.correct_neighbors(u) for u in layout.correct}
    outputs: dict[Point, list] = {u: [] for u in truth}
    quiesced, end_epoch = False, None
    for ev in trace:
        if ev["kind"] == "output":
            out = ev["payload"]["output"]
            outputs[as_point(ev["node"])].append(None if out is None else frozenset(as_point(p) for p in out))
        elif ev["kind"] == "end":
            quiesced, end_epoch = ev["payload"]["quiesced"], ev["epoch"]
    res = {}
    for u, gt in truth.items():
        outs = outputs[u]
        final = outs[-1] if outs else None
        produced = [o for o in outs if o is not None]
        if variant == SNDP:
            bad = [o for o in produced if o != gt]
        elif variant == WNDP:
            bad = [o for o in produced if not o <= gt]
        else:
            bad = [final] if quiesced and final is not None and final != gt else []
        if quiesced:
            live = final == gt
        else:
            live = "inconclusive"
        seen = final or frozenset()
        res[u] = {
            "safety": not bad,
            "liveness": live,
            "missing": _pts(gt - seen) if final is not None or quiesced else [],
            "extra": _pts(set().union(*bad) - gt) if bad else [],
            "output": _pts(final),
        }
    return {"variant": variant, "quiesced": quiesced, "end_epoch": end_epoch, "nodes": res}


def verdict_passes(v: dict) -> bool | None:
    """True if all nodes pass, False on any failure, None if only liveness is undecided."""
    nodes = v["nodes"].values()
    if any(not n["safety"] or n["liveness"] is False for n in nodes):
        return False
    if any(n["liveness"] == "inconclusive" for n in nodes):
        return None
    return True


def audit_fairness(trace: list[dict], bound: int) -> list[str]:
    """Recompute how long each correct-node action stayed enabled, from a full trace."""
    backlog: dict[tuple, int] = {}
    since: dict[tuple, int] = {}
    bad = []

    def enable(key, epoch):
        backlog[key] = backlog.get(key, 0) + 1
        since.setdefault(key, epoch)

    def run(key, epoch):
        if epoch - since[key] > bound:
            bad.append(f"{key} waited {epoch - since[key]} epochs at {epoch}")
        backlog[key] -= 1
        del since[key]
        if backlog[key]:
            since[key] = epoch + 1

    for ev in trace:
        k, e = ev["kind"], ev["epoch"]
        node = tuple(ev["node"]) if ev["node"] is not None else None
        if k == "init":
            enable(("tx", node), e)
        elif k == "deliver":
            enable(("proc", node), e)
        elif k == "process":
            run(("proc", node), e)
            for _ in range(ev["payload"]["emitted"]):
                enable(("tx", node), e + 1)
        elif k == "timer":
            for _ in range(ev["payload"].get("emitted", 0)):
                enable(("tx", node), e + 1)
        elif k == "transmit" and ev["payload"]["by"] == "correct":
            run(("tx", node), e)
    return bad


def audit_delivery(trace: list[dict], layout: LayoutSpec) -> list[str]:
    """Each transmission must be followed by deliveries at exactly the receiving correct nodes."""
    p = layout.params
    bad = []
    i = 0
    while i < len(trace):
        ev = trace[i]
        if ev["kind"] != "transmit":
            i += 1
            continue
        sender, tss = as_point(ev["node"]), ev["payload"]["tss"]
        want = {q for q in layout.correct if q != sender and receives(p, tss, sender, q)}
        got = set()
        j = i + 1
        while j < len(trace) and trace[j]["kind"] == "deliver":
            got.add(as_point(trace[j]["node"]))
            j += 1
        if got != want:
            bad.append(f"epoch {ev['epoch']}: delivered to {sorted(got)}, expected {sorted(want)}")
        i = j
    return bad


def ground_truth(layout: LayoutSpec) -> dict:
    return {u: layout.correct_neighbors(u) for u in layout.correct}


# -- replays ---------------------------------------------------------------

def substitute_steps(steps: list[tuple], keep: set, impersonate: dict) -> list[tuple]:
    """Rewrite a step list for a sibling layout.

    Steps by nodes in ``keep`` stay; transmissions by a node listed in
    ``impersonate`` (node -> (leader, tss)) become adversary injections;
    anything else becomes an idle step so epochs stay aligned.
    """
    out = []
    for s in steps:
        if s[0] in ("tx", "proc", "timer") and s[1] in keep:
            out.append(s)
        elif s[0] == "tx" and s[1] in impersonate:
            leader, tss = impersonate[s[1]]
            out.append(("adv", ScriptedTransmission(0, leader, tss, s[2])))
        else:
            out.append(("idle",))
    return out
