"""Universe detectors: a ground-truth oracle and four concrete selection rules.

A detector sees what its node has collected (announced identities, the
conflict graph, DEP) and may point at one universe. The node then outputs
that universe unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import Point, RadioParams, as_point, within
from .protocol import DepGraph, NodeState, UniverseSet, is_conflict_free

SPU = "SPU"
WPU = "WPU"
EVENTUAL = "EventuallyPU"


class DetectorConfigError(ValueError):
    pass


@dataclass
class DetectorInput:
    me: Point
    params: RadioParams
    universes: UniverseSet
    dep: DepGraph
    epoch: int
    last_activity: int
    pending: int

    @classmethod
    def of(cls, state: NodeState, epoch: int) -> "DetectorInput":
        return cls(state.pos, state.params, state.universes(), state.dep, epoch, state.last_activity, state.pending)

    @property
    def quiet_for(self) -> int:
        return self.epoch - self.last_activity


def _is_maximal(us: UniverseSet, s: frozenset) -> bool:
    free = us.identities - us.excluded - s
    return not any(all(not us.graph.has_edge(w, v) for v in s) for w in free)


def derivable(us: UniverseSet, s: frozenset) -> bool:
    """Is ``s`` one of the universes (works without enumeration under overflow)."""
    if us.universes is not None:
        return s in us.universes
    return is_conflict_free(us, s) and _is_maximal(us, s)


class Detector:
    contract = SPU
    name = "detector"
    settle = 0

    def __call__(self, inp: DetectorInput) -> frozenset | None:
        raise NotImplementedError

    def wake_at(self, inp: DetectorInput) -> int | None:
        """Epoch at which a re-query could change the answer with no new input."""
        if self.settle and inp.pending == 0 and inp.quiet_for < self.settle:
            return inp.last_activity + self.settle
        return None

    def settled(self, inp: DetectorInput) -> bool:
        return inp.pending == 0 and inp.quiet_for >= self.settle


class OracleDetector(Detector):
    """Points at the exact correct-neighbor set whenever the node can derive it."""

    contract = SPU
    name = "oracle"

    def __init__(self, truth: dict):
        self.truth = {as_point(k): frozenset(as_point(p) for p in v) for k, v in truth.items()}

    def __call__(self, inp):
        gt = self.truth[inp.me]
        return gt if derivable(inp.universes, gt) else None


def _unique_largest(cands: list[frozenset]) -> frozenset | None:
    if not cands:
        return None
    best = max(len(c) for c in cands)
    top = [c for c in cands if len(c) == best]
    return top[0] if len(top) == 1 else None


def mutually_confirmed(inp: DetectorInput, u: frozenset) -> bool:
    """Every pair that should have heard each other has a confirm in DEP.

    A confirm from b about a is expected when a and b are within range and
    neighborhood of each other and we are in range of b.
    """
    p = inp.params
    pairs = inp.dep.confirm_pairs()
    lim = min(p.r_t, p.d_n)
    for a in u:
        for b in u:
            if a == b:
                continue
            if within(a.dist(b), lim) and within(inp.me.dist(b), p.r_t) and (b, a) not in pairs:
                return False
    return True


class QuiescenceDetector(Detector):
    contract = EVENTUAL
    name = "quiescence"

    def __init__(self, window: int):
        if window <= 0:
            raise DetectorConfigError("window must be positive")
        self.settle = int(window)

    def __call__(self, inp):
        if not self.settled(inp) or inp.universes.universes is None:
            return None
        return _unique_largest([u for u in inp.universes.universes if mutually_confirmed(inp, u)])


class TrustedSetDetector(Detector):
    contract = WPU
    name = "trusted"

    def __init__(self, trusted: dict, params: RadioParams, settle: int = 0):
        self.trusted = {}
        for me, ts in trusted.items():
            me = as_point(me)
            ts = frozenset(as_point(t) for t in ts)
            for t in ts:
                if not within(me.dist(t), params.d_n):
                    raise DetectorConfigError(f"trusted node {t} is beyond d_n of {me}")
            self.trusted[me] = ts
        self.settle = settle

    def __call__(self, inp):
        if not self.settled(inp):
            return None
        ts = self.trusted.get(inp.me, frozenset())
        us = inp.universes
        if us.universes is None:
            return None
        cands = [u for u in us.universes if ts <= u]
        return cands[0] if len(cands) == 1 else None


@dataclass(frozen=True)
class GridFamily:
    s: float
    origin: tuple = (0.0, 0.0)
    tol: float = 1e-6

    def on_lattice(self, p: Point) -> bool:
        for v, o in ((p.x, self.origin[0]), (p.y, self.origin[1])):
            q = (v - o) / self.s
            if abs(q - round(q)) > self.tol:
                return False
        return True


@dataclass(frozen=True)
class PointSetFamily:
    """An explicit deployment plan: the positions nodes may occupy."""

    points: frozenset
    tol: float = 1e-6

    def on_lattice(self, p: Point) -> bool:
        return any(p.dist(q) <= self.tol for q in self.points)


class TopologyDetector(Detector):
    contract = EVENTUAL
    name = "topology"

    def __init__(self, family: GridFamily, settle: int = 0):
        self.family = family
        self.settle = settle

    def __call__(self, inp):
        if not self.settled(inp) or not self.family.on_lattice(inp.me):
            return None
        us = inp.universes
        if us.universes is None:
            return None
        return _unique_largest([u for u in us.universes if all(self.family.on_lattice(p) for p in u)])


def make_detector(spec: dict, layout, settle: int):
    """Detector from a run-config block ``{"kind": ..., ...}``."""
    kind = spec.get("kind", "oracle")
    if kind == "oracle":
        return OracleDetector({u: layout.correct_neighbors(u) for u in layout.correct})
    if kind == "quiescence":
        return QuiescenceDetector(spec.get("window", settle))
    if kind == "trusted":
        trusted = spec.get("trusted", "nearest")
        if trusted == "nearest":
            n = int(spec.get("count", 1))
            tmap = {}
            for u in layout.correct:
                nb = sorted(layout.correct_neighbors(u), key=lambda v: (u.dist(v), v))
                tmap[u] = nb[:n]
        else:
            tmap = {as_point(e["node"]): [as_point(p) for p in e["trusted"]] for e in trusted}
        return TrustedSetDetector(tmap, layout.params, settle)
    if kind == "topology":
        if spec.get("family", "grid") == "plan":
            fam = PointSetFamily(frozenset(layout.positions))
        else:
            fam = GridFamily(float(spec.get("s", 1.0)), tuple(spec.get("origin", (0.0, 0.0))))
        return TopologyDetector(fam, settle)
    raise DetectorConfigError(f"unknown detector kind {kind!r}")


# -- trace audit -----------------------------------------------------------

def audit_contract(trace: list[dict], layout, contract: str) -> list[str]:
    """Check detector pointers in a finished trace against a class contract.

    Returns a list of violations (empty when the trace conforms). For SPU,
    every pointer must be the exact correct-neighbor set and, if the run
    quiesced, every node must hold a pointer at the end. WPU allows real
    but incomplete pointers. EventuallyPU only constrains the last pointer
    of a quiesced run.
    """
    truth = {u: layout.correct_neighbors(u) for u in layout.correct}
    last = {}
    bad = []
    quiesced = False
    for ev in trace:
        if ev["kind"] == "end":
            quiesced = ev["payload"]["quiesced"]
        if ev["kind"] != "detector":
            continue
        node = as_point(ev["node"])
        ptr = ev["payload"]["pointer"]
        ptr = None if ptr is None else frozenset(as_point(p) for p in ptr)
        last[node] = ptr
        if ptr is None:
            continue
        if contract == SPU and ptr != truth[node]:
            bad.append(f"epoch {ev['epoch']}: {node} pointed at a set other than its correct neighbors")
        elif contract == WPU and not ptr <= truth[node]:
            bad.append(f"epoch {ev['epoch']}: {node} pointed at a set with a fictitious or faulty identity")
    if quiesced and contract in (SPU, EVENTUAL):
        for u in layout.correct:
            if last.get(u) is not None and last[u] != truth[u]:
                bad.append(f"final pointer of {u} is wrong")
    return bad
