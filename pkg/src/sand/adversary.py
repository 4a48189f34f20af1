"""Faulty-node strategies: scripted transmissions, reactive replays and the
attack constructions used in the impossibility arguments."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .deception import SnareReport, verify_witness
from .geometry import (
    LayoutSpec,
    Point,
    RadioParams,
    as_point,
    expected_rss_from_claim,
    in_range,
    range_of,
    receives,
    rss_at,
    rss_matches,
    within,
)
from .protocol import Message, announce, confirm, conflict


class StrategyError(ValueError):
    pass


class InfeasibleConstruction(StrategyError):
    """The requested attack geometry cannot exist for these parameters."""


@dataclass(frozen=True)
class ScriptedTransmission:
    at_epoch: int
    leader: Point
    tss: float
    message: Message

    def __post_init__(self):
        if not (math.isfinite(self.tss) and self.tss > 0):
            raise StrategyError(f"tss must be positive, got {self.tss!r}")
        object.__setattr__(self, "leader", as_point(self.leader))

    def to_dict(self) -> dict:
        return {"at_epoch": self.at_epoch, "leader": self.leader.to_list(), "tss": self.tss, "message": self.message.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScriptedTransmission":
        return cls(int(d["at_epoch"]), as_point(d["leader"]), float(d["tss"]), Message.from_dict(d["message"]))


def schedule_to_json(schedule) -> str:
    return json.dumps([st.to_dict() for st in schedule], sort_keys=True, indent=2) + "\n"


def schedule_from_json(text: str) -> list[ScriptedTransmission]:
    return [ScriptedTransmission.from_dict(d) for d in json.loads(text)]


def impersonate_tss(params: RadioParams, f, target, victim) -> float:
    """TSS at which ``f`` makes ``target`` measure what a T_r broadcast from ``victim`` would give."""
    f, target, victim = as_point(f), as_point(target), as_point(victim)
    if len({f, target, victim}) < 3:
        raise StrategyError("f, target and victim must be distinct")
    uf, uw = f.dist(target), victim.dist(target)
    if min(uf, uw, f.dist(victim)) < params.r_min_sep:
        raise StrategyError("degenerate distances")
    return params.t_r * uf * uf / (uw * uw)


def _check_lands(params: RadioParams, st: ScriptedTransmission, target: Point):
    rss = rss_at(params, st.tss, st.leader, target)
    if not rss_matches(rss, expected_rss_from_claim(params, st.message.sender, target)):
        raise StrategyError("transmission does not reproduce the claimed RSS at the target")


def fabricate_universe(layout: LayoutSpec, f, fictitious, target, at_epoch: int = 0) -> list[ScriptedTransmission]:
    """Announces for fictitious identities plus every cross-confirm among them, all tuned for ``target``."""
    f, target = as_point(f), as_point(target)
    p = layout.params
    if not layout.is_faulty(f):
        raise StrategyError(f"{f} is not a faulty node of the layout")
    ids = [as_point(k) for k in fictitious]
    real = set(layout.positions)
    for k in ids:
        if k in real:
            raise StrategyError(f"fictitious point {k} coincides with a real node")
        if not within(k.dist(target), p.d_n):
            raise StrategyError(f"fictitious point {k} is beyond d_n of the target")
    anns = {k: announce(k) for k in ids}
    out = [ScriptedTransmission(at_epoch, f, impersonate_tss(p, f, target, k), anns[k]) for k in ids]
    for a in ids:
        for b in ids:
            if a != b:
                out.append(ScriptedTransmission(at_epoch, f, impersonate_tss(p, f, target, b), confirm(b, anns[a])))
    for st in out:
        _check_lands(p, st, target)
    return out


def snare_broadcast(layout: LayoutSpec, report: SnareReport, message: Message, at_epoch: int = 0) -> list[ScriptedTransmission]:
    """One transmission per retinue leader so every member hears ``message`` from the snare point."""
    if not report.retinues:
        return []
    if not verify_witness(layout, report):
        raise StrategyError("snare report does not match this layout")
    msg = message if message.sender == report.snare_point else message.with_sender(report.snare_point)
    out = []
    for ret in report.retinues:
        st = ScriptedTransmission(at_epoch, ret.leader, report.tss_witness[ret.leader], msg)
        for m in ret.members:
            _check_lands(layout.params, st, m)
        out.append(st)
    return out


def spurious_conflict(f, about: Message, target, params: RadioParams, claimed=None, at_epoch: int = 0) -> ScriptedTransmission:
    """A conflict about ``about`` whose claimed sender is ``f`` itself or ``claimed``."""
    f, target = as_point(f), as_point(target)
    claimed = f if claimed is None else as_point(claimed)
    tss = params.t_r if claimed == f else impersonate_tss(params, f, target, claimed)
    return ScriptedTransmission(at_epoch, f, tss, conflict(claimed, about))


# -- runtime strategies ----------------------------------------------------

class Strategy:
    """A faulty node's behavior during a run.

    ``initial`` feeds the injection queue, ``follow_up`` lets a strategy
    queue more after each of its injections, ``react`` fires synchronously
    on every transmission in the network.
    """

    kind = "silent"

    def initial(self) -> list[ScriptedTransmission]:
        return []

    def follow_up(self, st: ScriptedTransmission) -> list[ScriptedTransmission]:
        return []

    def react(self, sender: Point, message: Message, epoch: int) -> list[ScriptedTransmission]:
        return []

    def leaders(self) -> set[Point]:
        return set()

    def to_dict(self) -> dict:
        return {"kind": self.kind}


class Silent(Strategy):
    kind = "silent"


@dataclass
class Scripted(Strategy):
    schedule: list = field(default_factory=list)
    kind: str = "scripted"

    def initial(self):
        return list(self.schedule)

    def leaders(self):
        return {st.leader for st in self.schedule}

    def to_dict(self):
        return {"kind": self.kind, "schedule": [st.to_dict() for st in self.schedule]}


@dataclass
class Flood(Strategy):
    """Announces a fresh fictitious payload every ``period`` epochs, forever."""

    leader: Point
    claimed: Point
    tss: float
    period: int = 1
    kind: str = "flood"

    def initial(self):
        return [ScriptedTransmission(0, self.leader, self.tss, announce(self.claimed, "0"))]

    def follow_up(self, st):
        n = int(st.message.payload) + 1
        return [ScriptedTransmission(st.at_epoch + self.period, self.leader, self.tss, announce(self.claimed, str(n)))]

    def leaders(self):
        return {as_point(self.leader)}

    def to_dict(self):
        return {"kind": self.kind, "leader": list(self.leader), "claimed": list(self.claimed), "tss": self.tss}


@dataclass
class DiscreditRule(Strategy):
    """Whenever ``trigger`` transmits, ``leader`` replays the content at ``tss``."""

    leader: Point
    trigger: Point
    tss: float
    kind: str = "discredit"

    def react(self, sender, message, epoch):
        if sender == self.trigger and message.sender == self.trigger:
            return [ScriptedTransmission(epoch, self.leader, self.tss, message)]
        return []

    def leaders(self):
        return {as_point(self.leader)}

    def to_dict(self):
        return {"kind": self.kind, "leader": list(self.leader), "trigger": list(self.trigger), "tss": self.tss}


def discredit_schedule(layout: LayoutSpec, f2, victim_k, observer_v, reference_f1) -> DiscreditRule:
    """Replay rule that makes ``observer_v`` see ``victim_k``'s messages as if sent from ``reference_f1``.

    Refuses when any correct node other than the observer would hear the
    replica, since it would expose ``f2``.
    """
    p = layout.params
    f2, k, v, f1 = (as_point(x) for x in (f2, victim_k, observer_v, reference_f1))
    vf1, vf2 = v.dist(f1), v.dist(f2)
    if min(vf1, vf2) < p.r_min_sep:
        raise StrategyError("degenerate distances")
    tss = p.t_r * vf2 * vf2 / (vf1 * vf1)
    if not receives(p, tss, f2, v):
        raise StrategyError("observer would not hear the replica")
    clearance = range_of(p, tss)
    for w in layout.correct:
        if w != v and receives(p, tss, f2, w):
            raise StrategyError(f"correct node {w} lies within the clearance radius {clearance:g} of {f2}")
    return DiscreditRule(f2, k, tss)


# -- scenario builders -----------------------------------------------------

@dataclass
class Scenario:
    """Two layouts a correct node cannot tell apart, plus the roles of the points."""

    l1: LayoutSpec
    l2: LayoutSpec
    roles: dict

    def __getitem__(self, name) -> Point:
        return self.roles[name]


def theorem1_pair(params: RadioParams) -> Scenario:
    """L1: correct u, v and a silent faulty f.  L2: u and f only; f plays v."""
    a = 0.8 * min(params.r_t, params.d_n)
    u, v, f = Point(0.0, 0.0), Point(a, 0.0), Point(0.0, -0.5 * a)
    l1 = LayoutSpec.build([u, v], [f], params)
    l2 = LayoutSpec.build([u], [f], params)
    return Scenario(l1, l2, {"u": u, "v": v, "f": f})


def theorem3_pair(params: RadioParams) -> Scenario:
    """Discredit construction.

    L2 has correct u, v, k and faulty f2, where v is out of k's range but
    still within d_n, and f2 replays k's traffic toward v. L1 replaces k by
    a fictitious identity broadcast by f1 at T_r from a point as far from u
    as k is. v then sees identical inboxes in both layouts.
    """
    R, D = params.r_t, params.d_n
    if not R < D * (1 - 1e-9):
        raise InfeasibleConstruction(
            f"need a correct node outside range but inside the neighborhood; impossible with r_t={R:g} >= d_n={D:g}"
        )
    a = min(D, 1.1 * R)
    v, k = Point(0.0, 0.0), Point(a, 0.0)
    u = Point(a / 2, 0.2 * R)
    rho = u.dist(k)
    # f1 on the circle around u through k and v, at distance R/2 from v
    half = math.asin(min(1.0, 0.25 * R / rho))
    base = math.atan2(v.y - u.y, v.x - u.x)
    ang = base - 2 * half
    f1 = Point(u.x + rho * math.cos(ang), u.y + rho * math.sin(ang))
    f2 = Point(-0.1 * R, 0.0)
    l1 = LayoutSpec.build([u, v], [f1], params)
    l2 = LayoutSpec.build([u, v, k], [f2], params)
    sc = Scenario(l1, l2, {"u": u, "v": v, "k": k, "f1": f1, "f2": f2})
    checks = [
        (R < v.dist(k) and within(v.dist(k), D), "v must be outside k's range but within d_n"),
        (in_range(params, u, k) and in_range(params, u, v), "u must hear k and v"),
        (abs(u.dist(f1) - u.dist(k)) <= 1e-12 * rho, "f1 must be as far from u as k"),
        (v.dist(f1) < R, "v must hear f1"),
    ]
    for ok, why in checks:
        if not ok:
            raise InfeasibleConstruction(why)
    discredit_schedule(l2, f2, k, v, f1)
    return sc
