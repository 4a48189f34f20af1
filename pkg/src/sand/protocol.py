"""SAND node logic: announce/confirm/conflict handling, DEP graph, universes."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import networkx as nx

from .geometry import (
    LayoutSpec,
    Point,
    RadioParams,
    as_point,
    expected_rss_from_claim,
    in_range,
    rss_matches,
    within,
)

DEFAULT_UNIVERSE_CAP = 64


class Kind(str, enum.Enum):
    ANNOUNCE = "announce"
    CONFIRM = "confirm"
    CONFLICT = "conflict"


class Verdict(str, enum.Enum):
    IGNORE = "ignore"
    CONSISTENT = "consistent"
    EXPLICIT = "explicit"


class UniverseContractError(RuntimeError):
    """A detector pointed at a set that is not conflict-free."""


class Message:
    """Immutable protocol message; equality is structural (kind, sender, payload, original).

    ``sender`` is the *claimed* origin. The hash is cached because messages
    nest and are used heavily as dict keys.
    """

    __slots__ = ("kind", "sender", "original", "payload", "_key", "_hash")

    def __init__(self, kind: Kind, sender, original: "Message | None" = None, payload: str = ""):
        kind = Kind(kind)
        if (kind is Kind.ANNOUNCE) != (original is None):
            raise ValueError("original is required exactly for confirm and conflict")
        if kind is Kind.CONFIRM and original.kind is not Kind.ANNOUNCE:
            raise ValueError("a confirm can only attach an announce")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "sender", as_point(sender))
        object.__setattr__(self, "original", original)
        object.__setattr__(self, "payload", payload)
        key = (kind.value, self.sender, payload, original._key if original is not None else None)
        object.__setattr__(self, "_key", key)
        object.__setattr__(self, "_hash", hash(key))

    def __setattr__(self, name, value):
        raise AttributeError("Message is immutable")

    def __eq__(self, other):
        return isinstance(other, Message) and self._hash == other._hash and self._key == other._key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = f", {self.original!r}" if self.original is not None else ""
        return f"{self.kind.value}({self.sender.x:g},{self.sender.y:g}{inner})"

    def chain(self) -> list["Message"]:
        out, m = [], self
        while m is not None:
            out.append(m)
            m = m.original
        return out

    def with_sender(self, sender) -> "Message":
        return Message(self.kind, sender, self.original, self.payload)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "sender": self.sender.to_list(), "payload": self.payload}
        if self.original is not None:
            d["original"] = self.original.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Message":
        orig = cls.from_dict(d["original"]) if d.get("original") else None
        return cls(Kind(d["kind"]), as_point(d["sender"]), orig, d.get("payload", ""))


def announce(sender, payload: str = "") -> Message:
    return Message(Kind.ANNOUNCE, sender, None, payload)


def confirm(sender, original: Message) -> Message:
    return Message(Kind.CONFIRM, sender, original)


def conflict(sender, original: Message) -> Message:
    return Message(Kind.CONFLICT, sender, original)


@dataclass(frozen=True)
class ReceivedRecord:
    message: Message
    rss: float
    index: int = 0


@dataclass(frozen=True)
class ConflictRecord:
    subject: Message
    kind: str  # "explicit" | "implicit"
    observer: Point


# -- DEP graph -------------------------------------------------------------

def prune_graph(kinds: dict, edges: Iterable[tuple]) -> set:
    """Surviving vertices of a dependency digraph.

    ``kinds`` maps vertex -> Kind, ``edges`` are (dependent, original)
    pairs. Vertices on cycles go first, then non-announce sinks are peeled
    until none remain. Generic over vertex type so it can be exercised on
    hand-built graphs.
    """
    g = nx.DiGraph()
    g.add_nodes_from(kinds)
    g.add_edges_from((a, b) for a, b in edges if a in kinds and b in kinds)
    for comp in list(nx.strongly_connected_components(g)):
        if len(comp) > 1 or any(g.has_edge(v, v) for v in comp):
            g.remove_nodes_from(comp)
    stack = [v for v in g if g.out_degree(v) == 0 and kinds[v] is not Kind.ANNOUNCE]
    while stack:
        v = stack.pop()
        if v not in g:
            continue
        preds = list(g.predecessors(v))
        g.remove_node(v)
        stack.extend(p for p in preds if g.out_degree(p) == 0 and kinds[p] is not Kind.ANNOUNCE)
    return set(g.nodes)


class DepGraph:
    """Message dependency graph with merged identical messages.

    Every received message becomes a vertex; a confirm or conflict survives
    only while its attached original is present and itself survives.
    Pruned vertices are kept as tombstones and revive if the missing
    original shows up later.
    """

    def __init__(self):
        self.order: dict[Message, int] = {}
        self.alive: set[Message] = set()
        self._waiting: dict[Message, list[Message]] = {}

    def __contains__(self, m: Message) -> bool:
        return m in self.alive

    def __len__(self):
        return len(self.alive)

    @property
    def vertices(self) -> list[Message]:
        return [m for m in self.order if m in self.alive]

    @property
    def tombstones(self) -> list[Message]:
        return [m for m in self.order if m not in self.alive]

    def edges(self) -> list[tuple[Message, Message]]:
        return [(m, m.original) for m in self.vertices if m.original is not None]

    def add(self, m: Message) -> bool:
        """Insert ``m``; returns True when the surviving set changed."""
        if m in self.order:
            return False
        self.order[m] = len(self.order)
        if m.kind is Kind.ANNOUNCE or m.original in self.alive:
            self._revive(m)
            return True
        self._waiting.setdefault(m.original, []).append(m)
        return False

    def _revive(self, m: Message):
        todo = [m]
        while todo:
            v = todo.pop()
            self.alive.add(v)
            todo.extend(self._waiting.pop(v, ()))

    @classmethod
    def rebuild(cls, messages: Iterable[Message]) -> "DepGraph":
        """Batch construction through ``prune_graph``; must agree with incremental ``add``."""
        dep = cls()
        for m in messages:
            if m not in dep.order:
                dep.order[m] = len(dep.order)
        kinds = {m: m.kind for m in dep.order}
        dep.alive = prune_graph(kinds, [(m, m.original) for m in dep.order if m.original is not None])
        for m in dep.order:
            if m not in dep.alive:
                dep._waiting.setdefault(m.original, []).append(m)
        return dep

    def announced(self) -> list[Point]:
        seen = []
        for m in self.vertices:
            if m.kind is Kind.ANNOUNCE and m.sender not in seen:
                seen.append(m.sender)
        return seen

    def confirm_pairs(self) -> set[tuple[Point, Point]]:
        """(confirmer, announcer) pairs present among surviving confirms."""
        return {(m.sender, m.original.sender) for m in self.vertices if m.kind is Kind.CONFIRM}

    def to_dict(self) -> dict:
        return {
            "vertices": [m.to_dict() for m in self.vertices],
            "tombstones": [m.to_dict() for m in self.tombstones],
        }


def dep_update(dep: DepGraph, rec: ReceivedRecord) -> DepGraph:
    dep.add(rec.message)
    return dep


# -- universes -------------------------------------------------------------

@dataclass
class UniverseSet:
    identities: frozenset
    excluded: frozenset
    graph: nx.Graph
    universes: list[frozenset] | None
    overflow: bool = False


def conflict_graph(dep: DepGraph, conflicts: Iterable[ConflictRecord], me: Point, params: RadioParams):
    """Identities announced within ``d_n``, self-excluded ones, and the peer-conflict graph."""
    ids = frozenset(p for p in dep.announced() if p != me and within(me.dist(p), params.d_n))
    distrusted = set()
    excluded = set()
    for c in conflicts:
        distrusted.add(c.subject)
        excluded.add(c.subject.sender)
    g = nx.Graph()
    g.add_nodes_from(ids)
    for m in dep.vertices:
        if m.kind is not Kind.CONFLICT or m in distrusted:
            continue
        a, b = m.sender, m.original.sender
        if a == b:
            excluded.add(a)
        elif a in ids and b in ids:
            g.add_edge(a, b)
    return ids, frozenset(excluded & ids), g


def maximal_independent_sets(g: nx.Graph, vertices: Iterable) -> list[frozenset]:
    sub = g.subgraph(vertices)
    # conflict-free vertices belong to every universe; enumerate the rest
    free = frozenset(v for v in sub if sub.degree(v) == 0)
    rest = [v for v in sub if v not in free]
    if not rest:
        return [free]
    h = nx.complement(sub.subgraph(rest))
    out = [free | frozenset(c) for c in nx.find_cliques(h)]
    return sorted(out, key=lambda s: sorted(s))


def universes_from(
    dep: DepGraph,
    conflicts: Iterable[ConflictRecord],
    me: Point,
    params: RadioParams,
    cap: int = DEFAULT_UNIVERSE_CAP,
) -> UniverseSet:
    ids, excluded, g = conflict_graph(dep, conflicts, me, params)
    if len(ids) > cap:
        return UniverseSet(ids, excluded, g, None, overflow=True)
    return UniverseSet(ids, excluded, g, maximal_independent_sets(g, ids - excluded))


def is_conflict_free(us: UniverseSet, s) -> bool:
    s = set(s)
    if not s <= us.identities or s & us.excluded:
        return False
    return not any(us.graph.has_edge(a, b) for a in s for b in s if a != b)


# -- node state machine ----------------------------------------------------

@dataclass
class NodeState:
    pos: Point
    params: RadioParams
    cap: int = DEFAULT_UNIVERSE_CAP
    inbox: list[ReceivedRecord] = field(default_factory=list)
    processed: int = 0
    heard: set = field(default_factory=set)
    dep: DepGraph = field(default_factory=DepGraph)
    conflicts: dict = field(default_factory=dict)
    emitted: set = field(default_factory=set)
    announced: bool = False
    outbox: deque = field(default_factory=deque)
    detector_pointer: frozenset | None = None
    output: frozenset | None = None
    last_activity: int = 0
    # epochs of silence before a missing original turns into an implicit
    # conflict; 0 raises it on the spot
    implicit_grace: int = 0
    suspicions: dict = field(default_factory=dict)
    last_delivery: int = 0
    _universes: UniverseSet | None = None

    def deliver(self, message: Message, rss: float, epoch: int = 0) -> ReceivedRecord:
        """Physical receipt: append to the inbox, processing happens later."""
        rec = ReceivedRecord(message, rss, len(self.inbox))
        self.inbox.append(rec)
        self.heard.add(message)
        self.suspicions.pop(message, None)
        self.last_delivery = max(self.last_delivery, epoch)
        return rec

    def suspicion_due(self) -> int | None:
        """Epoch at which outstanding suspicions may be resolved, if any."""
        if not self.suspicions:
            return None
        return max(self.last_delivery, max(self.suspicions.values())) + self.implicit_grace

    @property
    def pending(self) -> int:
        return len(self.inbox) - self.processed

    def universes(self) -> UniverseSet:
        if self._universes is None:
            self._universes = universes_from(self.dep, self.conflicts.values(), self.pos, self.params, self.cap)
        return self._universes

    def conflict_records(self) -> list[ConflictRecord]:
        return list(self.conflicts.values())

    def snapshot(self) -> dict:
        us = self.universes()
        return {
            "pos": self.pos.to_list(),
            "dep": self.dep.to_dict(),
            "conflicts": [
                {"kind": c.kind, "subject": c.subject.to_dict()} for c in self.conflicts.values()
            ],
            "universes": None if us.universes is None else [sorted(p.to_list() for p in u) for u in us.universes],
            "output": None if self.output is None else sorted(p.to_list() for p in self.output),
        }


def on_init(state: NodeState) -> list[Message]:
    if state.announced:
        return []
    state.announced = True
    msg = announce(state.pos)
    state.emitted.add(msg)
    return [msg]


def classify_receipt(state: NodeState, rec: ReceivedRecord) -> Verdict:
    p = state.params
    msg = rec.message
    for m in msg.chain():
        if not within(state.pos.dist(m.sender), p.d_n):
            return Verdict.IGNORE
    if msg.sender == state.pos:
        # no self-receipt, so anything claiming our position is forged
        return Verdict.EXPLICIT
    expected = expected_rss_from_claim(p, msg.sender, state.pos)
    return Verdict.CONSISTENT if rss_matches(rec.rss, expected) else Verdict.EXPLICIT


def _record_conflict(state: NodeState, subject: Message, kind: str) -> list[Message]:
    if subject in state.conflicts:
        return []
    state.conflicts[subject] = ConflictRecord(subject, kind, state.pos)
    state._universes = None
    out = conflict(state.pos, subject)
    if out in state.emitted:
        return []
    state.emitted.add(out)
    return [out]


def on_receive(state: NodeState, rec: ReceivedRecord, epoch: int = 0) -> list[Message]:
    verdict = classify_receipt(state, rec)
    if verdict is Verdict.IGNORE:
        return []
    msg = rec.message
    before = len(state.dep)
    dep_update(state.dep, rec)
    if len(state.dep) != before:
        state._universes = None
    if msg.kind in (Kind.ANNOUNCE, Kind.CONFLICT) and msg not in state.emitted:
        state.last_activity = epoch
    if verdict is Verdict.EXPLICIT:
        state.last_activity = epoch
        return _record_conflict(state, msg, "explicit")
    if msg.kind is Kind.ANNOUNCE:
        out = confirm(state.pos, msg)
        if out in state.emitted:
            return []
        state.emitted.add(out)
        return [out]
    orig = msg.original
    if orig.sender != state.pos and orig not in state.heard and in_range(state.params, state.pos, orig.sender):
        state.last_activity = epoch
        if state.implicit_grace > 0:
            # the original may still be on its way; wait for a quiet spell
            if orig not in state.conflicts:
                state.suspicions.setdefault(orig, epoch)
            return []
        return _record_conflict(state, orig, "implicit")
    return []


def resolve_suspicions(state: NodeState, epoch: int) -> list[Message]:
    """Turn suspicions into implicit conflicts once the node has been quiet long enough."""
    due = state.suspicion_due()
    if due is None or state.pending or epoch < due:
        return []
    out = []
    for orig in list(state.suspicions):
        del state.suspicions[orig]
        if orig not in state.heard:
            out += _record_conflict(state, orig, "implicit")
    if out:
        state.last_activity = epoch
    return out


def adopt_detector_output(state: NodeState, pointed) -> NodeState:
    if pointed is None:
        state.detector_pointer = None
        state.output = None
        return state
    pointed = frozenset(as_point(p) for p in pointed)
    if not is_conflict_free(state.universes(), pointed):
        raise UniverseContractError(f"detector pointed at a set with conflicts: {sorted(pointed)}")
    state.detector_pointer = pointed
    state.output = pointed
    return state


def new_node(pos, params: RadioParams, cap: int = DEFAULT_UNIVERSE_CAP) -> NodeState:
    return NodeState(as_point(pos), params, cap)


def ground_truth(layout: LayoutSpec, u: Point) -> frozenset:
    return layout.correct_neighbors(u)
