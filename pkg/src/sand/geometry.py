"""Points, layouts and the free-space radio model.

All received-signal-strength arithmetic in the package goes through the
functions here, so that the simulator, the conflict checks and the
deception analysis agree bit-for-bit on every RSS value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

# Relative tolerance for RSS comparisons. Absorbs float rounding only.
EPS_R = 1e-9


class DegenerateDistanceError(ValueError):
    """Sender and receiver closer than the minimum separation."""


class LayoutError(ValueError):
    pass


class Point(NamedTuple):
    x: float
    y: float

    def dist(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def to_list(self) -> list[float]:
        return [float(self.x), float(self.y)]


def as_point(p) -> Point:
    if isinstance(p, Point):
        return p
    x, y = p
    return Point(float(x), float(y))


class Role(str, enum.Enum):
    CORRECT = "correct"
    FAULTY = "faulty"


@dataclass(frozen=True)
class RadioParams:
    """Free-space radio parameters.

    ``c`` propagation constant, ``t_r`` the fixed TSS of correct nodes,
    ``r_min`` minimum receivable RSS, ``d_n`` neighborhood distance and
    ``r_min_sep`` the smallest sender/receiver separation the model admits
    (defaults to ``1e-6 * d_n``).
    """

    c: float = 1.0
    t_r: float = 1.0
    r_min: float = 1.0
    d_n: float = 1.0
    r_min_sep: float | None = None

    def __post_init__(self):
        for name in ("c", "t_r", "r_min", "d_n"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if self.r_min_sep is None:
            object.__setattr__(self, "r_min_sep", 1e-6 * self.d_n)
        elif not (math.isfinite(self.r_min_sep) and self.r_min_sep > 0):
            raise ValueError("r_min_sep must be positive")
        if not math.isfinite(self.r_t):
            raise ValueError("derived range is not finite")

    @property
    def r_t(self) -> float:
        return math.sqrt(self.c * self.t_r / self.r_min)

    @classmethod
    def with_range(cls, r_t: float, d_n: float, c: float = 1.0, r_min: float = 1.0, **kw) -> "RadioParams":
        """Params whose correct-node range is ``r_t``."""
        return cls(c=c, t_r=r_min * r_t * r_t / c, r_min=r_min, d_n=d_n, **kw)

    def to_dict(self) -> dict:
        return {"c": self.c, "t_r": self.t_r, "r_min": self.r_min, "d_n": self.d_n, "r_min_sep": self.r_min_sep}


@dataclass(frozen=True)
class Node:
    pos: Point
    role: Role = Role.CORRECT

    @property
    def faulty(self) -> bool:
        return self.role is Role.FAULTY


@dataclass(frozen=True)
class LayoutSpec:
    """A fixed set of nodes on the plane plus the radio parameters."""

    nodes: tuple[Node, ...]
    params: RadioParams = field(default_factory=RadioParams)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        pts = [n.pos for n in self.nodes]
        for p in pts:
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise LayoutError(f"non-finite coordinate {p}")
        if len(set(pts)) != len(pts):
            raise LayoutError("two nodes share a point")
        sep = self.params.r_min_sep
        # sort-and-sweep on x keeps this near-linear for random layouts
        order = sorted(pts)
        for i, p in enumerate(order):
            for q in order[i + 1:]:
                if q.x - p.x >= sep:
                    break
                if p.dist(q) < sep:
                    raise LayoutError(f"nodes {p} and {q} closer than r_min_sep={sep}")

    @classmethod
    def build(cls, correct: Iterable, faulty: Iterable = (), params: RadioParams | None = None) -> "LayoutSpec":
        nodes = [Node(as_point(p), Role.CORRECT) for p in correct]
        nodes += [Node(as_point(p), Role.FAULTY) for p in faulty]
        return cls(tuple(nodes), params or RadioParams())

    @property
    def positions(self) -> list[Point]:
        return [n.pos for n in self.nodes]

    @property
    def correct(self) -> list[Point]:
        return [n.pos for n in self.nodes if not n.faulty]

    @property
    def faulty(self) -> list[Point]:
        return [n.pos for n in self.nodes if n.faulty]

    def role_of(self, p: Point) -> Role | None:
        for n in self.nodes:
            if n.pos == p:
                return n.role
        return None

    def is_faulty(self, p: Point) -> bool:
        return self.role_of(p) is Role.FAULTY

    def is_correct(self, p: Point) -> bool:
        return self.role_of(p) is Role.CORRECT

    def correct_neighbors(self, u: Point) -> frozenset[Point]:
        """Correct nodes other than ``u`` within ``d_n`` of it."""
        return frozenset(v for v in self.correct if v != u and within(u.dist(v), self.params.d_n))

    def with_roles(self, faulty: Iterable) -> "LayoutSpec":
        bad = {as_point(p) for p in faulty}
        nodes = tuple(Node(n.pos, Role.FAULTY if n.pos in bad else Role.CORRECT) for n in self.nodes)
        return LayoutSpec(nodes, self.params)

    def to_dict(self) -> dict:
        return {
            "nodes": [{"x": n.pos.x, "y": n.pos.y, "role": n.role.value} for n in self.nodes],
            "radio": self.params.to_dict(),
        }


def within(d: float, bound: float) -> bool:
    """``d <= bound`` up to float rounding."""
    return d <= bound * (1.0 + EPS_R)


def _checked_distance(params: RadioParams, a: Point, b: Point) -> float:
    r = a.dist(b)
    if r < params.r_min_sep:
        raise DegenerateDistanceError(f"distance {r} below r_min_sep={params.r_min_sep}")
    return r


def rss_at(params: RadioParams, tss: float, sender: Point, receiver: Point) -> float:
    """RSS at ``receiver`` of a transmission at ``tss``: ``c*T/r**2``."""
    r = _checked_distance(params, sender, receiver)
    return params.c * tss / (r * r)


def range_of(params: RadioParams, tss: float) -> float:
    if not tss > 0:
        raise ValueError(f"tss must be positive, got {tss!r}")
    return math.sqrt(params.c * tss / params.r_min)


def receives(params: RadioParams, tss: float, sender: Point, receiver: Point) -> bool:
    # inclusive boundary; EPS_R keeps the range circle itself inside
    return rss_at(params, tss, sender, receiver) >= params.r_min * (1.0 - EPS_R)


def expected_rss_from_claim(params: RadioParams, claimed_origin: Point, receiver: Point) -> float:
    return rss_at(params, params.t_r, claimed_origin, receiver)


def rss_matches(measured: float, expected: float) -> bool:
    return abs(measured - expected) <= EPS_R * expected


def in_range(params: RadioParams, a: Point, b: Point) -> bool:
    """Would a correct-node broadcast from ``a`` reach ``b``."""
    return a.dist(b) <= params.r_t * (1.0 + EPS_R / 2)
