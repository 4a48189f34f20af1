"""Retinues, deception fields and the snare search.

A faulty *leader* reaches a distance-downward-closed set of correct nodes
(its retinue). It can make a fictitious identity at ``k`` look genuine to
every retinue member iff one TSS value reproduces, at each member, the RSS
a correct node at ``k`` would produce. ``deception_tss`` evaluates that
constraint system; everything else here is built on it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .geometry import EPS_R, LayoutSpec, Point, RadioParams, as_point, rss_at, within

# Distance ties between retinue candidates.
TIE_TOL = 1e-9


@dataclass(frozen=True)
class Retinue:
    leader: Point
    members: tuple[Point, ...]
    radius: float

    def __contains__(self, p) -> bool:
        return p in self.members

    def to_dict(self) -> dict:
        return {
            "leader": self.leader.to_list(),
            "members": [m.to_list() for m in self.members],
            "radius": self.radius,
        }


def _sorted_correct(layout: LayoutSpec, leader: Point) -> list[tuple[float, Point]]:
    return sorted((leader.dist(p), p) for p in layout.correct)


def _tie_groups(dist_sorted: list[tuple[float, Point]]) -> list[int]:
    """Cumulative sizes at which a tie group ends."""
    cuts = []
    for i, (d, _) in enumerate(dist_sorted):
        nxt = dist_sorted[i + 1][0] if i + 1 < len(dist_sorted) else math.inf
        if nxt - d > TIE_TOL * max(1.0, d):
            cuts.append(i + 1)
    return cuts


def retinue(layout: LayoutSpec, leader, m: int) -> Retinue:
    """The ``m`` correct nodes nearest to ``leader``, widened over distance ties."""
    leader = as_point(leader)
    if not layout.is_faulty(leader):
        raise ValueError(f"{leader} is not a faulty node of the layout")
    ds = _sorted_correct(layout, leader)
    if not 1 <= m <= len(ds):
        raise ValueError(f"retinue size {m} out of range 1..{len(ds)}")
    size = next(c for c in _tie_groups(ds) if c >= m)
    members = tuple(p for _, p in ds[:size])
    return Retinue(leader, members, ds[size - 1][0])


def retinue_options(layout: LayoutSpec, leader, max_radius: float = math.inf) -> list[Retinue]:
    """Every valid retinue of ``leader`` whose radius does not exceed ``max_radius``."""
    leader = as_point(leader)
    ds = _sorted_correct(layout, leader)
    out = []
    for size in _tie_groups(ds):
        if ds[size - 1][0] > max_radius:
            break
        out.append(Retinue(leader, tuple(p for _, p in ds[:size]), ds[size - 1][0]))
    return out


def _nearest_outside(layout: LayoutSpec, ret: Retinue) -> float:
    members = set(ret.members)
    ds = [ret.leader.dist(p) for p in layout.correct if p not in members]
    return min(ds, default=math.inf)


def field_mask(layout: LayoutSpec, ret: Retinue, ks: np.ndarray, focus: Point | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``deception_tss`` over candidate points ``ks`` of shape (N, 2).

    Returns ``(feasible, tss)``; ``tss`` is only meaningful where feasible.
    Candidates coinciding with a node must be filtered by the caller.

    With ``focus`` set, the locality-aware variant is evaluated: only
    members within ``d_n`` of both ``k`` and ``focus`` must be fooled, the
    rest ignore ``k`` or are ignored by ``focus``. At least one member has
    to be fooled.
    """
    p = layout.params
    ks = np.asarray(ks, dtype=float).reshape(-1, 2)
    f = np.array(ret.leader)
    mem = np.array(ret.members, dtype=float).reshape(-1, 2)
    d_fx = np.hypot(*(mem - f).T)                                   # (m,)
    d_kx = np.hypot(ks[:, None, 0] - mem[None, :, 0], ks[:, None, 1] - mem[None, :, 1])  # (N, m)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_each = p.t_r * d_fx[None, :] ** 2 / d_kx ** 2
    near_k = d_kx <= p.d_n * (1 + EPS_R)
    if focus is None:
        rel = np.ones_like(near_k)
        ok = np.all(near_k, axis=1)
    else:
        near_u = np.hypot(mem[:, 0] - focus.x, mem[:, 1] - focus.y) <= p.d_n * (1 + EPS_R)
        rel = near_k & near_u[None, :]
        ok = rel.any(axis=1)
    first = np.argmax(rel, axis=1)
    tss = t_each[np.arange(len(ks)), first]
    with np.errstate(invalid="ignore"):
        ok &= np.all((np.abs(tss[:, None] - t_each) <= EPS_R * t_each) | ~rel, axis=1)
    # every member receives, the nearest correct non-member does not
    ok &= p.c * tss / d_fx.max() ** 2 >= p.r_min * (1 - EPS_R)
    rho = _nearest_outside(layout, ret)
    if math.isfinite(rho):
        ok &= p.c * tss / rho ** 2 < p.r_min * (1 - EPS_R)
    ok &= np.isfinite(tss)
    return ok, tss


def fooled_members(layout: LayoutSpec, ret: Retinue, k: Point, focus: Point | None = None) -> list[Point]:
    """Members that accept ``k`` (all of them in the retinue model)."""
    if focus is None:
        return list(ret.members)
    d_n = layout.params.d_n
    return [m for m in ret.members if within(m.dist(k), d_n) and within(m.dist(focus), d_n)]


def _at_node(layout: LayoutSpec, k: Point) -> bool:
    sep = layout.params.r_min_sep
    return any(k.dist(q) < sep for q in layout.positions)


def deception_tss(layout: LayoutSpec, ret: Retinue, k, focus=None) -> float | None:
    """TSS letting ``ret.leader`` pose as a correct node at ``k`` to its retinue, or None."""
    k = as_point(k)
    if _at_node(layout, k):
        return None
    ok, tss = field_mask(layout, ret, np.array([k]), None if focus is None else as_point(focus))
    return float(tss[0]) if ok[0] else None


# -- deception circles -----------------------------------------------------

@dataclass(frozen=True)
class DeceptionCircle:
    """Locus of points ``p`` with ``|px|/|py| == |fx|/|fy|``.

    ``ratio`` is ``|fy|/|fx|``. When it equals one the locus is the
    perpendicular bisector of ``(x, y)``: ``degenerate`` is set, ``center``
    is the midpoint and ``radius`` is infinite.
    """

    center: Point
    radius: float
    x: Point
    y: Point
    ratio: float
    degenerate: bool = False

    def contains(self, p, rtol: float = 1e-9) -> bool:
        p = as_point(p)
        return abs(p.dist(self.x) * self.ratio - p.dist(self.y)) <= rtol * max(p.dist(self.y), 1e-300)

    def sample(self, n: int) -> list[Point]:
        """``n`` points on the locus (on the line: spread over +-4|xy| around the midpoint)."""
        if self.degenerate:
            dx, dy = self.y.x - self.x.x, self.y.y - self.x.y
            L = math.hypot(dx, dy)
            ux, uy = -dy / L, dx / L
            ts = np.linspace(-4 * L, 4 * L, n)
            return [Point(self.center.x + t * ux, self.center.y + t * uy) for t in ts]
        th = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
        return [Point(self.center.x + self.radius * math.cos(t), self.center.y + self.radius * math.sin(t)) for t in th]


def deception_circle(x, y, f) -> DeceptionCircle:
    x, y, f = as_point(x), as_point(y), as_point(f)
    if len({x, y, f}) < 3:
        raise ValueError("x, y and f must be pairwise distinct")
    fx, fy = f.dist(x), f.dist(y)
    ratio = fy / fx
    xy = x.dist(y)
    if abs(fx - fy) <= TIE_TOL * max(fx, fy):
        mid = Point((x.x + y.x) / 2, (x.y + y.y) / 2)
        return DeceptionCircle(mid, math.inf, x, y, 1.0, degenerate=True)
    # split (xy) into a + b with b / a = |fy| / |fx|; radius = b*a / |b - a|
    a = xy * fx / (fx + fy)
    b = xy - a
    radius = b * a / abs(b - a)
    lam2 = (fx / fy) ** 2
    cx = (x.x - lam2 * y.x) / (1 - lam2)
    cy = (x.y - lam2 * y.y) / (1 - lam2)
    return DeceptionCircle(Point(cx, cy), radius, x, y, ratio)


# -- single receiver -------------------------------------------------------

@dataclass(frozen=True)
class RingRegion:
    """Admissible fictitious positions for a one-member retinue ``{x}``.

    ``inner`` (exclusive) and ``outer`` (inclusive) come from the
    constraint system; ``nominal_inner``/``nominal_outer`` is the simpler
    ring ``(|fy|, min(r_t, d_n))`` kept for comparison.
    """

    center: Point
    inner: float
    outer: float
    nominal_inner: float
    nominal_outer: float

    def contains(self, k) -> bool:
        d = as_point(k).dist(self.center)
        return self.inner < d and within(d, self.outer)

    @property
    def empty(self) -> bool:
        return self.inner >= self.outer


def single_receiver_region(layout: LayoutSpec, f, x) -> RingRegion:
    f, x = as_point(f), as_point(x)
    ret = Retinue(f, (x,), f.dist(x))
    ds = _sorted_correct(layout, f)
    if not ds or ds[0][1] != x or (len(ds) > 1 and ds[1][0] - ds[0][0] <= TIE_TOL * max(1.0, ds[0][0])):
        raise ValueError(f"{x} is not the unique nearest correct node of {f}")
    p = layout.params
    outer = min(p.r_t, p.d_n)
    fy = _nearest_outside(layout, ret)
    if math.isinf(fy):
        return RingRegion(x, 0.0, outer, 0.0, outer)
    inner = p.r_t * f.dist(x) / (fy * math.sqrt(1 - EPS_R))
    return RingRegion(x, inner, outer, fy, outer)


# -- snares ----------------------------------------------------------------

SIMPLE = "simple"
PERFECT = "perfect"

# Snare models: every retinue member must be fooled (``retinue``), or only
# members that would act on ``k`` and be heard by the focus (``local``).
RETINUE = "retinue"
LOCAL = "local"


@dataclass
class SnareReport:
    focus: Point
    snare_point: Point
    kind: str
    retinues: list[Retinue]
    tss_witness: dict[Point, float]
    conflict_free_set: list[Point] = field(default_factory=list)
    model: str = "retinue"

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "focus": self.focus.to_list(),
            "snare_point": self.snare_point.to_list(),
            "kind": self.kind,
            "retinues": [r.to_dict() for r in self.retinues],
            "tss_witness": [{"leader": l.to_list(), "tss": t} for l, t in self.tss_witness.items()],
            "conflict_free_set": [p.to_list() for p in self.conflict_free_set],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SnareReport":
        rets = [Retinue(as_point(r["leader"]), tuple(as_point(m) for m in r["members"]), r["radius"]) for r in d["retinues"]]
        return cls(
            as_point(d["focus"]),
            as_point(d["snare_point"]),
            d["kind"],
            rets,
            {as_point(w["leader"]): w["tss"] for w in d["tss_witness"]},
            [as_point(p) for p in d["conflict_free_set"]],
            d.get("model", RETINUE),
        )


def _line_from_circle(c: DeceptionCircle):
    """(center, radius) or ('line', point, direction)."""
    if c.degenerate:
        dx, dy = c.y.x - c.x.x, c.y.y - c.x.y
        return ("line", c.center, (-dy, dx))
    return ("circle", c.center, c.radius)


def _intersect(a, b) -> list[Point]:
    """Intersections of two circles/lines in the ``_line_from_circle`` encoding."""
    if a[0] == "line" and b[0] == "circle":
        a, b = b, a
    if a[0] == "circle" and b[0] == "circle":
        (c0, r0), (c1, r1) = a[1:], b[1:]
        d = c0.dist(c1)
        if d < 1e-15 or d > r0 + r1 or d < abs(r0 - r1):
            return []
        t = (d * d + r0 * r0 - r1 * r1) / (2 * d)
        h2 = r0 * r0 - t * t
        h = math.sqrt(max(h2, 0.0))
        ux, uy = (c1.x - c0.x) / d, (c1.y - c0.y) / d
        mx, my = c0.x + t * ux, c0.y + t * uy
        return [Point(mx - h * uy, my + h * ux), Point(mx + h * uy, my - h * ux)]
    if a[0] == "circle" and b[0] == "line":
        c, r = a[1], a[2]
        p0, (dx, dy) = b[1], b[2]
        L = math.hypot(dx, dy)
        dx, dy = dx / L, dy / L
        # |p0 + t d - c|^2 = r^2
        ox, oy = p0.x - c.x, p0.y - c.y
        bq = ox * dx + oy * dy
        cq = ox * ox + oy * oy - r * r
        disc = bq * bq - cq
        if disc < 0:
            return []
        s = math.sqrt(disc)
        return [Point(p0.x + t * dx, p0.y + t * dy) for t in (-bq - s, -bq + s)]
    # line/line
    p0, (ax, ay) = a[1], a[2]
    p1, (bx, by) = b[1], b[2]
    den = ax * by - ay * bx
    if abs(den) < 1e-15:
        return []
    t = ((p1.x - p0.x) * by - (p1.y - p0.y) * bx) / den
    return [Point(p0.x + t * ax, p0.y + t * ay)]


def _option_loci(ret: Retinue, focus: Point | None = None, d_n: float = math.inf) -> list:
    """Pairwise deception curves among the members that can matter to ``focus``."""
    mem = [m for m in ret.members if focus is None or within(m.dist(focus), d_n)]
    return [_line_from_circle(deception_circle(x, y, ret.leader)) for x, y in itertools.combinations(mem, 2)]


def _sample_curve(curve, focus: Point, radius: float, step: float) -> list[Point]:
    if curve[0] == "circle":
        c, r = curve[1], curve[2]
        if c.dist(focus) > r + radius or c.dist(focus) < r - radius:
            return []
        n = max(16, int(math.ceil(2 * math.pi * r / step)))
        th = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
        xs, ys = c.x + r * np.cos(th), c.y + r * np.sin(th)
    else:
        p0, (dx, dy) = curve[1], curve[2]
        L = math.hypot(dx, dy)
        dx, dy = dx / L, dy / L
        t0 = (focus.x - p0.x) * dx + (focus.y - p0.y) * dy
        ts = np.arange(t0 - radius, t0 + radius + step, step)
        xs, ys = p0.x + ts * dx, p0.y + ts * dy
    keep = np.hypot(xs - focus.x, ys - focus.y) <= radius * (1 + EPS_R)
    return [Point(float(a), float(b)) for a, b in zip(xs[keep], ys[keep])]


def disc_grid(center: Point, radius: float, step: float) -> np.ndarray:
    """Square-lattice points of pitch ``step`` anchored at ``center`` inside the disc."""
    n = int(math.floor(radius / step))
    i = np.arange(-n, n + 1)
    gx, gy = np.meshgrid(i, i, indexing="ij")
    keep = (gx ** 2 + gy ** 2) * step * step <= radius * radius * (1 + EPS_R)
    return np.stack([center.x + gx[keep] * step, center.y + gy[keep] * step], axis=1)


def snare_candidates(layout: LayoutSpec, focus: Point, resolution: float, options=None) -> np.ndarray:
    """Grid samples over the focus disc plus analytic samples on deception curves and their crossings."""
    p = layout.params
    if options is None:
        options = _relevant_options(layout, focus)
    pts = [disc_grid(focus, p.d_n, resolution)]
    curves = {}
    for ret in options:
        for c in _option_loci(ret, focus, p.d_n):
            curves.setdefault(c, None)
    curves = list(curves)
    for c in curves:
        s = _sample_curve(c, focus, p.d_n, resolution)
        if s:
            pts.append(np.array(s, dtype=float))
    for a, b in itertools.combinations(curves, 2):
        hit = _intersect(a, b)
        if hit:
            pts.append(np.array(hit, dtype=float))
    ks = np.concatenate(pts, axis=0)
    ks = ks[np.hypot(ks[:, 0] - focus.x, ks[:, 1] - focus.y) <= p.d_n * (1 + EPS_R)]
    nodes = np.array(layout.positions, dtype=float).reshape(-1, 2)
    if len(nodes):
        dmin = np.min(np.hypot(ks[:, None, 0] - nodes[None, :, 0], ks[:, None, 1] - nodes[None, :, 1]), axis=1)
        ks = ks[dmin >= p.r_min_sep]
    return np.unique(ks, axis=0)


def _relevant_options(layout: LayoutSpec, focus: Point, model: str = RETINUE) -> list[Retinue]:
    """Retinue options that could fool somebody within ``d_n`` of ``focus``.

    In the retinue model every member must sit within ``d_n`` of a point
    near ``focus``; in the local model far members are harmless, so only
    one member near ``focus`` is needed.
    """
    p = layout.params
    reach = p.d_n + min(p.r_t, p.d_n)
    out = []
    for f in layout.faulty:
        for ret in retinue_options(layout, f):
            if model == RETINUE:
                if any(m.dist(focus) > reach * (1 + EPS_R) for m in ret.members):
                    break
            elif not any(within(m.dist(focus), p.d_n) for m in ret.members):
                continue
            out.append(ret)
    return out


def coverage_set(layout: LayoutSpec, focus: Point, k: Point) -> list[Point]:
    """Correct nodes that would expect to hear a correct node at ``k`` and are in range of ``focus``."""
    r_t = layout.params.r_t
    return [v for v in layout.correct if within(v.dist(k), r_t) and within(v.dist(focus), r_t)]


def exposed_set(layout: LayoutSpec, focus: Point, k: Point, fooled) -> list[Point]:
    """Neighbors of ``focus`` that would raise an implicit conflict about ``k`` unless fooled.

    They act on ``k`` (within ``min(r_t, d_n)``), are heard by ``focus``
    and hear a confirm from some fooled node.
    """
    p = layout.params
    lim = min(p.r_t, p.d_n)
    fooled = list(fooled)
    return [
        v
        for v in layout.correct
        if v != focus
        and within(v.dist(focus), p.d_n)
        and within(v.dist(k), lim)
        and any(within(v.dist(z), lim) for z in fooled if z != v)
    ]


def find_snares(
    layout: LayoutSpec,
    focus,
    resolution: float,
    max_participants: int = 4,
    candidates: np.ndarray | None = None,
    model: str = RETINUE,
) -> list[SnareReport]:
    """Search the neighborhood of ``focus`` for simple and perfect snares.

    Sound (every report carries a replayable TSS witness) and complete up
    to ``resolution``. ``candidates`` overrides the generated sample set.
    """
    focus = as_point(focus)
    if not layout.is_correct(focus):
        raise ValueError(f"focus {focus} is not a correct node")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if model not in (RETINUE, LOCAL):
        raise ValueError(f"unknown snare model {model!r}")
    options = _relevant_options(layout, focus, model)
    if not options:
        return []
    ks = snare_candidates(layout, focus, resolution, options) if candidates is None else np.asarray(candidates, float).reshape(-1, 2)
    if len(ks) == 0:
        return []

    fmask_focus = focus if model == LOCAL else None
    masks, tsss = [], []
    for ret in options:
        ok, t = field_mask(layout, ret, ks, fmask_focus)
        masks.append(ok)
        tsss.append(t)
    masks_a = np.array(masks)                                  # (O, N)
    has_focus = np.array([focus in r.members for r in options])
    hit = np.nonzero(masks_a[has_focus].any(axis=0))[0] if has_focus.any() else []

    reports = []
    for i in hit:
        k = Point(float(ks[i, 0]), float(ks[i, 1]))
        feas = [j for j in range(len(options)) if masks_a[j, i]]
        rep = _best_assignment(
            layout, focus, k, [options[j] for j in feas], [tsss[j][i] for j in feas], max_participants, model
        )
        if rep is not None:
            reports.append(rep)
    reports.sort(key=lambda r: (r.snare_point.x, r.snare_point.y))
    return reports


def _best_assignment(layout, focus, k, rets, tss, cap, model=RETINUE) -> SnareReport | None:
    by_leader: dict[Point, list[tuple[Retinue, float]]] = {}
    for r, t in zip(rets, tss):
        by_leader.setdefault(r.leader, []).append((r, float(t)))
    leaders = sorted(by_leader)
    ff = focus if model == LOCAL else None
    cover = coverage_set(layout, focus, k) if model == RETINUE else None
    simple = None
    for n in range(1, min(cap, len(leaders)) + 1):
        for group in itertools.combinations(leaders, n):
            for choice in itertools.product(*(by_leader[l] for l in group)):
                fooled = set().union(*(fooled_members(layout, r, k, ff) for r, _ in choice))
                if focus not in fooled:
                    continue
                need = cover if cover is not None else exposed_set(layout, focus, k, fooled)
                if all(v in fooled for v in need):
                    return _report(layout, focus, k, PERFECT, choice, model)
                if simple is None:
                    simple = choice
    return _report(layout, focus, k, SIMPLE, simple, model) if simple else None


def _report(layout, focus, k, kind, choice, model=RETINUE) -> SnareReport:
    ff = focus if model == LOCAL else None
    fooled = set().union(*(fooled_members(layout, r, k, ff) for r, _ in choice))
    d_n, r_t = layout.params.d_n, layout.params.r_t
    neighbours = [v for v in layout.correct if v != focus and within(v.dist(focus), d_n)]
    # neighbors that accept k: fooled ones, and those k is out of range of
    quiet = [v for v in neighbours if v in fooled or not within(v.dist(k), r_t)]
    return SnareReport(
        focus,
        k,
        kind,
        [r for r, _ in choice],
        {r.leader: t for r, t in choice},
        sorted(quiet),
        model,
    )


def verify_witness(layout: LayoutSpec, report: SnareReport) -> bool:
    """Replay a report's TSS witness through the radio model.

    Fooled members must measure exactly the RSS a T_r broadcast from the
    snare point gives, every member must receive and no other correct node
    may receive.
    """
    p = layout.params
    correct = layout.correct
    ff = report.focus if report.model == LOCAL else None
    for ret in report.retinues:
        t = report.tss_witness[ret.leader]
        fooled = set(fooled_members(layout, ret, report.snare_point, ff))
        if ff is None and not all(within(m.dist(report.snare_point), p.d_n) for m in ret.members):
            return False
        for v in correct:
            r = rss_at(p, t, ret.leader, v)
            if v in ret.members:
                if r < p.r_min * (1 - EPS_R):
                    return False
                if v in fooled:
                    exp = rss_at(p, p.t_r, report.snare_point, v)
                    if abs(r - exp) > EPS_R * exp:
                        return False
            elif r >= p.r_min * (1 - EPS_R):
                return False
    return True


def check_range_condition(params: RadioParams) -> bool:
    """Whether the correct-node range is at least twice the neighborhood distance."""
    return params.r_t >= 2 * params.d_n * (1 - EPS_R)


def snare_free(
    layout: LayoutSpec, resolution: float, foci: Sequence | None = None, max_participants: int = 4, model: str = RETINUE
) -> bool:
    foci = layout.correct if foci is None else [as_point(f) for f in foci]
    return all(not find_snares(layout, u, resolution, max_participants, model=model) for u in foci)
