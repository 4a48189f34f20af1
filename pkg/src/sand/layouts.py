"""Layout generators and the layout JSON format."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .geometry import LayoutError, LayoutSpec, Node, Point, RadioParams, Role


def grid_points(rows: int, cols: int, s: float = 1.0) -> list[Point]:
    """Row-major from the top-left corner, so a 3x3 grid has ``u5`` in the middle.

    Index ``i`` (0-based) is the conventional label ``u{i+1}``.
    """
    if rows < 0 or cols < 0 or not s > 0:
        raise ValueError("grid needs rows, cols >= 0 and s > 0")
    return [Point(float(c * s), float((rows - 1 - r) * s)) for r in range(rows) for c in range(cols)]


def grid_layout(rows: int, cols: int, s: float = 1.0, params: RadioParams | None = None, faulty=()) -> LayoutSpec:
    pts = grid_points(rows, cols, s)
    bad = {pts[i] for i in faulty}
    nodes = tuple(Node(p, Role.FAULTY if p in bad else Role.CORRECT) for p in pts)
    return LayoutSpec(nodes, params or RadioParams())


def random_points(n: int, area: float, seed: int, min_sep: float = 0.0, max_tries: int = 1000) -> list[Point]:
    """``n`` uniform points in ``[0, area]^2``; redraws a point that lands within ``min_sep`` of another."""
    if n < 0 or not area > 0:
        raise ValueError("random layout needs n >= 0 and area > 0")
    rng = np.random.default_rng(seed)
    pts: list[Point] = []
    for _ in range(n):
        for _try in range(max_tries):
            x, y = rng.uniform(0.0, area, size=2)
            p = Point(float(x), float(y))
            if all(p.dist(q) >= min_sep for q in pts):
                pts.append(p)
                break
        else:
            raise LayoutError(f"could not place {n} points with separation {min_sep} in area {area}")
    return pts


def random_layout(n: int, area: float, seed: int, params: RadioParams | None = None, faulty=()) -> LayoutSpec:
    params = params or RadioParams()
    pts = random_points(n, area, seed, params.r_min_sep)
    bad = {pts[i] for i in faulty}
    return LayoutSpec(tuple(Node(p, Role.FAULTY if p in bad else Role.CORRECT) for p in pts), params)


def label(layout: LayoutSpec, p: Point) -> str:
    return f"u{layout.positions.index(p) + 1}"


def layout_to_json(layout: LayoutSpec) -> str:
    return json.dumps(layout.to_dict(), indent=2, sort_keys=True) + "\n"


def layout_from_dict(d: dict, params: RadioParams | None = None) -> LayoutSpec:
    if params is None:
        params = RadioParams(**d["radio"]) if "radio" in d else RadioParams()
    nodes = tuple(Node(Point(float(n["x"]), float(n["y"])), Role(n.get("role", "correct"))) for n in d["nodes"])
    return LayoutSpec(nodes, params)


def load_layout(path, params: RadioParams | None = None) -> LayoutSpec:
    return layout_from_dict(json.loads(Path(path).read_text()), params)
