"""Seeded layout families and adversary mixes used by the experiments and tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adversary import Scripted, Silent, Strategy, fabricate_universe, spurious_conflict
from .deception import LOCAL, PERFECT, find_snares
from .geometry import LayoutSpec, Point, RadioParams, within
from .layouts import random_layout
from .protocol import announce


@dataclass(frozen=True)
class NoFaultFamily:
    """Random layouts where every pair within ``d_n`` is also within range."""

    n_max: int = 30
    d_n: float = 1.0

    def layout(self, seed: int) -> LayoutSpec:
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, self.n_max + 1))
        r_t = float(rng.uniform(self.d_n, 2.5 * self.d_n))
        area = float(rng.uniform(0.6, 1.2)) * math.sqrt(n) * self.d_n
        return random_layout(n, area, seed, RadioParams.with_range(r_t, self.d_n))


@dataclass(frozen=True)
class SnareFreeFamily:
    """Small dense layouts with one faulty node, r_t = 2 d_n, kept only if no focus has a snare."""

    n: int = 10
    area: float = 1.6
    d_n: float = 1.0
    resolution: float = 0.02

    @property
    def params(self) -> RadioParams:
        return RadioParams.with_range(2 * self.d_n, self.d_n)

    def candidate(self, seed: int) -> LayoutSpec:
        return random_layout(self.n, self.area, seed, self.params, faulty=[0])

    def is_snare_free(self, layout: LayoutSpec) -> bool:
        return all(not find_snares(layout, u, self.resolution) for u in layout.correct)

    def layouts(self, count: int, start: int = 0):
        seed = start
        while count:
            lay = self.candidate(seed)
            if self.is_snare_free(lay):
                yield seed, lay
                count -= 1
            seed += 1


def locally_exposed(layout: LayoutSpec, target: Point, k: Point, resolution: float = 0.02) -> bool:
    """Would some correct node challenge a fictitious ``k`` shown to ``target``?

    False when ``k`` is a perfect snare point of the local model, i.e. the
    adversary can fool every node that could object.
    """
    reps = find_snares(layout, target, resolution, candidates=np.array([k], dtype=float), model=LOCAL)
    return not any(r.kind == PERFECT for r in reps)


def attack_mix(layout: LayoutSpec, seed: int, kind: str, verified: bool = True) -> list[Strategy]:
    """One of the end-to-end adversaries: ``fabricate``, ``spurious`` or ``silent``.

    With ``verified`` the fabricated identities avoid perfect local snare
    points, so the attack stays inside the snare-free guarantee.
    """
    if kind == "silent" or not layout.faulty:
        return [Silent()]
    rng = np.random.default_rng(seed)
    f = layout.faulty[0]
    p = layout.params
    near = [u for u in layout.correct if within(u.dist(f), p.r_t)]
    target = near[int(rng.integers(len(near)))] if near else layout.correct[0]
    if kind == "fabricate":
        fict = []
        for _ in range(200):
            if len(fict) == 2:
                break
            r = p.d_n * math.sqrt(float(rng.uniform(0.01, 1.0)))
            a = float(rng.uniform(0, 2 * math.pi))
            k = Point(target.x + r * math.cos(a), target.y + r * math.sin(a))
            if not all(k.dist(q) > 10 * p.r_min_sep for q in layout.positions + fict):
                continue
            if verified and not locally_exposed(layout, target, k):
                continue
            fict.append(k)
        if not fict:
            # every spot near the target is out of reach of its neighbors
            return [Silent()]
        return [Scripted(fabricate_universe(layout, f, fict, target, at_epoch=int(rng.integers(0, 20))))]
    if kind == "spurious":
        victim = layout.correct[int(rng.integers(len(layout.correct)))]
        r = 0.5 * p.d_n
        fake = Point(target.x + r, target.y + 0.3 * r)
        out = [
            spurious_conflict(f, announce(victim), target, p, None, 3),
            spurious_conflict(f, announce(Point(target.x - r, target.y)), target, p, fake, 5),
        ]
        if fake.dist(target) > p.r_min_sep and all(fake.dist(q) > p.r_min_sep for q in layout.positions):
            out.append(spurious_conflict(f, announce(victim), target, p, fake, 7))
        return [Scripted(out)]
    raise ValueError(f"unknown attack kind {kind!r}")
