from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sand.deception import (
    LOCAL,
    PERFECT,
    Retinue,
    SnareReport,
    check_range_condition,
    deception_circle,
    deception_tss,
    field_mask,
    find_snares,
    retinue,
    retinue_options,
    single_receiver_region,
    verify_witness,
)
from sand.geometry import LayoutSpec, Point, RadioParams
from sand.layouts import grid_layout, random_layout

coord = st.floats(-5.0, 5.0, allow_nan=False)
points = st.builds(Point, coord, coord)


# -- independent oracles ---------------------------------------------------

def oracle_tss(layout, ret, k, tol=1e-9):
    """Direct reading of the field definition, one candidate at a time."""
    p = layout.params
    ts = []
    for m in ret.members:
        dk = math.dist(k, m)
        if dk > p.d_n * (1 + tol) or dk == 0:
            return None
        ts.append(p.t_r * math.dist(ret.leader, m) ** 2 / dk ** 2)
    t = ts[0]
    if any(abs(x - t) > tol * x for x in ts):
        return None
    for m in ret.members:
        if p.c * t / math.dist(ret.leader, m) ** 2 < p.r_min * (1 - tol):
            return None
    for q in layout.correct:
        if q not in ret.members and p.c * t / math.dist(ret.leader, q) ** 2 >= p.r_min * (1 - tol):
            return None
    return t


def oracle_snare_points(layout, focus, ks):
    """Candidates where some retinue holding ``focus`` admits a TSS."""
    out = set()
    for k in ks:
        k = Point(float(k[0]), float(k[1]))
        if math.dist(k, focus) > layout.params.d_n * (1 + 1e-9):
            continue
        for f in layout.faulty:
            for size in range(1, len(layout.correct) + 1):
                try:
                    ret = retinue(layout, f, size)
                except ValueError:
                    continue
                if focus in ret.members and oracle_tss(layout, ret, k) is not None:
                    out.add(k)
    return out


# -- retinues --------------------------------------------------------------

def test_retinue_includes_ties():
    lay = grid_layout(3, 3, 1.0, RadioParams.with_range(1.5, 1.5), faulty=[3])
    u4 = lay.positions[3]
    r = retinue(lay, u4, 1)
    assert set(r.members) == {lay.positions[0], lay.positions[4], lay.positions[6]}
    sizes = [len(o.members) for o in retinue_options(lay, u4)]
    assert sizes == sorted(set(sizes))


@given(st.integers(0, 200))
@settings(max_examples=30, deadline=None)
def test_retinue_downward_closed(seed):
    lay = random_layout(7, 3.0, seed, RadioParams(), faulty=[0])
    f = lay.faulty[0]
    for ret in retinue_options(lay, f):
        far = max(f.dist(m) for m in ret.members)
        outside = [q for q in lay.correct if q not in ret.members]
        assert all(f.dist(q) > far for q in outside)


# -- apollonius circles ----------------------------------------------------

def test_circle_radius_and_center_closed_form():
    x, y, f = Point(0.0, 0.0), Point(4.0, 0.0), Point(1.0, 0.0)
    c = deception_circle(x, y, f)
    # |fx| = 1, |fy| = 3: the circle of points with |px| / |py| = 1/3
    # meets the axis at 1 and -2, so center -0.5 and radius 1.5
    assert c.center.x == pytest.approx(-0.5)
    assert c.center.y == pytest.approx(0.0)
    assert c.radius == pytest.approx(1.5)
    assert c.contains(f)


@given(x=points, y=points, f=points)
def test_circle_points_hold_the_ratio(x, y, f):
    assume(min(x.dist(y), x.dist(f), y.dist(f)) > 0.05)
    c = deception_circle(x, y, f)
    assume(not c.degenerate and c.radius < 1e4)
    for q in c.sample(12):
        assert q.dist(x) * c.ratio == pytest.approx(q.dist(y), rel=1e-7)


def test_equidistant_leader_gives_bisector():
    c = deception_circle(Point(-1.0, 0.0), Point(1.0, 0.0), Point(0.0, 3.0))
    assert c.degenerate and math.isinf(c.radius)
    assert all(abs(q.x) < 1e-12 for q in c.sample(5))


def test_three_noncollinear_members_pin_the_sender():
    # three receivers around the leader: the only consistent point is the leader
    p = RadioParams.with_range(3.0, 3.0)
    lay = LayoutSpec.build([(1, 0), (-0.5, 0.9), (-0.5, -0.9)], [(0, 0)], p)
    ret = retinue(lay, Point(0.0, 0.0), 3)
    xs = np.linspace(-2.5, 2.5, 251)
    ks = np.array([(a, b) for a in xs for b in xs])
    ok, _ = field_mask(lay, ret, ks)
    hits = ks[ok]
    assert all(math.hypot(*h) < 0.05 for h in hits)


# -- deception fields ------------------------------------------------------

@pytest.mark.parametrize("seed", range(6))
def test_field_mask_matches_oracle(seed):
    p = RadioParams.with_range(1.3, 1.0)
    lay = random_layout(6, 1.8, seed, p, faulty=[0])
    f = lay.faulty[0]
    step = p.d_n / 200
    xs = np.arange(-1.0, 2.8, step * 4)
    ks = np.array([(a, b) for a in xs for b in xs])
    for ret in retinue_options(lay, f):
        ok, tss = field_mask(lay, ret, ks)
        for i in range(0, len(ks), 7):
            k = Point(*ks[i])
            want = oracle_tss(lay, ret, k)
            assert bool(ok[i]) == (want is not None), (ret, k)
            if want is not None:
                assert tss[i] == pytest.approx(want, rel=1e-12)


def test_deception_tss_rejects_node_positions():
    p = RadioParams.with_range(1.5, 1.5)
    lay = grid_layout(3, 3, 1.0, p, faulty=[0])
    ret = retinue(lay, lay.positions[0], 1)
    assert deception_tss(lay, ret, lay.positions[1]) is None


def test_single_receiver_ring():
    p = RadioParams.with_range(1.5, 1.5)
    lay = LayoutSpec.build([(1, 0), (0, 1.4)], [(0, 0)], p)
    ring = single_receiver_region(lay, (0, 0), (1, 0))
    assert ring.nominal_inner == pytest.approx(1.4)
    # constraint-derived inner radius: r_t |fx| / |fy|
    assert ring.inner == pytest.approx(1.5 / 1.4, rel=1e-6)
    ret = Retinue(Point(0.0, 0.0), (Point(1.0, 0.0),), 1.0)
    for r in (1.1, 1.3, 1.5):
        assert (deception_tss(lay, ret, Point(1.0 + r, 0.0)) is not None) == ring.contains(Point(1.0 + r, 0.0))


# -- snares ----------------------------------------------------------------

@pytest.mark.parametrize("seed,which", [(0, 4), (1, 0), (2, 2), (3, 1), (5, 0), (8, 0), (13, 3)])
def test_find_snares_matches_brute_force(seed, which):
    p = RadioParams.with_range(1.2, 1.0)
    lay = random_layout(6, 1.6, seed, p, faulty=[0])
    focus = lay.correct[which]
    step = p.d_n / 25
    xs = np.arange(focus.x - 1, focus.x + 1 + step, step)
    ys = np.arange(focus.y - 1, focus.y + 1 + step, step)
    ks = np.array([(a, b) for a in xs for b in ys])
    got = {r.snare_point for r in find_snares(lay, focus, 0.01, candidates=ks)}
    assert got == oracle_snare_points(lay, focus, ks)


def test_witnesses_replay(grid_two_faults):
    u5 = grid_two_faults.positions[4]
    reps = find_snares(grid_two_faults, u5, 0.05)
    assert any(r.kind == PERFECT for r in reps)
    assert all(verify_witness(grid_two_faults, r) for r in reps)
    r = reps[0]
    assert SnareReport.from_dict(r.to_dict()) == r


def test_tampered_witness_fails(grid_two_faults):
    u5 = grid_two_faults.positions[4]
    r = find_snares(grid_two_faults, u5, 0.05)[0]
    bad = dict(r.tss_witness)
    lead = next(iter(bad))
    bad[lead] *= 1.01
    r2 = SnareReport(r.focus, r.snare_point, r.kind, r.retinues, bad, r.conflict_free_set, r.model)
    assert not verify_witness(grid_two_faults, r2)


def test_no_faults_no_snares():
    lay = grid_layout(3, 3, 1.0, RadioParams.with_range(1.5, 1.5))
    assert find_snares(lay, lay.positions[4], 0.05) == []


def test_local_model_contains_retinue_model(grid_two_faults):
    u5 = grid_two_faults.positions[4]
    strict = {r.snare_point for r in find_snares(grid_two_faults, u5, 0.05)}
    ks = np.array(sorted(strict))
    local = {r.snare_point for r in find_snares(grid_two_faults, u5, 0.05, candidates=ks, model=LOCAL)}
    assert strict <= local


def test_faulty_focus_rejected(grid_two_faults):
    with pytest.raises(ValueError):
        find_snares(grid_two_faults, grid_two_faults.positions[0], 0.05)


def test_range_condition():
    assert check_range_condition(RadioParams.with_range(2.0, 1.0))
    assert not check_range_condition(RadioParams.with_range(1.9, 1.0))
