from __future__ import annotations

import pytest

from sand.adversary import (
    Flood,
    InfeasibleConstruction,
    Scripted,
    ScriptedTransmission,
    StrategyError,
    discredit_schedule,
    fabricate_universe,
    impersonate_tss,
    schedule_from_json,
    schedule_to_json,
    snare_broadcast,
    spurious_conflict,
    theorem1_pair,
    theorem3_pair,
)
from sand.deception import PERFECT, find_snares
from sand.geometry import LayoutSpec, Point, RadioParams, expected_rss_from_claim, rss_at, rss_matches
from sand.layouts import grid_layout
from sand.protocol import announce, confirm
from sand.sim import World, run_until_quiescent


def test_impersonation_matches_victim_rss():
    p = RadioParams.with_range(2.0, 2.0)
    f, u, w = Point(0.0, 1.0), Point(0.0, 0.0), Point(1.5, 0.0)
    t = impersonate_tss(p, f, u, w)
    assert rss_at(p, t, f, u) == pytest.approx(rss_at(p, p.t_r, w, u), rel=1e-12)


def test_impersonation_degenerate():
    p = RadioParams()
    with pytest.raises(StrategyError):
        impersonate_tss(p, (0, 0), (0, 0), (1, 0))


def test_fabricated_universe_lands_consistently():
    p = RadioParams.with_range(2.0, 1.0)
    lay = LayoutSpec.build([(0, 0)], [(0.5, 0.0)], p)
    target = Point(0.0, 0.0)
    fict = [Point(0.0, 0.7), Point(-0.6, 0.1)]
    sched = fabricate_universe(lay, (0.5, 0.0), fict, target)
    assert len(sched) == 2 + 2
    for st in sched:
        got = rss_at(p, st.tss, st.leader, target)
        assert rss_matches(got, expected_rss_from_claim(p, st.message.sender, target))


def test_fabricate_validation():
    p = RadioParams.with_range(2.0, 1.0)
    lay = LayoutSpec.build([(0, 0)], [(0.5, 0.0)], p)
    with pytest.raises(StrategyError):
        fabricate_universe(lay, (0, 0), [(0.1, 0.1)], (0, 0))
    with pytest.raises(StrategyError):
        fabricate_universe(lay, (0.5, 0.0), [(3.0, 0.0)], (0, 0))


def test_schedule_json_roundtrip():
    st = ScriptedTransmission(3, Point(1.0, 2.0), 0.5, confirm(Point(0.0, 0.0), announce(Point(1.0, 1.0))))
    assert schedule_from_json(schedule_to_json([st])) == [st]
    with pytest.raises(StrategyError):
        ScriptedTransmission(0, Point(0.0, 0.0), -1.0, announce(Point(0.0, 0.0)))


def test_snare_broadcast_fools_the_grid():
    lay = grid_layout(3, 3, 1.0, RadioParams.with_range(1.5, 1.5), faulty=[0, 3])
    u5 = lay.positions[4]
    rep = next(r for r in find_snares(lay, u5, 0.05) if r.kind == PERFECT)
    sched = snare_broadcast(lay, rep, announce(rep.snare_point))
    w = World(lay, strategies=[Scripted(sched)])
    run_until_quiescent(w)
    st = w.nodes[u5]
    k = rep.snare_point
    # the fictitious identity reached u5 and nobody flagged it
    assert k in st.universes().identities
    assert not any(m.sender == k for c in st.conflicts.values() for m in c.subject.chain())
    assert all(not us.graph.degree(k) for us in [st.universes()])


def test_spurious_conflict_claims():
    p = RadioParams.with_range(1.5, 1.5)
    st = spurious_conflict((0, 0), announce(Point(1.0, 0.0)), (0, 1), p)
    assert st.tss == p.t_r and st.message.sender == Point(0.0, 0.0)


def test_flood_never_stops():
    p = RadioParams.with_range(1.5, 1.5)
    lay = LayoutSpec.build([(0, 0), (1, 0)], [(0, 1)], p)
    w = World(lay, strategies=[Flood(Point(0.0, 1.0), Point(0.5, 0.5), impersonate_tss(p, (0, 1), (0, 0), (0.5, 0.5)))])
    _, q = run_until_quiescent(w, 300)
    assert not q


def test_discredit_refuses_exposure():
    p = RadioParams.with_range(0.9, 1.0)
    sc = theorem3_pair(p)
    # with f2 right next to u, u would hear the replica too
    f2 = Point(sc["u"].x, sc["u"].y - 0.05)
    lay = LayoutSpec.build(sc.l2.correct, [f2], p)
    with pytest.raises(StrategyError):
        discredit_schedule(lay, f2, sc["k"], sc["v"], sc["f1"])


def test_theorem_builders():
    p = RadioParams.with_range(1.0, 1.0)
    sc = theorem1_pair(p)
    assert sc["v"] in sc.l1.correct and sc["v"] not in sc.l2.positions
    with pytest.raises(InfeasibleConstruction):
        theorem3_pair(RadioParams.with_range(2.0, 1.0))
    with pytest.raises(InfeasibleConstruction):
        theorem3_pair(RadioParams.with_range(1.0, 1.0))
    sc3 = theorem3_pair(RadioParams.with_range(0.9, 1.0))
    v, k = sc3["v"], sc3["k"]
    assert 0.9 < v.dist(k) <= 1.0
    assert abs(sc3["u"].dist(sc3["f1"]) - sc3["u"].dist(k)) < 1e-12
