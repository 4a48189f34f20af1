from __future__ import annotations

import pytest

from sand.detectors import (
    EVENTUAL,
    SPU,
    WPU,
    DetectorConfigError,
    DetectorInput,
    GridFamily,
    OracleDetector,
    PointSetFamily,
    QuiescenceDetector,
    TopologyDetector,
    TrustedSetDetector,
    audit_contract,
    make_detector,
)
from sand.geometry import Point, RadioParams
from sand.layouts import grid_layout, random_layout
from sand.protocol import DepGraph, announce, confirm, conflict, universes_from
from sand.sim import World, run_until_quiescent

P = RadioParams.with_range(3.0, 3.0)
ME = Point(0.0, 0.0)
V, W, Z = Point(1.0, 0.0), Point(0.0, 1.0), Point(-1.0, 0.0)
K = Point(0.5, 0.5)  # off the unit lattice


def inp(*msgs, epoch=100, last=0, pending=0, me=ME):
    d = DepGraph()
    for m in msgs:
        d.add(m)
    return DetectorInput(me, P, universes_from(d, [], me, P), d, epoch, last, pending)


def full_confirms(pts):
    return [confirm(b, announce(a)) for a in pts for b in pts if a != b]


def test_oracle_points_only_at_truth():
    det = OracleDetector({ME: [V, W]})
    assert det(inp(announce(V), announce(W))) == frozenset({V, W})
    # every universe holds a fictitious identity
    assert det(inp(announce(V), announce(W), announce(K))) is None
    # real but incomplete only
    assert det(inp(announce(V))) is None


def test_oracle_under_overflow():
    pts = [V, W]
    d = DepGraph()
    for m in (announce(V), announce(W), announce(K), conflict(V, announce(K))):
        d.add(m)
    us = universes_from(d, [], ME, P, cap=1)
    assert us.overflow
    det = OracleDetector({ME: pts})
    assert det(DetectorInput(ME, P, us, d, 0, 0, 0)) == frozenset(pts)


def test_quiescence_waits_for_window():
    det = QuiescenceDetector(10)
    msgs = [announce(V), announce(W), *full_confirms([V, W])]
    assert det(inp(*msgs, epoch=5, last=0)) is None
    assert det(inp(*msgs, epoch=10, last=0)) == frozenset({V, W})
    assert det(inp(*msgs, epoch=10, last=0, pending=1)) is None
    assert det.wake_at(inp(*msgs, epoch=5, last=0)) == 10


def test_quiescence_symmetric_tie():
    det = QuiescenceDetector(1)
    msgs = [announce(V), announce(W), conflict(Z, announce(V)), conflict(Z, announce(W)), conflict(V, announce(W))]
    assert det(inp(*msgs)) is None


def test_quiescence_needs_confirms():
    det = QuiescenceDetector(1)
    assert det(inp(announce(V), announce(W))) is None


def test_trusted_selects_unique():
    det = TrustedSetDetector({ME: [W]}, P)
    assert det(inp(announce(K), announce(W), conflict(W, announce(K)))) == frozenset({W})
    # both universes hold the trusted node
    both = inp(announce(K), announce(V), announce(W), conflict(V, announce(K)))
    assert det(both) is None
    # trusted node absent from all universes
    assert TrustedSetDetector({ME: [Z]}, P)(inp(announce(V))) is None


def test_trusted_beyond_dn_rejected():
    with pytest.raises(DetectorConfigError):
        TrustedSetDetector({ME: [Point(5.0, 0.0)]}, P)


def test_topology_drops_off_lattice():
    det = TopologyDetector(GridFamily(1.0))
    assert det(inp(announce(V), announce(K), conflict(V, announce(K)))) == frozenset({V})
    # a fictitious point on an empty lattice spot cannot be told apart
    on = Point(1.0, 1.0)
    assert det(inp(announce(V), announce(on), conflict(V, announce(on)))) is None
    # node itself off-lattice
    assert det(inp(announce(V), me=K)) is None


def test_point_set_family():
    fam = PointSetFamily(frozenset([V, W]))
    assert fam.on_lattice(Point(1.0 + 1e-9, 0.0))
    assert not fam.on_lattice(K)


@pytest.mark.parametrize("spec", [{"kind": "oracle"}, {"kind": "quiescence"}, {"kind": "trusted"}, {"kind": "topology"}])
def test_contracts_on_grid(spec):
    lay = grid_layout(3, 3, 1.0, RadioParams.with_range(1.5, 1.5))
    w = World(lay, make_detector(spec, lay, 36))
    run_until_quiescent(w)
    det = w.detector
    assert audit_contract(w.trace, lay, det.contract) == []
    assert all(w.outputs()[u] == lay.correct_neighbors(u) for u in lay.correct)


def test_audit_flags_wrong_pointer():
    lay = grid_layout(2, 2, 1.0, RadioParams.with_range(1.5, 1.5))
    u = lay.correct[0]
    trace = [
        {"epoch": 0, "kind": "detector", "node": list(u), "payload": {"pointer": [[9.0, 9.0]]}},
        {"epoch": 1, "kind": "end", "node": None, "payload": {"quiesced": True}},
    ]
    assert audit_contract(trace, lay, SPU)
    assert audit_contract(trace, lay, WPU)
    assert audit_contract(trace, lay, EVENTUAL)


def test_make_detector_errors():
    lay = random_layout(3, 1.0, 0)
    with pytest.raises(DetectorConfigError):
        make_detector({"kind": "psychic"}, lay, 4)
    with pytest.raises(DetectorConfigError):
        make_detector({"kind": "quiescence", "window": 0}, lay, 4)
