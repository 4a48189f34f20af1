from __future__ import annotations

from sand.adversary import Silent
from sand.deception import LOCAL, PERFECT, find_snares
from sand.detectors import make_detector
from sand.sim import World, make_policy, run_until_quiescent
from sand.workloads import NoFaultFamily, SnareFreeFamily, attack_mix, locally_exposed


def unchallenged(world):
    real = set(world.layout.positions)
    out = []
    for st in world.nodes.values():
        us = st.universes()
        out += [k for k in us.identities - real if k not in us.excluded and us.graph.degree(k) == 0]
    return out


def test_no_fault_family_is_seeded_and_in_range():
    fam = NoFaultFamily()
    a, b = fam.layout(3), fam.layout(3)
    assert a == b
    p = a.params
    assert p.r_t >= p.d_n and not a.faulty


def test_snare_free_family_passes_the_search():
    fam = SnareFreeFamily()
    seed, lay = next(fam.layouts(1))
    assert lay.params.r_t >= 2 * lay.params.d_n
    assert all(not find_snares(lay, u, fam.resolution) for u in lay.correct)


def test_unverified_fabrication_escapes_on_a_snare_free_layout():
    # seed 1 passes the retinue-model search, yet a fictitious identity shown
    # to a node whose neighbors are all out of reach collects no conflict
    fam = SnareFreeFamily()
    lay = fam.candidate(1)
    assert fam.is_snare_free(lay)
    strat = attack_mix(lay, 1, "fabricate", verified=False)
    w = World(lay, make_detector({"kind": "oracle"}, lay, 0), strat, make_policy("round_robin"))
    run_until_quiescent(w)
    assert unchallenged(w)
    fict = {st.message.sender for st in strat[0].schedule}
    # the local model sees it: the escaped point is a perfect local snare
    escaped = unchallenged(w)[0]
    assert escaped in fict
    hits = [u for u in lay.correct if any(r.kind == PERFECT for r in find_snares(
        lay, u, fam.resolution, candidates=[escaped], model=LOCAL))]
    assert hits


def test_verified_fabrication_is_challenged():
    fam = SnareFreeFamily()
    lay = fam.candidate(1)
    strat = attack_mix(lay, 1, "fabricate")
    assert not isinstance(strat[0], Silent)
    w = World(lay, make_detector({"kind": "oracle"}, lay, 0), strat, make_policy("round_robin"))
    run_until_quiescent(w)
    assert not unchallenged(w)


def test_locally_exposed_far_from_everyone():
    fam = SnareFreeFamily()
    lay = fam.candidate(1)
    u = lay.correct[0]
    # a point next to u with other nodes around is exposed
    near = min((v for v in lay.correct if v != u), key=u.dist)
    mid = type(u)((u.x + near.x) / 2 + 1e-3, (u.y + near.y) / 2)
    assert locally_exposed(lay, u, mid)
