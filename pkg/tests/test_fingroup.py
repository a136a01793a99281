"""Multiplication-table groups checked against exhaustive small-case oracles."""

from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gogbench import fingroup
from gogbench.errors import NotAGroup, ResourceLimit

import oracles

# an order-5 loop: Latin, identity at 0, but (1*1)*2 = 2 while 1*(1*2) = 4
LOOP5 = [
    [0, 1, 2, 3, 4],
    [1, 0, 3, 4, 2],
    [2, 3, 4, 1, 0],
    [3, 4, 0, 2, 1],
    [4, 2, 1, 0, 3],
]

POOL = [
    fingroup.trivial(),
    fingroup.cyclic(2),
    fingroup.cyclic(6),
    fingroup.klein_four(),
    fingroup.symmetric(3),
    fingroup.dihedral(4),
]


def test_trivial_and_z2_tables():
    assert fingroup.from_table([[0]]).order == 1
    G = fingroup.from_table([[0, 1], [1, 0]])
    assert G.order == 2 and G.inv == (0, 1)


def test_from_table_rejects_non_square():
    with pytest.raises(NotAGroup):
        fingroup.from_table([[0, 1]])


def test_from_table_rejects_identity_failure():
    # Latin 3x3 with no identity element at index 0
    with pytest.raises(NotAGroup):
        fingroup.from_table([[1, 0, 2], [0, 2, 1], [2, 1, 0]])


def test_from_table_rejects_column_clash():
    # all rows are permutations and row/col 0 are fine, but column 1 repeats
    with pytest.raises(NotAGroup):
        fingroup.from_table([[0, 1, 2, 3], [1, 0, 3, 2], [2, 3, 1, 0], [3, 1, 0, 2]])


def test_from_table_rejects_non_associative_loop():
    with pytest.raises(NotAGroup, match="associativity"):
        fingroup.from_table(LOOP5)


def test_orders_and_inverses_z6():
    G = fingroup.cyclic(6)
    assert [G.element_order(x) for x in G.elements()] == [1, 6, 3, 2, 3, 6]
    assert G.inv == (0, 5, 4, 3, 2, 1)
    assert G.power(1, -2) == 4


@pytest.mark.parametrize(
    "build,count",
    [
        (fingroup.cyclic(2), 1),
        (fingroup.klein_four(), 6),
        (fingroup.cyclic(6), 2),
        (fingroup.symmetric(3), 6),
        (fingroup.dihedral(4), 8),
    ],
)
def test_automorphisms_against_bruteforce(build, count):
    auts = fingroup.automorphisms(build)
    assert sorted(h.images for h in auts) == oracles.brute_automorphism_images(build.table)
    assert len(auts) == count


@pytest.mark.parametrize("G", POOL)
def test_automorphism_list_is_a_group(G):
    auts = fingroup.automorphisms(G)
    images = {h.images for h in auts}
    assert tuple(range(G.order)) in images
    for a, b in itertools.product(auts, repeat=2):
        assert a.compose(b).images in images
    for a in auts:
        assert a.inverted().images in images


def test_isomorphisms_d3_is_s3():
    isos = fingroup.isomorphisms(fingroup.dihedral(3), fingroup.symmetric(3))
    assert sorted(h.images for h in isos) == oracles.brute_isomorphism_images(
        fingroup.dihedral(3).table, fingroup.symmetric(3).table
    )
    assert len(isos) == 6
    assert all(h.is_bijective() for h in isos)


def test_isomorphisms_distinguish_z4_from_klein():
    assert fingroup.isomorphisms(fingroup.cyclic(4), fingroup.klein_four()) == []


def test_isomorphisms_budget_is_honored():
    with pytest.raises(ResourceLimit):
        fingroup.isomorphisms(fingroup.symmetric(3), fingroup.symmetric(3), budget=3)


@pytest.mark.parametrize(
    "G,count",
    [
        (fingroup.trivial(), 1),
        (fingroup.klein_four(), 5),
        (fingroup.symmetric(3), 6),
        (fingroup.cyclic(12), 6),
    ],
)
def test_all_subgroups_against_bruteforce(G, count):
    subs = fingroup.all_subgroups(G)
    assert [s.elements for s in subs] == oracles.brute_subgroup_sets(G.table)
    assert len(subs) == count


def test_all_subgroups_cap():
    with pytest.raises(ResourceLimit):
        fingroup.all_subgroups(fingroup.cyclic(12), cap=8)


def test_centralizer_of_identity_is_everything():
    G = fingroup.symmetric(3)
    assert fingroup.centralizer(G, [0]).elements == tuple(G.elements())


def test_centralizer_of_s3_is_trivial():
    G = fingroup.symmetric(3)
    assert fingroup.centralizer(G, list(G.elements())).elements == (0,)


def test_centralizer_of_a_three_cycle():
    G = fingroup.symmetric(3)
    assert fingroup.centralizer(G, [3]).elements == (0, 3, 4)


def test_normalizer_of_order_two_subgroup_of_s3():
    G = fingroup.symmetric(3)
    H = fingroup.subgroup_generated(G, [1])
    assert fingroup.normalizer(G, H).order == 2


@pytest.mark.parametrize("G", POOL)
def test_centralizer_inside_normalizer(G):
    for s in range(min(G.order, 4)):
        S = [s]
        H = fingroup.subgroup_generated(G, S)
        cent = set(fingroup.centralizer(G, S).elements)
        norm = set(fingroup.normalizer(G, H).elements)
        assert cent <= norm


def test_subgroup_conjugator_in_s3():
    G = fingroup.symmetric(3)
    H1 = fingroup.subgroup_generated(G, [1])
    H2 = fingroup.subgroup_generated(G, [2])
    g = fingroup.subgroup_conjugator(G, H1, H2)
    assert g == 4 and G.element_order(g) == 3
    assert H1.conjugate_by(g).elements == H2.elements
    assert fingroup.subgroup_conjugator(G, H1, H1) == 0


def test_subgroup_conjugator_order_mismatch():
    G = fingroup.cyclic(6)
    H2 = fingroup.subgroup_generated(G, [3])
    H3 = fingroup.subgroup_generated(G, [2])
    assert fingroup.subgroup_conjugator(G, H2, H3) is None


def test_quotient_s3_by_a3():
    G = fingroup.symmetric(3)
    A3 = fingroup.subgroup_generated(G, [3])
    Q, proj = fingroup.quotient(G, A3)
    assert Q.order == 2
    assert proj.images == (0, 1, 1, 0, 0, 1)


def test_quotient_requires_normality():
    G = fingroup.symmetric(3)
    H = fingroup.subgroup_generated(G, [1])
    with pytest.raises(NotAGroup):
        fingroup.quotient(G, H)


def test_subgroup_as_group_round_trip():
    G = fingroup.symmetric(3)
    A3 = fingroup.subgroup_generated(G, [3])
    H, embed = A3.as_group()
    assert H.order == 3
    assert fingroup.isomorphisms(H, fingroup.cyclic(3))
    for x in range(H.order):
        for y in range(H.order):
            assert embed(H.mul(x, y)) == G.mul(embed(x), embed(y))


def test_direct_product_matches_cyclic():
    G = fingroup.direct_product(fingroup.cyclic(2), fingroup.cyclic(3))
    assert fingroup.isomorphisms(G, fingroup.cyclic(6))


def test_minimal_generating_sequence():
    assert fingroup.minimal_generating_sequence(fingroup.cyclic(6)) == [1]
    assert fingroup.minimal_generating_sequence(fingroup.klein_four()) == [1, 2]
    for G in POOL:
        gens = fingroup.minimal_generating_sequence(G)
        assert len(fingroup.closure(G, gens)) == G.order


@settings(max_examples=60, deadline=None)
@given(st.integers(0, len(POOL) - 1), st.data())
def test_conjugation_and_power_laws(idx, data):
    G = POOL[idx]
    g = data.draw(st.integers(0, G.order - 1))
    x = data.draw(st.integers(0, G.order - 1))
    y = data.draw(st.integers(0, G.order - 1))
    k = data.draw(st.integers(-6, 6))
    m = data.draw(st.integers(-6, 6))
    assert G.conjugate(g, G.mul(x, y)) == G.mul(G.conjugate(g, x), G.conjugate(g, y))
    assert G.power(x, k + m) == G.mul(G.power(x, k), G.power(x, m))
    assert G.mul(x, G.inv[x]) == 0
