"""Extension equivalence and orbits checked against hand-built classes."""

from __future__ import annotations

import pytest

from gogbench.defspace import word_to_refs
from gogbench.errors import Mismatch, ResourceLimit, Unsupported
from gogbench.extensions import (
    ExtensionDatum,
    ExtensionEquivalence,
    equivalent,
    extension_generators,
    extension_orbit,
    validate_extension,
)
from gogbench.fingroup import Homomorphism, cyclic, direct_product, symmetric
from gogbench.gogcore import Word, pi1_presentation, w_inv, w_mul, w_pow
from gogbench.gogiso import Pi1Map

import zoo

ONE = Word(0, ())


def z4_datum():
    return ExtensionDatum(cyclic(4), cyclic(2), (0, 2), cyclic(2), (1,))


def klein_datum():
    K = direct_product(cyclic(2), cyclic(2))
    return ExtensionDatum(K, cyclic(2), (0, 1), cyclic(2), (0, 1))


def zxz2_data():
    """Z x Z/2 as an extension of Z by Z/2, twice, over one shared Z."""
    G = zoo.loop_trivial()
    z = pi1_presentation(G).gen_words[0]
    data = []
    for _ in range(2):
        E = zoo.loop_gog(cyclic(2), cyclic(2), (0, 1), (0, 1))
        a = Word(0, (("v", 0, 1),))
        data.append(ExtensionDatum(E, cyclic(2), (ONE, a), G, (ONE, z)))
    return G, z, data[0], data[1]


def z9_data():
    """The two nontrivial classes of extensions of Z/3 by Z/3 inside Z/9."""
    Z3, Z9 = cyclic(3), cyclic(9)
    d_a = ExtensionDatum(Z9, Z3, (0, 3, 6), Z3, (1,))
    d_b = ExtensionDatum(Z9, Z3, (0, 6, 3), Z3, (1,))
    return d_a, d_b


def s3_marking_data():
    """S3 over Z/2 with the two markings of its rotation kernel."""
    S3, Z3 = symmetric(3), cyclic(3)
    r = next(x for x in range(6) if S3.element_order(x) == 3)
    r2 = S3.mul(r, r)
    pi = tuple(0 if s in (0, r, r2) else 1 for s in extension_generators(S3))
    d1 = ExtensionDatum(S3, Z3, (0, r, r2), cyclic(2), pi)
    d2 = ExtensionDatum(S3, Z3, (0, r2, r), cyclic(2), pi)
    return d1, d2


def z4_loop_data():
    """Z/4 x Z and the inverted-letter semidirect product, both over Z."""
    G = zoo.loop_trivial()
    z = pi1_presentation(G).gen_words[0]
    straight = zoo.loop_gog(cyclic(4), cyclic(4), (0, 1, 2, 3), (0, 1, 2, 3))
    twist = zoo.loop_gog(cyclic(4), cyclic(4), (0, 1, 2, 3), (0, 3, 2, 1))
    ker = tuple(Word(0, (("v", 0, g),)) if g else ONE for g in range(4))
    d_s = ExtensionDatum(straight, cyclic(4), ker, G, (ONE, ONE, ONE, z))
    d_t = ExtensionDatum(twist, cyclic(4), ker, G, (ONE, ONE, ONE, z))
    return d_s, d_t


def _push(total_from, total_to, images, w):
    """Image of w under the map recorded by generator images."""
    out = Word(0, ())
    for r in word_to_refs(total_from, w):
        im = images[abs(r) - 1] if r > 0 else w_inv(total_to, images[-r - 1])
        out = w_mul(total_to, out, im)
    return out


# -- generators and validation ------------------------------------------------


def test_generators_per_backend():
    assert extension_generators(cyclic(4)) == (1,)
    assert extension_generators(direct_product(cyclic(2), cyclic(2))) == (1, 2)
    E = zoo.loop_gog(cyclic(2), cyclic(2), (0, 1), (0, 1))
    gens = extension_generators(E)
    assert [w.letters for w in gens] == [(("v", 0, 1),), (("e", 0),)]
    with pytest.raises(Unsupported):
        extension_generators("not a group")


def test_validate_accepts_the_menagerie():
    _, _, d1, d2 = zxz2_data()
    d_s, d_t = z4_loop_data()
    for d in (z4_datum(), klein_datum(), d1, d2, d_s, d_t, *z9_data(), *s3_marking_data()):
        assert validate_extension(d) == []


def test_validate_counts():
    assert validate_extension(ExtensionDatum(cyclic(4), cyclic(2), (0,), cyclic(2), (1,))) == [
        "kernel image count differs from the kernel order"
    ]
    assert validate_extension(ExtensionDatum(cyclic(4), cyclic(2), (0, 2), cyclic(2), (1, 1))) == [
        "quotient image count differs from the generator count"
    ]


def test_validate_rejects_nonnormal_kernel():
    S3 = symmetric(3)
    t = next(x for x in range(6) if S3.element_order(x) == 2)
    pi = tuple(0 for _ in extension_generators(S3))
    errs = validate_extension(ExtensionDatum(S3, cyclic(2), (0, t), cyclic(3), pi))
    assert "embedded kernel is not normal" in errs


def test_validate_rejects_broken_relator():
    errs = validate_extension(ExtensionDatum(cyclic(4), cyclic(2), (0, 2), cyclic(3), (1,)))
    assert any(e.startswith("quotient images break relator") for e in errs)


def test_validate_rejects_unkilled_kernel():
    errs = validate_extension(ExtensionDatum(cyclic(4), cyclic(2), (0, 2), cyclic(4), (1,)))
    assert errs == ["quotient map does not kill embedded kernel element 1"]


def test_validate_rejects_non_onto():
    errs = validate_extension(ExtensionDatum(cyclic(4), cyclic(2), (0, 2), cyclic(2), (0,)))
    assert errs == ["quotient generator 0 has no preimage: the map is not onto"]


def test_validate_rejects_wrong_quotient_size():
    # Z/8 with kernel {0, 4} maps onto Z/2 but the kernel of that map is Z/4
    errs = validate_extension(ExtensionDatum(cyclic(8), cyclic(2), (0, 4), cyclic(2), (1,)))
    assert any("lifts outside the embedded kernel" in e for e in errs)


# -- equivalence ----------------------------------------------------------------


def test_self_equivalence_is_identity_like():
    d = z4_datum()
    w = equivalent(d, d)
    assert w.fwd == (1,) and w.back == (1,)
    assert w.problems(d, d) == []


def test_z4_and_klein_are_inequivalent():
    d1, d2 = z4_datum(), klein_datum()
    assert equivalent(d1, d2) is None
    assert equivalent(d2, d1) is None
    w = equivalent(d2, d2)
    assert w.problems(d2, d2) == []


def test_two_presentations_of_zxz2_are_equivalent():
    _, _, d1, d2 = zxz2_data()
    w = equivalent(d1, d2)
    assert w is not None and w.problems(d1, d2) == []


def test_inverted_marking_of_zxz2_is_equivalent():
    # sending the stable letter to z^-1 is undone by reversing the loop
    G, z, d1, _ = zxz2_data()
    d3 = ExtensionDatum(d1.total, d1.n_group, d1.n_images, G, (ONE, w_inv(G, z)))
    assert validate_extension(d3) == []
    w = equivalent(d1, d3)
    assert w.problems(d1, d3) == []
    assert w.fwd[1].letters == (("e", 1),)


def test_straight_and_twisted_z4_loops_differ():
    d_s, d_t = z4_loop_data()
    assert equivalent(d_s, d_t) is None
    assert equivalent(d_t, d_s) is None


def test_z9_classes_are_inequivalent():
    d_a, d_b = z9_data()
    assert equivalent(d_a, d_b) is None
    assert equivalent(d_a, d_a) is not None


def test_s3_kernel_markings_are_conjugate():
    d1, d2 = s3_marking_data()
    w = equivalent(d1, d2)
    assert w is not None and w.problems(d1, d2) == []


def test_z6_is_not_s3():
    d1, _ = s3_marking_data()
    d_z6 = ExtensionDatum(cyclic(6), cyclic(3), (0, 2, 4), cyclic(2), (1,))
    assert validate_extension(d_z6) == []
    assert equivalent(d_z6, d1) is None


def test_witnesses_compose():
    # transitivity: pushing one witness through the next re-verifies
    G, z, d1, d2 = zxz2_data()
    d3 = ExtensionDatum(d2.total, d2.n_group, d2.n_images, G, (ONE, w_inv(G, z)))
    w12 = equivalent(d1, d2)
    w23 = equivalent(d2, d3)
    comp = ExtensionEquivalence(
        tuple(_push(d2.total, d3.total, w23.fwd, x) for x in w12.fwd),
        tuple(_push(d2.total, d1.total, w12.back, y) for y in w23.back),
    )
    assert comp.problems(d1, d3) == []


def test_witness_rechecks_catch_corruption():
    d = z4_datum()
    # inversion of Z/4 fixes {0, 2} pointwise and induces id on Z/2: valid
    assert ExtensionEquivalence((3,), (3,)).problems(d, d) == []
    bad = ExtensionEquivalence((2,), (1,)).problems(d, d)
    assert "the two maps are not mutually inverse" in bad
    assert "fwd moves the embedded kernel" in bad
    d1, _ = s3_marking_data()
    gens = extension_generators(d1.total)
    r = d1.n_images[1]  # order 3, so it cannot replace an order-2 generator
    squash = ExtensionEquivalence((r, gens[1]), (gens[0], gens[1]))
    assert any("breaks relator" in e for e in squash.problems(d1, d1))


def test_equivalent_requires_matching_frames():
    d_a, _ = z9_data()
    with pytest.raises(Mismatch):
        equivalent(d_a, ExtensionDatum(cyclic(9), cyclic(2), (0, 3), cyclic(3), (1,)))
    with pytest.raises(Mismatch):
        equivalent(d_a, ExtensionDatum(cyclic(9), cyclic(3), (0, 3, 6), cyclic(6), (1,)))
    _, _, d1, d2 = zxz2_data()
    other = zoo.loop_trivial()
    z2 = pi1_presentation(other).gen_words[0]
    with pytest.raises(Mismatch):
        equivalent(d1, ExtensionDatum(d2.total, d2.n_group, d2.n_images, other, (ONE, z2)))


def test_budgets_raise_instead_of_answering():
    d_a, d_b = z9_data()
    with pytest.raises(ResourceLimit):
        equivalent(d_a, d_b, budget=2)
    G, z, d1, d2 = zxz2_data()
    far = ExtensionDatum(d2.total, d2.n_group, d2.n_images, G, (ONE, w_pow(G, z, 5)))
    with pytest.raises(ResourceLimit):
        equivalent(d1, far, budget=10)


# -- the Aut(G) action ----------------------------------------------------------


def test_empty_alpha_list_reduces_to_equivalence():
    d1, d2 = z4_datum(), klein_datum()
    res = extension_orbit(d1, d2, [])
    assert not res.related and res.word is None and len(res.orbit) == 1
    res = extension_orbit(d1, d1, [])
    assert res.related and res.word == ()


def test_z4_and_klein_sit_in_singleton_orbits():
    d1, d2 = z4_datum(), klein_datum()
    ident = Homomorphism(cyclic(2), cyclic(2), (0, 1))
    res = extension_orbit(d1, d2, [ident])
    assert not res.related and len(res.orbit) == 1
    back = extension_orbit(d2, d1, [ident])
    assert not back.related and len(back.orbit) == 1


def test_z9_classes_swap_under_inversion():
    d_a, d_b = z9_data()
    inv3 = Homomorphism(cyclic(3), cyclic(3), (0, 2, 1))
    res = extension_orbit(d_a, d_b, [inv3])
    assert res.related and res.word == (1,)
    assert len(res.orbit) == 2
    assert res.stabilizer == ((1, 1),)
    for rep in res.orbit:
        assert validate_extension(rep) == []
    # the word re-checks: twisting the seed's quotient map lands on d_b
    twisted = ExtensionDatum(d_a.total, d_a.n_group, d_a.n_images, d_a.quot, (2,))
    assert equivalent(twisted, d_b) is not None


def test_aut_z_stabilizes_the_zxz2_class():
    G, z, d1, d2 = zxz2_data()
    invert = Pi1Map(pi1_presentation(G), G, (w_inv(G, z),))
    res = extension_orbit(d1, d2, [invert])
    assert res.related and res.word == ()
    assert len(res.orbit) == 1
    assert (1,) in res.stabilizer


def test_orbit_rejects_non_automorphisms():
    d1, d2 = z4_datum(), klein_datum()
    collapse = Homomorphism(cyclic(2), cyclic(2), (0, 0))
    with pytest.raises(Mismatch):
        extension_orbit(d1, d2, [collapse])
