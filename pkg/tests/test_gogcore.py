"""Bass-Serre word calculus checked against a rewriting-system oracle."""

from __future__ import annotations

import math
import random

import pytest

from gogbench.errors import Mismatch, NotAPath, ParseError
from gogbench.fingroup import Homomorphism, cyclic, trivial
from gogbench.gogcore import (
    GraphOfGroups,
    SerreGraph,
    Word,
    common_fixed_vertex,
    edge_length,
    element_order,
    finite_subgroup_reps,
    format_word,
    hyperbolic_centralizer_data,
    is_conjugate,
    is_equal,
    normal_form,
    parse_word,
    pi1_presentation,
    simultaneous_conjugacy,
    solve_power_conjugacy,
    translation_length,
    w_conj,
    w_inv,
    w_mul,
    w_pow,
    w_vertex,
    w_edge,
)

import oracles
import zoo

ID = Word(0, ())


def gen_word(gog, pres, seq):
    w = ID
    for s in seq:
        gw = pres.gen_words[abs(s) - 1]
        w = w_mul(gog, w, gw if s > 0 else w_inv(gog, gw))
    return w


def random_seq(rng, n_gens, max_len=6):
    return [
        rng.choice([1, -1]) * rng.randint(1, n_gens)
        for _ in range(rng.randint(0, max_len))
    ]


# -- validation --------------------------------------------------------------

def test_validate_zoo_fixtures_clean():
    for build in (zoo.dinfty, zoo.z2z3, zoo.z4_z2_z4, zoo.z4_z2_z6, zoo.rose2,
                  zoo.theta_f2, zoo.z2z2z2, zoo.z4_hnn_central, zoo.z2_star_z):
        assert build().validate() == []


def test_validate_involution_fixed_point():
    g = SerreGraph(2, term=(1, 0), inv=(0, 1))
    T = trivial()
    Z2 = cyclic(2)
    mono = Homomorphism(T, Z2, (0,))
    errs = GraphOfGroups(g, (Z2, Z2), (T, T), (mono, mono)).validate()
    assert any("involution" in e for e in errs)


def test_validate_non_injective_mono():
    Z2 = cyclic(2)
    g = SerreGraph(2, term=(1, 0), inv=(1, 0))
    squash = Homomorphism(Z2, Z2, (0, 0))
    errs = GraphOfGroups(g, (Z2, Z2), (Z2, Z2), (squash, squash)).validate()
    assert any("injective" in e for e in errs)


def test_validate_disconnected():
    g = SerreGraph(2, term=(), inv=())
    errs = GraphOfGroups(g, (trivial(), trivial()), (), ()).validate()
    assert any("connected" in e for e in errs)


# -- presentations ------------------------------------------------------------

def test_presentation_single_vertex_z2():
    g = SerreGraph(1, term=(), inv=())
    gog = GraphOfGroups(g, (cyclic(2),), (), ())
    pres = pi1_presentation(gog)
    assert pres.names == ("v0:1",)
    assert pres.relators == ((1, 1),)


def test_presentation_dinfty():
    pres = pi1_presentation(zoo.dinfty())
    assert pres.names == ("v0:1", "v1:1")
    assert pres.relators == ((1, 1), (2, 2))


def test_presentation_loop_is_free():
    pres = pi1_presentation(zoo.loop_trivial())
    assert pres.names == ("e0",)
    assert pres.relators == ()


def test_presentation_theta_has_two_free_generators():
    pres = pi1_presentation(zoo.theta_f2())
    assert pres.names == ("e2", "e4")
    assert pres.relators == ()


def test_relators_evaluate_trivially():
    for build in (zoo.dinfty, zoo.z2z3, zoo.z4_z2_z4, zoo.z4_z2_z6,
                  zoo.z2z2z2, zoo.z4_hnn_central, zoo.z2_star_z):
        gog = build()
        pres = pi1_presentation(gog)
        for rel in pres.relators:
            assert is_equal(gog, gen_word(gog, pres, rel), ID)


# -- normal forms --------------------------------------------------------------

def test_square_of_involution_is_trivial():
    gog = zoo.dinfty()
    w = parse_word(gog, "v0:1 v0:1")
    nf = normal_form(gog, w)
    assert nf.word.letters == (("v", 0, 0),)
    assert nf.elliptic is True


def test_amalgam_relation_a2_equals_b2():
    gog = zoo.z4_z2_z4()
    a = parse_word(gog, "v0:1")
    b = w_mul(gog, w_edge(gog, 0), w_vertex(1, 1), w_edge(gog, 1))
    w = w_mul(gog, a, a, w_inv(gog, b), w_inv(gog, b))
    assert is_equal(gog, w, ID)
    assert not is_equal(gog, w_mul(gog, a, w_inv(gog, b)), ID)


def test_normal_form_idempotent_random():
    rng = random.Random(7)
    for build in (zoo.dinfty, zoo.z4_z2_z4, zoo.z4_hnn_central, zoo.z2_star_z):
        gog = build()
        pres = pi1_presentation(gog)
        for _ in range(40):
            w = gen_word(gog, pres, random_seq(rng, len(pres.names)))
            once = normal_form(gog, w)
            again = normal_form(gog, once.word)
            assert once.word == again.word


def test_normal_form_alternating_shape():
    rng = random.Random(11)
    gog = zoo.z4_z2_z6()
    pres = pi1_presentation(gog)
    for _ in range(30):
        w = gen_word(gog, pres, random_seq(rng, len(pres.names)))
        letters = normal_form(gog, w).word.letters
        assert letters[0][0] == "v" and letters[-1][0] == "v"
        for i, L in enumerate(letters):
            assert L[0] == ("v" if i % 2 == 0 else "e")


def test_not_a_path():
    gog = zoo.dinfty()
    with pytest.raises(NotAPath):
        normal_form(gog, Word(0, (("v", 0, 1), ("v", 1, 1))))
    with pytest.raises(NotAPath):
        normal_form(gog, Word(1, (("e", 0),)))


# -- orders and ellipticity ----------------------------------------------------

def test_element_orders_dinfty():
    gog = zoo.dinfty()
    a = parse_word(gog, "v0:1")
    b = w_mul(gog, w_edge(gog, 0), w_vertex(1, 1), w_edge(gog, 1))
    ab = w_mul(gog, a, b)
    assert element_order(gog, a) == 2
    assert element_order(gog, ID) == 1
    assert element_order(gog, ab) == math.inf
    assert normal_form(gog, ab).elliptic is False
    assert normal_form(gog, a).elliptic is True


def test_element_orders_z2z3():
    gog = zoo.z2z3()
    b = w_mul(gog, w_edge(gog, 0), w_vertex(1, 1), w_edge(gog, 1))
    assert element_order(gog, b) == 3
    assert element_order(gog, w_pow(gog, b, 2)) == 3


def test_order_of_non_loop_raises():
    gog = zoo.dinfty()
    with pytest.raises(NotAPath):
        element_order(gog, w_edge(gog, 0))


def test_translation_length_additive_in_powers():
    rng = random.Random(3)
    for build in (zoo.dinfty, zoo.z4_z2_z4, zoo.z2_star_z):
        gog = build()
        pres = pi1_presentation(gog)
        for _ in range(25):
            w = gen_word(gog, pres, random_seq(rng, len(pres.names)))
            t = translation_length(gog, w)
            assert translation_length(gog, w_pow(gog, w, 2)) == 2 * t
            assert translation_length(gog, w_inv(gog, w)) == t


# -- conjugacy -------------------------------------------------------------------

def test_conjugate_to_self_yields_trivial_witness():
    gog = zoo.dinfty()
    for text in ("v0:1", "v0:1 e0 v1:1 e1"):
        w = parse_word(gog, text, base=0)
        c = is_conjugate(gog, w, w)
        assert c is not None and is_equal(gog, c, ID)


def test_elliptic_conjugacy_with_witness():
    gog = zoo.dinfty()
    a = parse_word(gog, "v0:1")
    b = w_mul(gog, w_edge(gog, 0), w_vertex(1, 1), w_edge(gog, 1))
    y = w_mul(gog, b, a, w_inv(gog, b))
    c = is_conjugate(gog, a, y)
    assert c is not None
    assert is_equal(gog, w_conj(gog, c, a), y)
    assert is_equal(gog, c, b) or is_equal(gog, c, w_mul(gog, b, a))


def test_elliptic_non_conjugate_across_vertices():
    gog = zoo.z2z3()
    a = parse_word(gog, "v0:1")
    b = w_mul(gog, w_edge(gog, 0), w_vertex(1, 1), w_edge(gog, 1))
    assert is_conjugate(gog, a, b) is None


def test_hyperbolic_conjugacy():
    gog = zoo.dinfty()
    a = parse_word(gog, "v0:1")
    b = w_mul(gog, w_edge(gog, 0), w_vertex(1, 1), w_edge(gog, 1))
    ab, ba = w_mul(gog, a, b), w_mul(gog, b, a)
    c = is_conjugate(gog, ab, ba)
    assert c is not None and is_equal(gog, w_conj(gog, c, ab), ba)
    assert is_conjugate(gog, ab, w_pow(gog, ab, 2)) is None


def test_random_conjugates_are_detected():
    rng = random.Random(19)
    for build in (zoo.dinfty, zoo.z4_z2_z4, zoo.z4_hnn_central, zoo.z2z3):
        gog = build()
        pres = pi1_presentation(gog)
        for _ in range(25):
            x = gen_word(gog, pres, random_seq(rng, len(pres.names)))
            t = gen_word(gog, pres, random_seq(rng, len(pres.names)))
            y = w_conj(gog, t, x)
            c = is_conjugate(gog, x, y)
            assert c is not None
            assert is_equal(gog, w_conj(gog, c, x), y)


def test_conjugacy_base_mismatch():
    gog = zoo.dinfty()
    with pytest.raises(Mismatch):
        is_conjugate(gog, parse_word(gog, "v0:1"), parse_word(gog, "v1:1"))


# -- simultaneous conjugacy -------------------------------------------------------

def test_simultaneous_empty_tuple():
    gog = zoo.dinfty()
    c = simultaneous_conjugacy(gog, (), ())
    assert c is not None and is_equal(gog, c, ID)


def test_simultaneous_arity_mismatch():
    gog = zoo.dinfty()
    a = parse_word(gog, "v0:1")
    with pytest.raises(Mismatch):
        simultaneous_conjugacy(gog, (a,), (a, a))


def test_simultaneous_random_positive():
    rng = random.Random(23)
    for build in (zoo.dinfty, zoo.z4_z2_z4, zoo.z4_hnn_central, zoo.z2z3):
        gog = build()
        pres = pi1_presentation(gog)
        for _ in range(12):
            xs = tuple(
                gen_word(gog, pres, random_seq(rng, len(pres.names), 4))
                for _ in range(rng.randint(1, 3))
            )
            t = gen_word(gog, pres, random_seq(rng, len(pres.names), 4))
            ys = tuple(w_conj(gog, t, x) for x in xs)
            c = simultaneous_conjugacy(gog, xs, ys)
            assert c is not None
            for x, y in zip(xs, ys):
                assert is_equal(gog, w_conj(gog, c, x), y)


def test_simultaneous_negative_hyperbolic_head():
    # (ab, a) vs (ab, b): nothing centralizing ab carries a to b
    gog = zoo.dinfty()
    a = parse_word(gog, "v0:1")
    b = w_mul(gog, w_edge(gog, 0), w_vertex(1, 1), w_edge(gog, 1))
    ab = w_mul(gog, a, b)
    assert is_conjugate(gog, a, b) is None
    assert simultaneous_conjugacy(gog, (ab, a), (ab, b)) is None


def test_simultaneous_negative_despite_elementwise():
    # elementwise conjugate pairs that no single witness aligns
    gog = zoo.dinfty()
    a = parse_word(gog, "v0:1")
    b = w_mul(gog, w_edge(gog, 0), w_vertex(1, 1), w_edge(gog, 1))
    ab = w_mul(gog, a, b)
    far = w_conj(gog, w_pow(gog, ab, 2), b)
    assert is_conjugate(gog, b, far) is not None
    assert simultaneous_conjugacy(gog, (a, b), (a, far)) is None


def test_simultaneous_negative_common_vertex():
    # (a, a) vs (a, bab^-1) in Z/2 * Z/3
    gog = zoo.z2z3()
    a = parse_word(gog, "v0:1")
    b = w_mul(gog, w_edge(gog, 0), w_vertex(1, 1), w_edge(gog, 1))
    moved = w_conj(gog, b, a)
    assert is_conjugate(gog, a, moved) is not None
    assert simultaneous_conjugacy(gog, (a, a), (a, moved)) is None


def test_common_fixed_vertex():
    gog = zoo.z2z3()
    a = parse_word(gog, "v0:1")
    b = w_mul(gog, w_edge(gog, 0), w_vertex(1, 1), w_edge(gog, 1))
    assert common_fixed_vertex(gog, [a, a]) is not None
    assert common_fixed_vertex(gog, [a, w_conj(gog, b, a)]) is None


# -- power conjugacy ---------------------------------------------------------------

def test_power_conjugacy_translated_reflection():
    gog = zoo.dinfty()
    a = parse_word(gog, "v0:1")
    b = w_mul(gog, w_edge(gog, 0), w_vertex(1, 1), w_edge(gog, 1))
    u = w_mul(gog, a, b)
    for k in (-2, 0, 3):
        target = w_conj(gog, w_pow(gog, u, k), a)
        sol = solve_power_conjugacy(gog, u, a, target)
        assert sol == ("finite", (k,))
    assert solve_power_conjugacy(gog, u, a, b) == ("empty",)


def test_power_conjugacy_central_element():
    gog = zoo.z4_hnn_central()
    t = Word(0, (("e", 0),))
    z = parse_word(gog, "v0:2")
    s = parse_word(gog, "v0:1")
    assert solve_power_conjugacy(gog, t, z, z) == ("residues", (0,), 1)
    assert solve_power_conjugacy(gog, t, z, s) == ("empty",)


def test_power_conjugacy_same_axis():
    gog = zoo.z4_hnn_central()
    t = Word(0, (("e", 0),))
    zt = w_mul(gog, parse_word(gog, "v0:2"), t)
    sol = solve_power_conjugacy(gog, t, zt, zt)
    assert sol[0] == "residues" and 0 in sol[1]
    assert solve_power_conjugacy(gog, t, zt, t) == ("empty",)


def test_power_conjugacy_distinct_axes():
    gog = zoo.z4_hnn_central()
    t = Word(0, (("e", 0),))
    s = parse_word(gog, "v0:1")
    a = w_conj(gog, s, t)
    assert solve_power_conjugacy(gog, t, a, a) == ("finite", (0,))
    assert solve_power_conjugacy(gog, t, a, t) == ("empty",)


def test_hyperbolic_centralizer_sizes():
    gog = zoo.dinfty()
    a = parse_word(gog, "v0:1")
    b = w_mul(gog, w_edge(gog, 0), w_vertex(1, 1), w_edge(gog, 1))
    _, F = hyperbolic_centralizer_data(gog, w_mul(gog, a, b))
    assert len(F) == 1

    gog2 = zoo.z4_hnn_central()
    t = Word(0, (("e", 0),))
    _, F2 = hyperbolic_centralizer_data(gog2, t)
    assert len(F2) == 2
    for f in F2:
        assert is_equal(gog2, w_conj(gog2, f, t), t)


# -- finite subgroups ----------------------------------------------------------------

def test_finite_subgroup_reps_free_product():
    gog = zoo.z2z3()
    reps = finite_subgroup_reps(gog)
    assert [H.order for _, H in reps] == [1, 2, 3]


def test_finite_subgroup_reps_amalgam():
    gog = zoo.z4_z2_z4()
    reps = finite_subgroup_reps(gog)
    assert [H.order for _, H in reps] == [1, 2, 4, 4]
    assert {v for v, H in reps if H.order == 4} == {0, 1}


def test_finite_subgroup_reps_dinfty():
    reps = finite_subgroup_reps(zoo.dinfty())
    assert [H.order for _, H in reps] == [1, 2, 2]


# -- congruence and oracle agreement ---------------------------------------------------

def test_is_equal_is_a_congruence():
    rng = random.Random(31)
    gog = zoo.z4_z2_z4()
    pres = pi1_presentation(gog)
    n = len(pres.names)
    for _ in range(200):
        u = gen_word(gog, pres, random_seq(rng, n, 4))
        t = gen_word(gog, pres, random_seq(rng, n, 2))
        v = w_mul(gog, u, t, w_inv(gog, t))
        w = gen_word(gog, pres, random_seq(rng, n, 4))
        assert is_equal(gog, u, v)
        assert is_equal(gog, w_mul(gog, u, w), w_mul(gog, v, w))
        assert is_equal(gog, w_mul(gog, w, u), w_mul(gog, w, v))


@pytest.mark.parametrize(
    "build",
    [zoo.dinfty, zoo.z2z3, zoo.z4_z2_z4, zoo.rose2, zoo.z2z2z2],
    ids=["dinfty", "z2z3", "z4z2z4", "rose2", "z2cubed"],
)
def test_word_problem_matches_rewriting_oracle(build):
    gog = build()
    pres = pi1_presentation(gog)
    oracle = oracles.PresentedGroupOracle(len(pres.names), pres.relators)
    assert oracle.confluent
    rng = random.Random(41)
    n = len(pres.names)
    for _ in range(100):
        s1, s2 = random_seq(rng, n), random_seq(rng, n)
        w1, w2 = gen_word(gog, pres, s1), gen_word(gog, pres, s2)
        assert is_equal(gog, w1, w2) == oracle.equal(tuple(s1), tuple(s2))


def test_oracle_ball_agrees_on_triviality():
    gog = zoo.z4_z2_z4()
    pres = pi1_presentation(gog)
    oracle = oracles.PresentedGroupOracle(len(pres.names), pres.relators)
    rng = random.Random(43)
    ball = oracle.ball(6)
    assert len(ball) <= 10000
    for _ in range(50):
        s = random_seq(rng, len(pres.names))
        assert (oracle.normal(tuple(s)) == ()) == is_equal(
            gog, gen_word(gog, pres, s), ID
        )


# -- serialization ------------------------------------------------------------------------

def test_word_roundtrip():
    gog = zoo.z4_z2_z4()
    w = parse_word(gog, "v0:3 e0 v1:2 E0 v0:1")
    assert parse_word(gog, format_word(w)) == w
    assert format_word(ID) == "1"


def test_parse_rejects_garbage():
    gog = zoo.dinfty()
    for text in ("v0", "x3", "v0:9", "e7", "v9:0"):
        with pytest.raises(ParseError):
            parse_word(gog, text)
