"""Shortness machinery checked against full-sphere scans and tree geometry."""

from __future__ import annotations

import random

import pytest

from gogbench.errors import ElementaryImage, Mismatch, NonDecreasingStep, OracleRequired
from gogbench.shortening import (
    HypContext,
    MorphismCandidate,
    apply_morphism,
    ball_words,
    count_short_postconjugates,
    hyp_context,
    in_Lh,
    inv_word,
    is_short,
    meet_len,
    morphism,
    post_conjugate,
    reduce_word,
    shorten,
    shorten_with_trace,
)

CTX = hyp_context(rank=2)


def rand_word(rng, n):
    w = []
    while len(w) < n:
        ch = rng.choice("abAB")
        if w and ch == w[-1].swapcase():
            continue
        w.append(ch)
    return "".join(w)


def full_sphere_short(ctx, m):
    """Reference verdict trying every length-c_h witness, not just prefixes."""
    fa, fb = m.image("a"), m.image("b")
    fab, faib = apply_morphism(m, "ab"), apply_morphism(m, "Ab")
    fba, fbia = apply_morphism(m, "ba"), apply_morphism(m, "Ba")
    sphere = [w for w in ball_words(ctx.rank, ctx.c_h) if len(w) == ctx.c_h]
    for words in ((fa, fb), (fb, fab, faib), (fa, fba, fbia)):
        for h in sphere:
            if all(in_Lh(ctx, w, h) for w in words):
                return False
    return True


# -- words and contexts ---------------------------------------------------------


def test_word_helpers():
    assert reduce_word("abBA") == ""
    assert reduce_word("abAB") == "abAB"
    assert inv_word("abA") == "aBA"
    assert meet_len("abab", "abba") == 2
    ball = list(ball_words(2, 2))
    assert ball[:5] == ["", "a", "A", "b", "B"]
    assert len(ball) == 1 + 4 + 12
    assert all(reduce_word(w) == w for w in ball)


def test_context_validation():
    assert CTX.c_in == 1000 and CTX.c_h == 200 and CTX.c_near == 20
    assert hyp_context(rank=1, delta_eff=2.0).c_h == 400
    with pytest.raises(Mismatch):
        hyp_context()
    with pytest.raises(Mismatch):
        hyp_context(rank=2, oracle=reduce_word)
    with pytest.raises(Mismatch):
        hyp_context(rank=2, delta_eff=0.5)
    with pytest.raises(Mismatch):
        hyp_context(rank=2, c_in=10, c_h=20, c_near=0)
    with pytest.raises(OracleRequired):
        in_Lh(HypContext(), "a" * 1000, "a" * 200)


def test_morphism_factory():
    m = morphism(("a", "b"), ("abBA" + "a", "b"))
    assert m.images == ("a", "b") and m.q == 1
    assert m.problems() == []
    with pytest.raises(Mismatch):
        morphism(("a", "c"), ("a", "c"))
    with pytest.raises(Mismatch):
        morphism(("a", "b", "a"), ("a", "b", "a"))
    bad = MorphismCandidate(("a", "b"), ("aA", "b"), 9)
    assert "image of a is not freely reduced" in bad.problems()
    assert "cached q disagrees with the image lengths" in MorphismCandidate(("a", "b"), ("a", "b"), 9).problems()


def test_apply_morphism():
    m = morphism(("a", "b"), ("ab", "ba"))
    assert apply_morphism(m, "ab") == "abba"
    assert apply_morphism(m, "Ab") == "BAba"
    with pytest.raises(Mismatch):
        apply_morphism(m, "x")


# -- L_h geometry ----------------------------------------------------------------


def test_in_Lh_length_clause():
    h = "ab" * 100
    assert not in_Lh(CTX, reduce_word(h + "a" * 599 + inv_word(h)), h)
    assert in_Lh(CTX, reduce_word(h + "a" * 600 + inv_word(h)), h)


def test_in_Lh_sandwich_and_shrink():
    h = "ab" * 100
    g = reduce_word(h + "a" * 600 + inv_word(h))
    assert len(g) == 1000
    assert in_Lh(CTX, g, h)
    assert len(reduce_word(inv_word(h) + g + h)) < len(g)


def test_in_Lh_disjoint_geodesic():
    assert not in_Lh(CTX, "a" * 1000, "b" * 200)


def test_in_Lh_needs_both_ends():
    h = "ab" * 100
    # passes near h at the start but never returns near g*h
    assert not in_Lh(CTX, reduce_word(h + "a" * 800), h)


# -- shortness -------------------------------------------------------------------


def test_identity_is_short():
    v = is_short(CTX, morphism(("a", "b"), ("a", "b")))
    assert v.short and v.witness is None and v.exhaustive


def test_conjugated_identity_classification():
    ident = morphism(("a", "b"), ("a", "b"))
    h = "ab" * 300
    m = post_conjugate(CTX, ident, h)
    assert m.q == 1201
    v = is_short(CTX, m)
    assert not v.short and v.clause == 1
    assert v.witness == h[:200]
    # lemma: conjugating back by the witness strictly shrinks q
    assert post_conjugate(CTX, m, inv_word(v.witness)).q < m.q
    # below the length floor every L_h is empty, so 300 letters stay short
    assert is_short(CTX, post_conjugate(CTX, ident, "ab" * 150)).short


def test_shorten_ident_conjugates():
    ident = morphism(("a", "b"), ("a", "b"))
    res, trace = shorten_with_trace(CTX, post_conjugate(CTX, ident, "ab" * 300))
    assert trace == (1201, 801)
    assert is_short(CTX, res).short
    already = post_conjugate(CTX, ident, "ab" * 150)
    res2, trace2 = shorten_with_trace(CTX, already)
    assert res2 is already and trace2 == (601,)
    assert shorten(CTX, already) is already


def test_shorten_randomized_batch():
    rng = random.Random(7)
    for _ in range(50):
        psi = morphism(("a", "b"), (rand_word(rng, rng.randint(1, 8)), rand_word(rng, rng.randint(1, 8))))
        m = post_conjugate(CTX, psi, rand_word(rng, rng.randint(200, 600)))
        res, trace = shorten_with_trace(CTX, m)
        assert is_short(CTX, res).short
        assert all(x > y for x, y in zip(trace, trace[1:]))


def test_non_decreasing_guard_fires_on_perverse_thresholds():
    # c_near close to c_h lets a witness certify while growing the other image
    ctx = hyp_context(rank=2, c_in=7, c_h=3, c_near=2)
    m = morphism(("a", "b"), ("aaaaabA", "abbbbbA"))
    assert not is_short(ctx, m).short
    with pytest.raises(NonDecreasingStep):
        shorten_with_trace(ctx, m)


def test_restricted_witnesses_match_full_sphere_at_scaled_thresholds():
    ctx = hyp_context(rank=2, c_in=10, c_h=2, c_near=0)
    ident = morphism(("a", "b"), ("a", "b"))
    for h in ball_words(2, 5):
        m = post_conjugate(ctx, ident, h)
        assert is_short(ctx, m).short == full_sphere_short(ctx, m)
    bulky = morphism(("a", "b"), ("abaB", "bbA"))
    for h in ball_words(2, 4):
        m = post_conjugate(ctx, bulky, h)
        assert is_short(ctx, m).short == full_sphere_short(ctx, m)


# -- counting --------------------------------------------------------------------


def test_count_identity_radius_zero():
    assert count_short_postconjugates(CTX, morphism(("a", "b"), ("a", "b")), 0) == (1, ("",))


def test_count_matches_brute_list_at_scaled_thresholds():
    ctx = hyp_context(rank=2, c_in=10, c_h=2, c_near=0)
    ident = morphism(("a", "b"), ("a", "b"))
    cnt, hs = count_short_postconjugates(ctx, ident, 5)
    brute = [h for h in ball_words(2, 5) if full_sphere_short(ctx, post_conjugate(ctx, ident, h))]
    assert cnt == len(hs) == len(brute)
    assert list(hs) == brute
    assert "" in hs


def test_count_preconditions():
    with pytest.raises(ElementaryImage):
        count_short_postconjugates(CTX, morphism(("a", "b"), ("ab", "abab")), 1)
    with pytest.raises(ElementaryImage):
        count_short_postconjugates(CTX, morphism(("a", "b"), ("", "b")), 1)
    with pytest.raises(ElementaryImage):
        count_short_postconjugates(CTX, morphism(("a", "b"), ("ab", "ab")), 1)


# -- oracle mode -----------------------------------------------------------------


def test_oracle_mode_agrees_with_exact():
    ctx_o = hyp_context(oracle=reduce_word)
    ident = morphism(("a", "b"), ("a", "b"))
    h = "ab" * 300
    m = post_conjugate(ctx_o, ident, h)
    v = is_short(ctx_o, m)
    assert not v.short and v.witness == h[:200] and not v.exhaustive
    assert is_short(ctx_o, ident).short and not is_short(ctx_o, ident).exhaustive
    g = reduce_word(h[:200] + "a" * 800 + inv_word(h[:200]))
    assert in_Lh(ctx_o, g, h[:200]) and in_Lh(CTX, g, h[:200])
    assert not in_Lh(ctx_o, "a" * 1000, "b" * 200)
    res, trace = shorten_with_trace(ctx_o, m)
    assert trace == (1201, 801)
    with pytest.raises(OracleRequired):
        count_short_postconjugates(ctx_o, m, 1)
