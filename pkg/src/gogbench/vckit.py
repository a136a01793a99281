"""Virtually cyclic subgroups of graph-of-finite-groups fundamental groups.

classify() settles whether a finitely generated subgroup is finite, a Z-group
(finite-by-Z), of dihedral type (finite-by-D_infinity), or non-elementary,
with witnesses in every case.  The decision runs on Bass-Serre geometry: a
hyperbolic element of the subgroup is produced, and every generator either
preserves its axis (giving a signed translation length) or escapes, which is
conclusive.  classify_by_search() is the enumeration counterpart: two
interleaved semi-machines that only ever answer after a verified generating
datum or a verified free pair, and raise ResourceLimit when the budget runs
out.  Both must agree whenever both answer.

Z-groups and dihedral-type groups are handed around as VcPresentation values
(finite part table plus twisting data); ZGroupModel / DihedralModel do exact
arithmetic in the presented group, which is what the automorphism and
isomorphism listings are checked against.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from . import fingroup
from .errors import (
    Mismatch,
    NotAPath,
    NotElementary,
    NotZGroup,
    ParseError,
    ResourceLimit,
)
from .gogcore import (
    GraphOfGroups,
    Word,
    _AxisCalc,
    _axis_orientation,
    _cyclic_core,
    _reduce,
    common_fixed_vertex,
    element_order,
    format_word,
    is_equal,
    normal_form,
    pi1_presentation,
    translation_length,
    w_conj,
    w_end,
    w_inv,
    w_mul,
    w_pow,
    w_vertex,
)

CLASSIFY_BUDGET = 10 ** 6

FINITE = "Finite"
Z_GROUP = "ZGroup"
DIHEDRAL = "DihedralType"
NON_ELEMENTARY = "NonElementary"


@dataclass(frozen=True)
class VcPresentation:
    """Finite-by-(Z or D_infinity) group: finite part table plus twisting.

    table is the multiplication table of the maximal finite normal subgroup N
    (identity at index 0).  ZGroup: one extra generator t acting on N by
    action_t.  DihedralType: generators sigma, tau acting by action_sigma /
    action_tau with squares sigma_sq, tau_sq in N.
    """

    tag: str
    table: tuple
    action_t: tuple = ()
    action_sigma: tuple = ()
    action_tau: tuple = ()
    sigma_sq: int = 0
    tau_sq: int = 0

    def finite_part(self) -> fingroup.FiniteGroup:
        return fingroup.from_table(self.table)

    def problems(self) -> list:
        """Consistency of the relations, by rebuilding the rules on N."""
        try:
            N = self.finite_part()
        except Exception as exc:
            return [f"finite part is not a group: {exc}"]
        errs = []

        def check_action(name, act):
            if sorted(act) != list(range(N.order)):
                errs.append(f"{name} is not a permutation of the finite part")
                return False
            for x in N.elements():
                for y in N.elements():
                    if act[N.mul(x, y)] != N.mul(act[x], act[y]):
                        errs.append(f"{name} is not an automorphism")
                        return False
            return True

        def check_square(name, act, sq):
            if not 0 <= sq < N.order:
                errs.append(f"{name}_sq outside the finite part")
                return
            if act[sq] != sq:
                errs.append(f"{name} does not fix its own square")
            for x in N.elements():
                if act[act[x]] != N.conjugate(sq, x):
                    errs.append(f"action_{name} squared is not ad({name}^2)")
                    break

        if self.tag == Z_GROUP:
            check_action("action_t", self.action_t)
        elif self.tag == DIHEDRAL:
            if check_action("action_sigma", self.action_sigma):
                check_square("sigma", self.action_sigma, self.sigma_sq)
            if check_action("action_tau", self.action_tau):
                check_square("tau", self.action_tau, self.tau_sq)
        else:
            errs.append(f"unknown tag {self.tag!r}")
        return errs


@dataclass(frozen=True)
class VcClassification:
    """Verdict of classify(): tag plus the data that proves it.

    Finite: every element, as words.  ZGroup: the maximal finite normal
    subgroup N (all elements, identity first) and an infinite-order t with
    <N, t> = <S>.  DihedralType: N plus two reflection generators sigma, tau.
    NonElementary: a pair (g, h) with [g^2, h^2] of infinite order.
    """

    tag: str
    elements: tuple = ()
    normal: tuple = ()
    t: Optional[Word] = None
    sigma: Optional[Word] = None
    tau: Optional[Word] = None
    witness: Optional[tuple] = None
    presentation: Optional[VcPresentation] = None

    @property
    def generators(self) -> tuple:
        if self.tag == FINITE:
            return self.elements
        if self.tag == Z_GROUP:
            return self.normal[1:] + (self.t,)
        if self.tag == DIHEDRAL:
            return self.normal[1:] + (self.sigma, self.tau)
        raise NotElementary("a non-elementary subgroup has no listed generators")


@dataclass(frozen=True)
class VcOvergroup:
    """A VC(...) or Zmax(...) overgroup: generators plus its own structure."""

    generators: tuple
    classification: VcClassification
    input_is_whole: bool

    @property
    def is_zmax(self) -> bool:
        return self.input_is_whole

    @property
    def presentation(self) -> VcPresentation:
        return self.classification.presentation


@dataclass(frozen=True)
class VcMap:
    """Isomorphism datum between presented VC groups.

    psi: image index in the target finite part for each source index.
    ZGroup: t_image = (eps, n) meaning t -> t^eps * n.  DihedralType:
    sigma_image / tau_image are model elements (n, syms).
    """

    psi: tuple
    t_image: Optional[tuple] = None
    sigma_image: Optional[tuple] = None
    tau_image: Optional[tuple] = None


class _Meter:
    def __init__(self, budget: int):
        self.left = budget

    def spend(self, k: int = 1) -> None:
        self.left -= k
        if self.left < 0:
            raise ResourceLimit("classification budget exhausted; undecided")


def _check_loops(gog, S) -> int:
    if not S:
        raise Mismatch("classification needs a non-empty generating set")
    base = S[0].base
    for s in S:
        if s.base != base:
            raise Mismatch("generators must be loops at a common base vertex")
        if w_end(gog, s) != base:
            raise NotAPath("generators must be loops")
    return base


def _hyperbolic_in(gog, S) -> Optional[Word]:
    """A hyperbolic element of <S>: a generator or a pairwise product."""
    for s in S:
        if translation_length(gog, s):
            return s
    for a, b in itertools.permutations(S, 2):
        p = w_mul(gog, a, b)
        if translation_length(gog, p):
            return p
    return None


def _square_commutator(gog, g: Word, h: Word) -> Word:
    return w_mul(gog, w_pow(gog, g, 2), w_pow(gog, h, 2),
                 w_pow(gog, g, -2), w_pow(gog, h, -2))


def _free_pair(gog, S, budget: int) -> tuple:
    """(g, h) in <S> with [g^2, h^2] of infinite order, by ball search."""
    meter = _Meter(budget)
    gens = [normal_form(gog, s).word for s in S]
    gens += [normal_form(gog, w_inv(gog, s)).word for s in S]
    ball = [Word(S[0].base, ())]
    keys = {format_word(ball[0])}
    tested = set()
    while True:
        frontier = []
        for w in ball:
            for g in gens:
                meter.spend()
                nf = normal_form(gog, w_mul(gog, w, g)).word
                key = format_word(nf)
                if key not in keys:
                    keys.add(key)
                    frontier.append(nf)
        ball.extend(frontier)
        for i, g in enumerate(ball):
            for j in range(i + 1, len(ball)):
                if (i, j) in tested:
                    continue
                tested.add((i, j))
                meter.spend(4)
                h = ball[j]
                if element_order(gog, _square_commutator(gog, g, h)) == math.inf:
                    return (g, h)
        if not frontier:
            raise Mismatch("no free pair exists: the subgroup is elementary")


def _xgcd(a: int, b: int) -> tuple:
    """(g, x, y) with x*a + y*b = g = gcd(a, b), g >= 0."""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_x, x = x, old_x - q * x
        old_y, y = y, old_y - q * y
    if old_r < 0:
        old_r, old_x, old_y = -old_r, -old_x, -old_y
    return old_r, old_x, old_y


def _match(gog, w: Word, words) -> Optional[int]:
    for i, m in enumerate(words):
        if is_equal(gog, w, m):
            return i
    return None


def _presentation_from_words(gog, nwords, t=None, sigma=None, tau=None) -> VcPresentation:
    """Build the VcPresentation from explicit element words of N.

    nwords lists all of N with the identity first; actions and squares must
    land back in N (guaranteed for honest inputs, asserted here).
    """
    table = []
    for a in nwords:
        row = []
        for b in nwords:
            i = _match(gog, w_mul(gog, a, b), nwords)
            assert i is not None
            row.append(i)
        table.append(tuple(row))

    def act(w):
        out = []
        for m in nwords:
            i = _match(gog, w_conj(gog, w, m), nwords)
            assert i is not None
            out.append(i)
        return tuple(out)

    if sigma is None:
        return VcPresentation(tag=Z_GROUP, table=tuple(table), action_t=act(t))
    ssq = _match(gog, w_pow(gog, sigma, 2), nwords)
    tsq = _match(gog, w_pow(gog, tau, 2), nwords)
    assert ssq is not None and tsq is not None
    return VcPresentation(
        tag=DIHEDRAL,
        table=tuple(table),
        action_sigma=act(sigma),
        action_tau=act(tau),
        sigma_sq=ssq,
        tau_sq=tsq,
    )


def classify(gog: GraphOfGroups, S: Sequence[Word], budget: int = CLASSIFY_BUDGET) -> VcClassification:
    """Exact classification of <S> with proving data.

    Geometry does the deciding: a common fixed vertex gives Finite; otherwise
    a hyperbolic u in <S> exists and every generator either maps the axis of
    u to itself (signed translation bookkeeping yields the Z / dihedral data)
    or moves it off itself, which certifies NonElementary.
    """
    S = tuple(S)
    base = _check_loops(gog, S)

    if all(translation_length(gog, s) == 0 for s in S):
        path = common_fixed_vertex(gog, list(S))
        if path is not None:
            v = w_end(gog, path)
            G = gog.vertex_groups[v]
            seeds = []
            for s in S:
                red = _reduce(gog, v, w_mul(gog, w_inv(gog, path), s, path).letters)
                assert len(red) == 1
                seeds.append(red[0][2])
            M = fingroup.subgroup_generated(G, seeds)
            elements = tuple(
                normal_form(gog, w_mul(gog, path, w_vertex(v, g), w_inv(gog, path))).word
                for g in M.elements
            )
            return VcClassification(FINITE, elements=elements)

    u = _hyperbolic_in(gog, S)
    assert u is not None  # no common fixed vertex forces a hyperbolic product
    cu = _cyclic_core(gog, base, _reduce(gog, base, u.letters))
    ax = _AxisCalc(gog, cu)
    n = cu.edge_count
    conj = cu.conj
    iconj = w_inv(gog, conj)

    def cback(w: Word) -> Word:
        return normal_form(gog, w_mul(gog, conj, w, iconj)).word

    s0s = [w_mul(gog, iconj, s, conj) for s in S]
    signs = []
    for s0 in s0s:
        sgn = _axis_orientation(gog, ax, w_conj(gog, s0, ax.core_word), n)
        if sgn is None:
            return VcClassification(NON_ELEMENTARY, witness=_free_pair(gog, S, budget))
        signs.append(sgn)

    plus = [s0 for s0, sg in zip(s0s, signs) if sg > 0]
    minus = [s0 for s0, sg in zip(s0s, signs) if sg < 0]
    if minus:
        # index-2 end-preserving part, Schreier generators over {1, sig0}
        sig0 = minus[0]
        isig0 = w_inv(gog, sig0)
        kgens = (
            plus
            + [w_mul(gog, sig0, p, isig0) for p in plus]
            + [w_mul(gog, m, isig0) for m in minus]
            + [w_mul(gog, sig0, m) for m in minus]
        )
    else:
        sig0 = None
        kgens = list(plus)

    datum = []  # (word, signed translation length along the axis)
    for k in kgens:
        lk = translation_length(gog, k)
        if lk == 0:
            assert ax.in_pointwise_stab(k) is not None
            datum.append((k, 0))
        else:
            sgn = _axis_orientation(gog, ax, k, lk)
            assert sgn is not None  # end-preserving hyperbolics translate the line
            datum.append((k, sgn * lk))

    d = 0
    for _, sl in datum:
        d = math.gcd(d, sl)
    assert d > 0  # otherwise <S> would fix the line and be finite

    t0 = None
    cur = 0
    for w, sl in datum:
        if sl == 0:
            continue
        if t0 is None:
            t0, cur = (w, sl) if sl > 0 else (w_inv(gog, w), -sl)
        elif cur != d:
            g, x, y = _xgcd(cur, sl)
            t0 = w_mul(gog, w_pow(gog, t0, x), w_pow(gog, w, y))
            cur = g
    assert cur == d
    t0 = normal_form(gog, t0).word

    G = gog.vertex_groups[cu.base]

    def p_elt(w: Word) -> int:
        s = ax.in_pointwise_stab(w)
        assert s is not None
        return s

    seeds = {p_elt(w_mul(gog, w, w_pow(gog, t0, -(sl // d)))) for w, sl in datum}
    nset = {0} | seeds
    while True:
        new = set()
        for a in nset:
            new.add(G.inverse(a))
            new.add(p_elt(w_conj(gog, t0, w_vertex(cu.base, a))))
            for b in nset:
                new.add(G.mul(a, b))
        if new <= nset:
            break
        nset |= new
    if sig0 is not None:
        for a in nset:
            assert p_elt(w_conj(gog, sig0, w_vertex(cu.base, a))) in nset

    nwords = tuple(cback(w_vertex(cu.base, a)) for a in sorted(nset))
    tword = cback(t0)
    if sig0 is None:
        pres = _presentation_from_words(gog, nwords, t=tword)
        out = VcClassification(Z_GROUP, normal=nwords, t=tword, presentation=pres)
    else:
        sword = cback(sig0)
        tauword = cback(w_mul(gog, sig0, t0))
        pres = _presentation_from_words(gog, nwords, t=tword, sigma=sword, tau=tauword)
        out = VcClassification(
            DIHEDRAL, normal=nwords, sigma=sword, tau=tauword, presentation=pres
        )
    for s in S:
        assert vc_contains(gog, out, s)
    return out


def _z_part_contains(gog, nwords, t: Word, w: Word) -> bool:
    # w in N<t> forces tl(w) = |k| tl(t): N fixes the axis of t pointwise
    lt = translation_length(gog, t)
    lw = translation_length(gog, w)
    if lw % lt:
        return False
    k = lw // lt
    return any(
        _match(gog, w_mul(gog, w, w_pow(gog, t, -kk)), nwords) is not None
        for kk in {k, -k}
    )


def vc_contains(gog: GraphOfGroups, data: VcClassification, w: Word) -> bool:
    """Membership of a loop in the subgroup a classification describes."""
    if data.tag == FINITE:
        return _match(gog, w, data.elements) is not None
    if data.tag == Z_GROUP:
        return _z_part_contains(gog, data.normal, data.t, w)
    if data.tag == DIHEDRAL:
        t = w_mul(gog, data.sigma, data.tau)
        return _z_part_contains(gog, data.normal, t, w) or _z_part_contains(
            gog, data.normal, t, w_mul(gog, w_inv(gog, data.sigma), w)
        )
    raise NotElementary("membership needs an elementary classification")


def _stab_overgroup(gog, cls: VcClassification, want_sigma: bool) -> VcOvergroup:
    """Setwise (or end-preserving) stabilizer of the invariant line."""
    u = cls.t if cls.tag == Z_GROUP else w_mul(gog, cls.sigma, cls.tau)
    cu = _cyclic_core(gog, u.base, _reduce(gog, u.base, u.letters))
    ax = _AxisCalc(gog, cu)
    n = cu.edge_count
    conj = cu.conj
    iconj = w_inv(gog, conj)

    def cback(w: Word) -> Word:
        return normal_form(gog, w_mul(gog, conj, w, iconj)).word

    G = gog.vertex_groups[cu.base]

    # minimal positive translation: anything moving the base to axis slot j
    # is pi(j) * p, so scan divisors of n in increasing order
    tmin = None
    k0 = n
    for dd in (d for d in range(1, n + 1) if n % d == 0):
        if ax.axis_vertex(dd) != cu.base:
            continue
        for p in G.elements():
            cand = w_mul(gog, ax.pi(dd), w_vertex(cu.base, p))
            if translation_length(gog, cand) == dd and _axis_orientation(gog, ax, cand, dd) == 1:
                tmin, k0 = cand, dd
                break
        if tmin is not None:
            break
    assert tmin is not None  # the core itself translates by n

    # all end-swappers form one coset of the end-preserving part, so one
    # residue class of base images mod k0 carries them all
    sig = None
    if want_sigma:
        for m in range(k0):
            if ax.axis_vertex(m) != cu.base:
                continue
            for p in G.elements():
                cand = w_mul(gog, ax.pi(m), w_vertex(cu.base, p))
                if _axis_orientation(gog, ax, w_conj(gog, cand, ax.core_word), n) == -1:
                    sig = cand
                    break
            if sig is not None:
                break

    nwords = tuple(cback(w_vertex(cu.base, a)) for a in sorted(ax.pointwise_stab()))
    tword = cback(tmin)
    if sig is None:
        pres = _presentation_from_words(gog, nwords, t=tword)
        over = VcClassification(Z_GROUP, normal=nwords, t=tword, presentation=pres)
    else:
        sword = cback(sig)
        tauword = cback(w_mul(gog, sig, tmin))
        pres = _presentation_from_words(gog, nwords, t=tword, sigma=sword, tau=tauword)
        over = VcClassification(
            DIHEDRAL, normal=nwords, sigma=sword, tau=tauword, presentation=pres
        )
    gens = over.generators
    whole = all(vc_contains(gog, cls, g) for g in gens)
    return VcOvergroup(generators=gens, classification=over, input_is_whole=whole)


def vc_closure(gog: GraphOfGroups, S: Sequence[Word], budget: int = CLASSIFY_BUDGET) -> VcOvergroup:
    """VC(<S>): the maximal virtually cyclic subgroup containing <S>."""
    cls = classify(gog, S, budget)
    if cls.tag not in (Z_GROUP, DIHEDRAL):
        raise NotElementary("VC closure needs an infinite virtually cyclic input")
    return _stab_overgroup(gog, cls, want_sigma=True)


def zmax_closure(gog: GraphOfGroups, S: Sequence[Word], budget: int = CLASSIFY_BUDGET) -> VcOvergroup:
    """Zmax(<S>): the maximal Z-subgroup containing the Z-group <S>."""
    cls = classify(gog, S, budget)
    if cls.tag == DIHEDRAL:
        raise NotZGroup("the Z-maximal overgroup needs a Z-group input")
    if cls.tag != Z_GROUP:
        raise NotElementary("Zmax closure needs an infinite virtually cyclic input")
    return _stab_overgroup(gog, cls, want_sigma=False)


# -- exact arithmetic in presented VC groups ----------------------------------


class ZGroupModel:
    """Elements (k, n) standing for t^k * n."""

    def __init__(self, pres: VcPresentation):
        if pres.tag != Z_GROUP:
            raise Mismatch("ZGroupModel needs a ZGroup presentation")
        self.N = pres.finite_part()
        self.act = pres.action_t
        self.act_inv = tuple(self.act.index(i) for i in range(len(self.act)))
        self.identity = (0, 0)

    def _act_pow(self, n: int, j: int) -> int:
        perm = self.act if j > 0 else self.act_inv
        for _ in range(abs(j)):
            n = perm[n]
        return n

    def mul(self, x, y):
        k, n = x
        k2, n2 = y
        return (k + k2, self.N.mul(self._act_pow(n, -k2), n2))

    def inv(self, x):
        k, n = x
        return (-k, self._act_pow(self.N.inverse(n), k))

    def pow(self, x, j: int):
        out = self.identity
        y = x if j >= 0 else self.inv(x)
        for _ in range(abs(j)):
            out = self.mul(out, y)
        return out

    def apply(self, vcmap: VcMap, x):
        """Image of x under the map datum (t -> t^eps * n, psi on N)."""
        k, n = x
        return self.mul(self.pow(vcmap.t_image, k), (0, vcmap.psi[n]))


class DihedralModel:
    """Elements (n, syms): n in N times an alternating word in sigma, tau.

    syms entries are "s" and "t"; the empty word is the finite part.
    """

    def __init__(self, pres: VcPresentation):
        if pres.tag != DIHEDRAL:
            raise Mismatch("DihedralModel needs a DihedralType presentation")
        self.N = pres.finite_part()
        self.actions = {"s": pres.action_sigma, "t": pres.action_tau}
        self.squares = {"s": pres.sigma_sq, "t": pres.tau_sq}
        self.identity = (0, ())

    def _act_word(self, syms, n: int) -> int:
        # syms * n = _act_word(syms, n) * syms
        for sym in reversed(syms):
            n = self.actions[sym][n]
        return n

    def _reduced(self, n: int, syms: list):
        i = 0
        while i + 1 < len(syms):
            if syms[i] == syms[i + 1]:
                popped = self._act_word(tuple(syms[:i]), self.squares[syms[i]])
                n = self.N.mul(n, popped)
                del syms[i : i + 2]
                i = max(i - 1, 0)
            else:
                i += 1
        return (n, tuple(syms))

    def mul(self, x, y):
        n, w = x
        n2, w2 = y
        return self._reduced(self.N.mul(n, self._act_word(w, n2)), list(w + w2))

    def inv(self, x):
        n, w = x
        rev = (0, tuple(reversed(w)))
        z, leftover = self.mul(rev, x)
        assert leftover == ()
        return self.mul((self.N.inverse(z), ()), rev)

    def apply(self, vcmap: VcMap, x):
        n, w = x
        out = (vcmap.psi[n], ())
        for sym in w:
            out = self.mul(out, vcmap.sigma_image if sym == "s" else vcmap.tau_image)
        return out


def vc_isomorphisms(P1: VcPresentation, P2: VcPresentation) -> list:
    """All isomorphisms P1 -> P2 (Z-groups), or all up to inner (dihedral)."""
    if P1.tag != P2.tag or len(P1.table) != len(P2.table):
        return []
    N1 = P1.finite_part()
    N2 = P2.finite_part()
    psis = fingroup.isomorphisms(N1, N2)

    if P1.tag == Z_GROUP:
        m2 = ZGroupModel(P2)
        out = []
        for psi in psis:
            for eps in (1, -1):
                for n2 in N2.elements():
                    tim = (eps, n2)
                    itim = m2.inv(tim)
                    if all(
                        m2.mul(m2.mul(tim, (0, psi(x))), itim) == (0, psi(P1.action_t[x]))
                        for x in N1.elements()
                    ):
                        out.append(VcMap(psi=psi.images, t_image=tim))
        return out

    m2 = DihedralModel(P2)
    refl = [(n, (sym,)) for sym in ("s", "t") for n in N2.elements()]
    found = []
    for psi in psis:
        for si in refl:
            for ti in refl:
                if si[1] == ti[1]:
                    continue  # images in one reflection class cannot generate
                isi, iti = m2.inv(si), m2.inv(ti)
                if m2.mul(si, si) != (psi(P1.sigma_sq), ()):
                    continue
                if m2.mul(ti, ti) != (psi(P1.tau_sq), ()):
                    continue
                if not all(
                    m2.mul(m2.mul(si, (psi(x), ())), isi) == (psi(P1.action_sigma[x]), ())
                    and m2.mul(m2.mul(ti, (psi(x), ())), iti) == (psi(P1.action_tau[x]), ())
                    for x in N1.elements()
                ):
                    continue
                found.append(VcMap(psi=psi.images, sigma_image=si, tau_image=ti))

    # dihedral maps are listed up to inner; conjugating by anything with a
    # nonzero translation part lengthens a length-1 reflection image, so
    # short conjugators decide inner equivalence
    alt = [()]
    for L in range(1, 5):
        alt.append(tuple("s" if i % 2 == 0 else "t" for i in range(L)))
        alt.append(tuple("t" if i % 2 == 0 else "s" for i in range(L)))
    conjs = [(n, w) for n in N2.elements() for w in alt]
    kept = []
    for f in found:
        inner = False
        for rep in kept:
            for c in conjs:
                ic = m2.inv(c)
                if (
                    m2.mul(m2.mul(c, rep.sigma_image), ic) == f.sigma_image
                    and m2.mul(m2.mul(c, rep.tau_image), ic) == f.tau_image
                    and all(
                        m2.mul(m2.mul(c, (rep.psi[x], ())), ic) == (f.psi[x], ())
                        for x in N1.elements()
                    )
                ):
                    inner = True
                    break
            if inner:
                break
        if not inner:
            kept.append(f)
    return kept


def vc_automorphisms(P: VcPresentation) -> list:
    return vc_isomorphisms(P, P)


# -- serialization -------------------------------------------------------------


def format_vc_block(P: VcPresentation) -> str:
    lines = [f"tag = {P.tag}"]
    lines.append("table = " + " ; ".join(" ".join(str(x) for x in row) for row in P.table))
    if P.tag == Z_GROUP:
        lines.append("action_t = " + " ".join(str(x) for x in P.action_t))
    else:
        lines.append("action_sigma = " + " ".join(str(x) for x in P.action_sigma))
        lines.append("action_tau = " + " ".join(str(x) for x in P.action_tau))
        lines.append(f"sigma_sq = {P.sigma_sq}")
        lines.append(f"tau_sq = {P.tau_sq}")
    return "\n".join(lines)


def parse_vc_block(text: str) -> VcPresentation:
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ParseError("expected key = value", line=lineno)
        key, _, val = line.partition("=")
        fields[key.strip()] = (val.strip(), lineno)

    def take(key):
        if key not in fields:
            raise ParseError(f"missing field {key!r}")
        return fields.pop(key)[0]

    def ints(chunk):
        try:
            return tuple(int(x) for x in chunk.split())
        except ValueError:
            raise ParseError("expected a list of integers")

    tag = take("tag")
    if tag not in (Z_GROUP, DIHEDRAL):
        raise ParseError(f"unknown vc tag {tag!r}")
    table = tuple(ints(row) for row in take("table").split(";"))
    if tag == Z_GROUP:
        P = VcPresentation(tag=tag, table=table, action_t=ints(take("action_t")))
    else:
        P = VcPresentation(
            tag=tag,
            table=table,
            action_sigma=ints(take("action_sigma")),
            action_tau=ints(take("action_tau")),
            sigma_sq=int(take("sigma_sq")),
            tau_sq=int(take("tau_sq")),
        )
    if fields:
        key = next(iter(fields))
        raise ParseError(f"unknown field {key!r}", line=fields[key][1])
    errs = P.problems()
    if errs:
        raise ParseError("; ".join(errs))
    return P


# -- the enumeration machines --------------------------------------------------


def _grow_ball(gog, ball, keys, gens, meter) -> bool:
    frontier = []
    for w in ball:
        for g in gens:
            meter.spend()
            nf = normal_form(gog, w_mul(gog, w, g)).word
            key = format_word(nf)
            if key not in keys:
                keys.add(key)
                frontier.append(nf)
    ball.extend(frontier)
    return bool(frontier)


def _order_identity_first(gog, mwords) -> list:
    ident = Word(mwords[0].base, ())
    rest = [w for w in mwords if not is_equal(gog, w, ident)]
    return [normal_form(gog, ident).word] + sorted(rest, key=format_word)


def classify_by_search(gog: GraphOfGroups, S: Sequence[Word], budget: int = CLASSIFY_BUDGET) -> VcClassification:
    """Interleaved enumeration machines, no geometry.

    Machine A looks for generating data M u {g} / M u {g, sigma}: a finite
    subgroup M inside <S> normalized by S, an infinite-order g, and every
    generator accounted for in the cosets M g^k (and M g^k sigma).  Machine B
    looks for a pair g, h whose square commutator has infinite order.  Both
    verdicts are verified before they are returned, so this can never
    disagree with classify(); ResourceLimit means undecided, never a verdict.
    """
    S = tuple(S)
    base = _check_loops(gog, S)
    meter = _Meter(budget)

    def eq(w1, w2):
        meter.spend()
        return is_equal(gog, w1, w2)

    def member(w, words):
        return any(eq(w, m) for m in words)

    def in_coset_band(mwords, g, lg, w):
        # w in M g^k forces tl(w) = |k| lg when the datum is honest
        meter.spend()
        lw = translation_length(gog, w)
        if lw % lg:
            return False
        k = lw // lg
        return any(member(w_mul(gog, w, w_pow(gog, g, -kk)), mwords) for kk in {k, -k})

    sgens = [normal_form(gog, s).word for s in S]
    sgens += [normal_form(gog, w_inv(gog, s)).word for s in S]

    # whole-group ball for conjugators, rebased from vertex 0 to the S base
    p0 = gog.tree_path(base)
    ip0 = w_inv(gog, p0)
    pres = pi1_presentation(gog)
    ggens = []
    for g in pres.gen_words:
        loop = normal_form(gog, w_mul(gog, ip0, g, p0)).word
        ggens += [loop, normal_form(gog, w_inv(gog, loop)).word]
    vpaths = [w_mul(gog, ip0, gog.tree_path(v)) for v in range(gog.graph.n_vertices)]
    vertex_subs = [
        (v, H)
        for v, Gv in enumerate(gog.vertex_groups)
        for H in fingroup.all_subgroups(Gv)
    ]

    ident = normal_form(gog, Word(base, ())).word
    sball, skeys = [ident], {format_word(ident)}
    gball, gkeys = [ident], {format_word(ident)}
    tested_pairs = set()

    while True:
        grew = _grow_ball(gog, sball, skeys, sgens, meter)
        if not grew:
            return VcClassification(FINITE, elements=tuple(sball))
        _grow_ball(gog, gball, gkeys, ggens, meter)

        # machine A: a verified virtually cyclic generating datum
        tried = set()
        for v, H in vertex_subs:
            q = vpaths[v]
            iq = w_inv(gog, q)
            for x in gball:
                ix = w_inv(gog, x)
                mwords = [
                    normal_form(gog, w_mul(gog, x, q, w_vertex(v, h), iq, ix)).word
                    for h in H.elements
                ]
                msig = tuple(sorted(format_word(m) for m in mwords))
                if msig in tried:
                    continue
                tried.add(msig)
                if not all(member(m, sball) for m in mwords):
                    continue
                if not all(
                    member(w_conj(gog, s, m), mwords) for s in S for m in mwords
                ):
                    continue
                for g in sball:
                    meter.spend()
                    lg = translation_length(gog, g)
                    if lg == 0:
                        continue
                    if all(in_coset_band(mwords, g, lg, s) for s in S):
                        nwords = _order_identity_first(gog, mwords)
                        return VcClassification(
                            Z_GROUP,
                            normal=tuple(nwords),
                            t=g,
                            presentation=_presentation_from_words(gog, nwords, t=g),
                        )
                    for sig in sball:
                        meter.spend()
                        if member(sig, mwords):
                            continue
                        if not member(w_pow(gog, sig, 2), mwords):
                            continue
                        if not member(w_mul(gog, sig, g, sig, g), mwords):
                            continue
                        if not all(
                            member(w_conj(gog, sig, m), mwords) for m in mwords
                        ):
                            continue
                        isig = w_inv(gog, sig)
                        if all(
                            in_coset_band(mwords, g, lg, s)
                            or in_coset_band(mwords, g, lg, w_mul(gog, s, isig))
                            for s in S
                        ):
                            nwords = _order_identity_first(gog, mwords)
                            tau = normal_form(gog, w_mul(gog, sig, g)).word
                            return VcClassification(
                                DIHEDRAL,
                                normal=tuple(nwords),
                                sigma=sig,
                                tau=tau,
                                presentation=_presentation_from_words(
                                    gog, nwords, t=g, sigma=sig, tau=tau
                                ),
                            )

        # machine B: a verified free pair
        for i, g in enumerate(sball):
            for j in range(i + 1, len(sball)):
                if (i, j) in tested_pairs:
                    continue
                tested_pairs.add((i, j))
                meter.spend(4)
                h = sball[j]
                if element_order(gog, _square_commutator(gog, g, h)) == math.inf:
                    return VcClassification(NON_ELEMENTARY, witness=(g, h))
