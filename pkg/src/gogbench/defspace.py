"""Deformation-space exploration for graphs of finite groups.

A graph of finite groups is reduced when every edge whose monomorphism is
onto is a loop.  Within one deformation space, all reduced graphs are
connected by slide moves, each of which re-routes one oriented edge across
another edge sharing its terminus.  Saturating a reduced graph under slides,
up to graph-of-groups isomorphism, therefore enumerates the finitely many
reduced shapes in the space.  That enumeration carries enough bookkeeping to
decide isomorphism of virtually free groups presented by such graphs, to
assemble a finite generating set of their outer automorphism groups, and to
answer the Whitehead problems for tuples of finite-order elements.

Every move comes with an explicit identification of fundamental groups, kept
as words so composites stay exact: collapses re-route letters through the
collapsed edge, slides substitute the slid edge letter by its detour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Optional, Sequence

from .errors import (
    CapExceeded,
    InvalidSlide,
    Mismatch,
    NotAPath,
    NotReduced,
    Unsupported,
)
from .fingroup import Homomorphism, centralizer
from . import gogiso
from .gogiso import GoGIso, Pi1Map, delta_aut_generators, induced_pi1, out_T_generators
from .gogcore import (
    GraphOfGroups,
    SerreGraph,
    Word,
    common_fixed_vertex,
    element_order,
    is_conjugate,
    is_equal,
    normal_form,
    pi1_presentation,
    simultaneous_conjugacy,
    w_end,
    w_inv,
    w_mul,
    w_pow,
)

V0_CAP = 10_000
ORBIT_CAP = 1_000_000


# -- words as generator references -------------------------------------------


def word_to_refs(gog: GraphOfGroups, w: Word) -> tuple[int, ...]:
    """Rewrite a loop at vertex 0 over the pi1_presentation generators.

    Returns signed references: k+1 for generator k, negative for inverses.
    Tree edge letters contribute nothing; a vertex letter (v, g) becomes the
    reference of v{v}:{g}; a non-tree edge letter becomes the reference of
    its pair representative, negated on the reversed orientation.
    """
    if w.base != 0 or w_end(gog, w) != 0:
        raise NotAPath("only loops at vertex 0 name pi1 elements")
    tree = gog.maximal_tree
    offsets = []
    total = 0
    for G in gog.vertex_groups:
        offsets.append(total)
        total += G.order - 1
    nontree = {
        e: total + i
        for i, e in enumerate(e for e in gog.graph.pair_reps() if e not in tree)
    }
    refs: list[int] = []
    for L in w.letters:
        if L[0] == "v":
            if L[2]:
                refs.append(offsets[L[1]] + L[2])
        else:
            e = L[1]
            if e in tree:
                continue
            if e in nontree:
                refs.append(nontree[e] + 1)
            else:
                refs.append(-(nontree[gog.graph.inv[e]] + 1))
    return tuple(refs)


def pi1_apply(source: GraphOfGroups, m: Pi1Map, w: Word) -> Word:
    """Push a loop at vertex 0 of the map's source through the map."""
    return m.apply(word_to_refs(source, w))


def pi1_identity(gog: GraphOfGroups) -> Pi1Map:
    pres = pi1_presentation(gog)
    return Pi1Map(pres, gog, pres.gen_words)


def pi1_compose(mid: GraphOfGroups, outer: Pi1Map, inner: Pi1Map) -> Pi1Map:
    """outer after inner, where inner's target (= outer's source) is mid."""
    images = tuple(
        normal_form(outer.target, pi1_apply(mid, outer, w)).word
        for w in inner.images
    )
    return Pi1Map(inner.presentation, outer.target, images)


def _word_map_pi1(
    src: GraphOfGroups, dst: GraphOfGroups, push: Callable[[Word], Word]
) -> Pi1Map:
    """Package a letter-level word map as a Pi1Map, rebasing loops to 0."""
    pres = pi1_presentation(src)
    images = []
    for gw in pres.gen_words:
        w = push(gw)
        p = dst.tree_path(w.base)
        images.append(normal_form(dst, w_mul(dst, p, w, w_inv(dst, p))).word)
    m = Pi1Map(pres, dst, tuple(images))
    assert not m.problems()
    return m


# -- reduction ----------------------------------------------------------------


def is_reduced(gog: GraphOfGroups) -> tuple[bool, Optional[int]]:
    """Whether every onto edge monomorphism sits on a loop; else a witness."""
    g = gog.graph
    for e in range(g.n_edges()):
        if g.o(e) != g.t(e) and gog.monos[e].is_bijective():
            return False, e
    return True, None


def _collapse_edge(gog: GraphOfGroups, e: int):
    """Collapse the pair of e, absorbing t(e) into o(e); i_e must be onto.

    Returns (collapsed, fwd, back) where fwd/back map words letter by letter.
    A letter crossing the removed vertex is re-routed through the collapsed
    edge, which is what keeps back a homomorphism.
    """
    g = gog.graph
    v, u = g.t(e), g.o(e)
    ebar = g.inv[e]
    assert u != v and gog.monos[e].is_bijective()
    removed = (min(e, ebar), max(e, ebar))
    into_u = dict(zip(gog.monos[e].images, gog.monos[ebar].images))

    def vmap(w: int) -> int:
        return w - 1 if w > v else w

    kept = [f for f in range(g.n_edges()) if f not in removed]
    emap = {f: i for i, f in enumerate(kept)}
    term = tuple(vmap(u if g.t(f) == v else g.t(f)) for f in kept)
    inv = tuple(emap[g.inv[f]] for f in kept)
    vgroups = tuple(G for w, G in enumerate(gog.vertex_groups) if w != v)
    egroups = tuple(gog.edge_groups[f] for f in kept)
    monos = []
    for f in kept:
        if g.t(f) == v:
            imgs = tuple(into_u[x] for x in gog.monos[f].images)
            monos.append(Homomorphism(gog.edge_groups[f], gog.vertex_groups[u], imgs))
        else:
            monos.append(gog.monos[f])
    small = GraphOfGroups(
        SerreGraph(g.n_vertices - 1, term, inv), vgroups, egroups, tuple(monos)
    )
    assert not small.validate()

    def fwd(w: Word) -> Word:
        out = []
        for L in w.letters:
            if L[0] == "v":
                if L[1] == v:
                    out.append(("v", vmap(u), into_u[L[2]]))
                else:
                    out.append(("v", vmap(L[1]), L[2]))
            elif L[1] not in removed:
                out.append(("e", emap[L[1]]))
        base = vmap(u if w.base == v else w.base)
        return Word(base, tuple(out))

    def back(w: Word) -> Word:
        out = []
        for L in w.letters:
            if L[0] == "v":
                old = L[1] + 1 if L[1] >= v else L[1]
                out.append(("v", old, L[2]))
            else:
                f = kept[L[1]]
                if g.o(f) == v:
                    out.append(("e", e))
                out.append(("e", f))
                if g.t(f) == v:
                    out.append(("e", ebar))
        base = w.base + 1 if w.base >= v else w.base
        return Word(base, tuple(out))

    return small, fwd, back


def reduce_with_maps(gog: GraphOfGroups):
    """Collapse onto non-loop edges until reduced.

    Returns (reduced, to_reduced, from_reduced); the two Pi1Maps are mutually
    inverse identifications of fundamental groups.
    """
    cur = gog
    steps: list[tuple] = []
    while True:
        ok, e = is_reduced(cur)
        if ok:
            break
        cur, f, b = _collapse_edge(cur, e)
        steps.append((f, b))
    if not steps:
        ident = pi1_identity(gog)
        return gog, ident, ident

    def push_fwd(w: Word) -> Word:
        for f, _ in steps:
            w = f(w)
        return w

    def push_back(w: Word) -> Word:
        for _, b in reversed(steps):
            w = b(w)
        return w

    to_red = _word_map_pi1(gog, cur, push_fwd)
    from_red = _word_map_pi1(cur, gog, push_back)
    round1 = pi1_compose(cur, from_red, to_red)
    assert all(
        is_equal(gog, a, b)
        for a, b in zip(round1.images, round1.presentation.gen_words)
    )
    round2 = pi1_compose(gog, to_red, from_red)
    assert all(
        is_equal(cur, a, b)
        for a, b in zip(round2.images, round2.presentation.gen_words)
    )
    return cur, to_red, from_red


def reduce(gog: GraphOfGroups) -> GraphOfGroups:
    return reduce_with_maps(gog)[0]


# -- slide moves --------------------------------------------------------------


@dataclass(frozen=True)
class SlideMove:
    """Slide e1 across e2: both end at the same vertex v, and conjugating
    i_e1's image by the witness lands it inside i_e2's image."""

    e1: int
    e2: int
    witness: int

    def problems(self, gog: GraphOfGroups) -> list[str]:
        g = gog.graph
        ne = g.n_edges()
        out: list[str] = []
        if not (0 <= self.e1 < ne and 0 <= self.e2 < ne):
            return ["edge index out of range"]
        if self.e2 in (self.e1, g.inv[self.e1]):
            out.append("the two edges must come from different pairs")
        if g.t(self.e1) != g.t(self.e2):
            out.append("the edges do not share a terminus")
        if out:
            return out
        v = g.t(self.e1)
        G = gog.vertex_groups[v]
        if not 0 <= self.witness < G.order:
            return ["witness is out of range"]
        im2 = set(gog.monos[self.e2].images)
        for x in gog.monos[self.e1].images:
            if G.conjugate(self.witness, x) not in im2:
                out.append("conjugated image of e1 does not land inside e2")
                break
        return out


def enumerate_slides(gog: GraphOfGroups) -> list[SlideMove]:
    """All slide moves, one witness per coset of the centralizer of the
    conjugated image; same-coset witnesses produce identical slid graphs."""
    g = gog.graph
    moves: list[SlideMove] = []
    for e1 in range(g.n_edges()):
        for e2 in range(g.n_edges()):
            if e2 in (e1, g.inv[e1]) or g.t(e1) != g.t(e2):
                continue
            v = g.t(e1)
            G = gog.vertex_groups[v]
            im1 = gog.monos[e1].images
            im2 = set(gog.monos[e2].images)
            seen: set = set()
            for c in G.elements():
                if any(G.conjugate(c, x) not in im2 for x in im1):
                    continue
                F = frozenset(G.conjugate(c, x) for x in im1)
                Z = centralizer(G, sorted(F))
                key = (F, frozenset(G.mul(z, c) for z in Z.elements))
                if key in seen:
                    continue
                seen.add(key)
                moves.append(SlideMove(e1, e2, c))
    return moves


def apply_slide(gog: GraphOfGroups, m: SlideMove) -> GraphOfGroups:
    """Re-route e1 to end at o(e2), composing its monomorphism through e2."""
    errs = m.problems(gog)
    if errs:
        raise InvalidSlide(errs[0])
    g = gog.graph
    v = g.t(m.e1)
    G = gog.vertex_groups[v]
    u = g.o(m.e2)
    back2 = {img: x for x, img in enumerate(gog.monos[m.e2].images)}
    far = gog.monos[g.inv[m.e2]]
    imgs = tuple(
        far.images[back2[G.conjugate(m.witness, x)]]
        for x in gog.monos[m.e1].images
    )
    term = tuple(u if f == m.e1 else g.t(f) for f in range(g.n_edges()))
    monos = list(gog.monos)
    monos[m.e1] = Homomorphism(gog.edge_groups[m.e1], gog.vertex_groups[u], imgs)
    slid = GraphOfGroups(
        SerreGraph(g.n_vertices, term, g.inv),
        gog.vertex_groups,
        gog.edge_groups,
        tuple(monos),
    )
    assert not slid.validate()
    return slid


def _slide_with_maps(gog: GraphOfGroups, m: SlideMove):
    """apply_slide plus the two letter-level word maps identifying pi1.

    fwd sends the old e1 letter to its detour e1.e2.g in the slid graph;
    back sends the new e1 letter to e1.g^-1.ebar2 in the old one.
    """
    slid = apply_slide(gog, m)
    g = gog.graph
    e1, e2, c = m.e1, m.e2, m.witness
    ebar1, ebar2 = g.inv[e1], g.inv[e2]
    v = g.t(e1)
    cinv = gog.vertex_groups[v].inv[c]

    def subst(w: Word, table: dict) -> Word:
        out: list = []
        for L in w.letters:
            out.extend(table.get(L, (L,)))
        return Word(w.base, tuple(out))

    fwd_table = {
        ("e", e1): (("e", e1), ("e", e2), ("v", v, c)),
        ("e", ebar1): (("v", v, cinv), ("e", ebar2), ("e", ebar1)),
    }
    back_table = {
        ("e", e1): (("e", e1), ("v", v, cinv), ("e", ebar2)),
        ("e", ebar1): (("e", e2), ("v", v, c), ("e", ebar1)),
    }
    return (
        slid,
        lambda w: subst(w, fwd_table),
        lambda w: subst(w, back_table),
    )


# -- rigidity -----------------------------------------------------------------


def levitt_rigidity(gog: GraphOfGroups) -> bool:
    """Whether the reduced graph is the only reduced one in its space.

    Rigidity fails exactly when some potential slide is essential: for every
    ordered pair of oriented edges e1 != e2 sharing a terminus v such that a
    conjugate of im(i_e1) lies inside im(i_e2), either e1 is the reversal of
    e2, or e2 is a loop identifying its group onto the vertex group from both
    ends while e1, e2, ebar2 are the only edges ending at v.
    """
    ok, e = is_reduced(gog)
    if not ok:
        raise NotReduced(f"edge {e} is onto but not a loop")
    g = gog.graph
    for e1 in range(g.n_edges()):
        for e2 in range(g.n_edges()):
            if e1 == e2 or g.t(e1) != g.t(e2):
                continue
            v = g.t(e1)
            G = gog.vertex_groups[v]
            im1 = gog.monos[e1].images
            im2 = set(gog.monos[e2].images)
            if not any(
                all(G.conjugate(c, x) in im2 for x in im1) for c in G.elements()
            ):
                continue
            if e1 == g.inv[e2]:
                continue
            ebar2 = g.inv[e2]
            onto_both = (
                g.o(e2) == v
                and gog.monos[e2].is_bijective()
                and gog.monos[ebar2].is_bijective()
            )
            ending = [f for f in range(g.n_edges()) if g.t(f) == v]
            if not (onto_both and sorted(ending) == sorted({e1, e2, ebar2})):
                return False
    return True


# -- generic orbit closure ----------------------------------------------------


@dataclass
class OrbitProblem:
    """A finite orbit computation: labeled generators acting on points.

    same(x, y) must be an equivalence; act(k, x) applies generator k.
    """

    labels: tuple[str, ...]
    seed: object
    same: Callable[[object, object], bool]
    act: Callable[[int, object], object]

    def problems(self) -> list[str]:
        out: list[str] = []
        if not self.same(self.seed, self.seed):
            out.append("equality oracle rejects the seed")
            return out
        for k in range(len(self.labels)):
            y = self.act(k, self.seed)
            if not self.same(y, self.act(k, self.seed)):
                out.append(f"generator {self.labels[k]} does not respect equality")
        return out


@dataclass(frozen=True)
class OrbitResult:
    """Representatives with Schreier words over the generator labels.

    words[i] spells representative i as a composite applied to the seed,
    innermost first; stabilizer words are signed in the same convention.
    """

    representatives: tuple
    words: tuple[tuple[int, ...], ...]
    stabilizer: tuple[tuple[int, ...], ...]


def orbit_explore(p: OrbitProblem, cap: int = ORBIT_CAP) -> OrbitResult:
    """Breadth-first closure of the seed with Schreier stabilizer words."""
    errs = p.problems()
    if errs:
        raise Mismatch(errs[0])
    reps = [p.seed]
    words: list[tuple[int, ...]] = [()]
    stab: list[tuple[int, ...]] = []
    i = 0
    while i < len(reps):
        for k in range(len(p.labels)):
            img = p.act(k, reps[i])
            hit = None
            for j, r in enumerate(reps):
                if p.same(img, r):
                    hit = j
                    break
            if hit is None:
                reps.append(img)
                words.append(words[i] + (k + 1,))
                if len(reps) > cap:
                    raise CapExceeded(f"orbit exceeded {cap} points")
            else:
                back = tuple(-s for s in reversed(words[hit]))
                stab.append(words[i] + (k + 1,) + back)
        i += 1
    return OrbitResult(tuple(reps), tuple(words), tuple(stab))


# -- deformation space atlas --------------------------------------------------


def _iso_key(gog: GraphOfGroups):
    g = gog.graph
    degrees = tuple(sorted(len(g.edges_at(v)) for v in range(g.n_vertices)))
    vorders = tuple(sorted(G.order for G in gog.vertex_groups))
    eorders = tuple(sorted(gog.edge_groups[e].order for e in g.pair_reps()))
    return (g.n_vertices, g.n_edges(), degrees, vorders, eorders)


@dataclass(frozen=True)
class _SlideRecord:
    move: SlideMove
    target: int
    beta: GoGIso
    fwd: Callable[[Word], Word]
    back: Callable[[Word], Word]


def _saturate(seed: GraphOfGroups, cap: int):
    """Close a reduced graph under slides up to graph-of-groups isomorphism.

    Returns members plus, per member, pi1 identifications with the seed both
    ways and a record for every enumerated slide: which member the slid graph
    matches and through which isomorphism.
    """
    members = [seed]
    keys = [_iso_key(seed)]
    to_m = [pi1_identity(seed)]
    from_m = [pi1_identity(seed)]
    records: list[list[_SlideRecord]] = []
    i = 0
    while i < len(members):
        T = members[i]
        recs = []
        for mv in enumerate_slides(T):
            slid, fwd, back = _slide_with_maps(T, mv)
            key = _iso_key(slid)
            target, beta = None, None
            for j in range(len(members)):
                if keys[j] != key:
                    continue
                cand = gogiso.decide_iso(slid, members[j])
                if cand is not None:
                    target, beta = j, cand
                    break
            if target is None:
                members.append(slid)
                keys.append(key)
                if len(members) > cap:
                    raise CapExceeded(f"more than {cap} reduced shapes")
                pres_slid = pi1_presentation(slid)
                to_m.append(
                    Pi1Map(
                        to_m[0].presentation,
                        slid,
                        tuple(
                            normal_form(slid, fwd(w)).word for w in to_m[i].images
                        ),
                    )
                )
                from_m.append(
                    Pi1Map(
                        pres_slid,
                        seed,
                        tuple(
                            normal_form(
                                seed, pi1_apply(T, from_m[i], back(gw))
                            ).word
                            for gw in pres_slid.gen_words
                        ),
                    )
                )
                target, beta = len(members) - 1, gogiso.identity_iso(slid)
            recs.append(_SlideRecord(mv, target, beta, fwd, back))
        records.append(recs)
        i += 1
    return members, to_m, from_m, records


def _connector(members, to_m, from_m, i: int, rec: _SlideRecord) -> Pi1Map:
    """The seed automorphism carrying marking data across one slide edge."""
    seed = members[0]
    bmap = induced_pi1(rec.beta)
    slid = rec.beta.source
    images = []
    for w in to_m[i].images:
        w = rec.fwd(w)
        w = pi1_apply(slid, bmap, w)
        w = pi1_apply(members[rec.target], from_m[rec.target], w)
        images.append(normal_form(seed, w).word)
    return Pi1Map(to_m[0].presentation, seed, tuple(images))


@dataclass(frozen=True)
class DefSpaceAtlas:
    """Every reduced shape of one deformation space, with identifications.

    members[0] is the seed; to_member/from_member identify pi1(seed) with
    each member's pi1.  stabilizers[k] generates the image of the member's
    graph-of-groups automorphisms in Out; connectors[k][j] is the seed
    automorphism associated with the j-th slide enumerated at member k.
    """

    members: tuple[GraphOfGroups, ...]
    to_member: tuple[Pi1Map, ...]
    from_member: tuple[Pi1Map, ...]
    stabilizers: tuple[tuple[Pi1Map, ...], ...]
    slides: tuple[tuple[SlideMove, ...], ...]
    connectors: tuple[tuple[Pi1Map, ...], ...]

    def problems(self) -> list[str]:
        out: list[str] = []
        for i in range(len(self.members)):
            for j in range(i + 1, len(self.members)):
                if gogiso.decide_iso(self.members[i], self.members[j]):
                    out.append(f"members {i} and {j} are isomorphic")
        for k, alphas in enumerate(self.connectors):
            for a in alphas:
                if a.problems():
                    out.append(f"a connector at member {k} is not a homomorphism")
        return out


def orbit_reps(gog: GraphOfGroups, cap: int = V0_CAP) -> DefSpaceAtlas:
    """All reduced graphs deformation-equivalent to gog, up to isomorphism."""
    seed = reduce(gog)
    members, to_m, from_m, records = _saturate(seed, cap)
    stabilizers = tuple(tuple(out_T_generators(T)) for T in members)
    slides = tuple(tuple(r.move for r in recs) for recs in records)
    connectors = tuple(
        tuple(_connector(members, to_m, from_m, i, r) for r in recs)
        for i, recs in enumerate(records)
    )
    return DefSpaceAtlas(
        tuple(members), tuple(to_m), tuple(from_m), stabilizers, slides, connectors
    )


def decide_iso_vfree(
    gog1: GraphOfGroups, gog2: GraphOfGroups, cap: int = V0_CAP
) -> Optional[Pi1Map]:
    """An identification of fundamental groups, or None.

    Both graphs are reduced, gog2's space is saturated, and gog1's reduction
    is matched against its members.
    """
    r1, to1, _ = reduce_with_maps(gog1)
    r2, _, from2 = reduce_with_maps(gog2)
    members, _, from_m, _ = _saturate(r2, cap)
    key = _iso_key(r1)
    for j, W in enumerate(members):
        if _iso_key(W) != key:
            continue
        beta = gogiso.decide_iso(r1, W)
        if beta is None:
            continue
        bmap = induced_pi1(beta)
        images = []
        for w in to1.images:
            w = pi1_apply(r1, bmap, w)
            w = pi1_apply(W, from_m[j], w)
            w = pi1_apply(r2, from2, w)
            images.append(normal_form(gog2, w).word)
        m = Pi1Map(to1.presentation, gog2, tuple(images))
        assert not m.problems()
        return m
    return None


# -- outer automorphisms ------------------------------------------------------


def _images_key(m: Pi1Map) -> tuple:
    return tuple(w.letters for w in m.images)


def out_generators_vfree(
    gog: GraphOfGroups, cap: int = V0_CAP
) -> list[Pi1Map]:
    """A finite generating set of Out(pi1) as pi1 automorphisms.

    One family realizes each member's graph-of-groups automorphisms, the
    other transports around each slide edge of the space; everything is
    conjugated back through the member identifications.  Each output is
    verified to be a homomorphism with an exhibited inverse.
    """
    red, to_r, from_r = reduce_with_maps(gog)
    members, to_m, from_m, records = _saturate(red, cap)
    pres = pi1_presentation(gog)

    def assemble(stages) -> Pi1Map:
        # stages: (gog holding the current word, word map) applied in order
        images = []
        for gw in pres.gen_words:
            w = pi1_apply(gog, to_r, gw)
            for holder, push in stages:
                w = push(holder, w)
            w = pi1_apply(red, from_r, w)
            images.append(normal_form(gog, w).word)
        return Pi1Map(pres, gog, tuple(images))

    def via(m: Pi1Map):
        return lambda holder, w: pi1_apply(holder, m, w)

    def literal(push):
        return lambda holder, w: push(w)

    pairs: list[tuple[Pi1Map, Pi1Map]] = []
    for i, T in enumerate(members):
        up = via(to_m[i])
        down = via(from_m[i])
        for delta in delta_aut_generators(T):
            sigma = induced_pi1(delta)
            sigma_inv = induced_pi1(gogiso.invert(delta))
            fwdmap = assemble([(red, up), (T, via(sigma)), (T, down)])
            backmap = assemble([(red, up), (T, via(sigma_inv)), (T, down)])
            pairs.append((fwdmap, backmap))
        for rec in records[i]:
            W = members[rec.target]
            bmap = induced_pi1(rec.beta)
            bmap_inv = induced_pi1(gogiso.invert(rec.beta))
            slid = rec.beta.source
            alpha = assemble(
                [
                    (red, up),
                    (T, literal(rec.fwd)),
                    (slid, via(bmap)),
                    (W, via(from_m[rec.target])),
                ]
            )
            alpha_inv = assemble(
                [
                    (red, via(to_m[rec.target])),
                    (W, via(bmap_inv)),
                    (slid, literal(rec.back)),
                    (T, down),
                ]
            )
            pairs.append((alpha, alpha_inv))

    ident_key = _images_key(
        Pi1Map(
            pres, gog, tuple(normal_form(gog, w).word for w in pres.gen_words)
        )
    )
    out: list[Pi1Map] = []
    seen = {ident_key}
    for fwdmap, backmap in pairs:
        assert not fwdmap.problems()
        assert not backmap.problems()
        round_trip = pi1_compose(gog, backmap, fwdmap)
        assert all(
            is_equal(gog, a, b)
            for a, b in zip(round_trip.images, pres.gen_words)
        )
        key = _images_key(fwdmap)
        if key in seen:
            continue
        seen.add(key)
        out.append(fwdmap)
    return out


# -- Whitehead problems -------------------------------------------------------


def _check_tuples(gog: GraphOfGroups, gs, hs):
    if len(gs) != len(hs):
        raise Mismatch("tuples have different lengths")
    for w in list(gs) + list(hs):
        if w.base != 0 or w_end(gog, w) != 0:
            raise Mismatch("tuple entries must be loops at vertex 0")
        if element_order(gog, w) == math.inf:
            raise Unsupported("tuple entries must have finite order")


def _nf_tuple(gog: GraphOfGroups, ws) -> tuple[Word, ...]:
    return tuple(normal_form(gog, w).word for w in ws)


def whitehead_finite(
    gog: GraphOfGroups,
    gs: Sequence[Word],
    hs: Sequence[Word],
    mode: str = "W1",
    cap: int = ORBIT_CAP,
) -> Optional[Pi1Map]:
    """Search for an automorphism relating two tuples of finite-order loops.

    W1 asks for phi with phi(g_i) = h_i, W2 for phi(g_i) conjugate to h_i
    entry by entry; W3 and W4 relax equality of elements to equality of the
    cyclic subgroups they generate, on the g side and on the h side.  The
    orbit of the g tuple under a generating set of Out is closed off with
    the matching conjugacy oracle.

    For W2 and W4 each entry is its own orbit coordinate, so the search
    space is bounded by the finitely many torsion conjugacy classes.  For
    W1 and W3 the whole tuple travels with a single conjugator, and the
    orbit is only guaranteed finite when the tuple generates a finite
    subgroup; when one side does and the other does not the answer is no,
    and when neither does the search still runs but may exhaust the cap.
    """
    if mode not in ("W1", "W2", "W3", "W4"):
        raise Unsupported(f"unknown mode {mode!r}")
    _check_tuples(gog, gs, hs)
    if not gs:
        return pi1_identity(gog)
    if any(
        element_order(gog, g) != element_order(gog, h) for g, h in zip(gs, hs)
    ):
        return None
    if mode in ("W1", "W3"):
        g_finite = common_fixed_vertex(gog, list(gs)) is not None
        h_finite = common_fixed_vertex(gog, list(hs)) is not None
        if g_finite != h_finite:
            return None
    gens = out_generators_vfree(gog)
    if mode == "W1":
        return _search_tuple(gog, gens, _nf_tuple(gog, gs), _nf_tuple(gog, hs), True, cap)
    if mode == "W2":
        return _search_tuple(gog, gens, _nf_tuple(gog, gs), _nf_tuple(gog, hs), False, cap)
    exact = mode == "W3"
    base, other = (hs, gs) if exact else (gs, hs)
    fixed = _nf_tuple(gog, base)
    orders = [int(element_order(gog, w)) for w in other]
    choices = [
        [k for k in range(1, n + 1) if math.gcd(k, n) == 1] for n in orders
    ]
    for ks in product(*choices):
        powered = _nf_tuple(
            gog, [w_pow(gog, w, k) for w, k in zip(other, ks)]
        )
        if exact:
            found = _search_tuple(gog, gens, powered, fixed, True, cap)
        else:
            found = _search_tuple(gog, gens, fixed, powered, False, cap)
        if found is not None:
            return found
    return None


def _search_tuple(gog, gens, gs, hs, exact: bool, cap: int) -> Optional[Pi1Map]:
    """Orbit the g tuple under gens; compare with simultaneous conjugacy.

    With exact=True the witness is adjusted so images equal hs on the nose.
    """
    if exact:
        def same(x, y):
            return simultaneous_conjugacy(gog, list(x), list(y)) is not None
    else:
        def same(x, y):
            return all(
                is_conjugate(gog, a, b) is not None for a, b in zip(x, y)
            )

    def act(k, tup):
        return tuple(
            normal_form(gog, pi1_apply(gog, gens[k], w)).word for w in tup
        )

    problem = OrbitProblem(
        tuple(f"a{k}" for k in range(len(gens))), tuple(gs), same, act
    )
    result = orbit_explore(problem, cap)
    target = tuple(hs)
    for j, rep in enumerate(result.representatives):
        if not same(rep, target):
            continue
        phi = pi1_identity(gog)
        for ref in result.words[j]:
            phi = pi1_compose(gog, gens[ref - 1], phi)
        if exact:
            moved = [pi1_apply(gog, phi, w) for w in gs]
            c = simultaneous_conjugacy(gog, moved, list(target))
            assert c is not None
            phi = Pi1Map(
                phi.presentation,
                gog,
                tuple(
                    normal_form(gog, w_mul(gog, c, w, w_inv(gog, c))).word
                    for w in phi.images
                ),
            )
            assert all(
                is_equal(gog, pi1_apply(gog, phi, g), h)
                for g, h in zip(gs, target)
            )
        else:
            assert all(
                is_conjugate(gog, pi1_apply(gog, phi, g), h) is not None
                for g, h in zip(gs, target)
            )
        return phi
    return None


# -- report -------------------------------------------------------------------


def format_atlas(atlas: DefSpaceAtlas) -> str:
    """Render the atlas as a directory-style text report."""
    lines: list[str] = []
    for k, T in enumerate(atlas.members):
        g = T.graph
        lines.append(f"[member {k}]")
        lines.append(f"vertices = {g.n_vertices}")
        lines.append("vertex orders = " + " ".join(str(G.order) for G in T.vertex_groups))
        lines.append("term = " + " ".join(str(x) for x in g.term))
        lines.append("inv = " + " ".join(str(x) for x in g.inv))
        for e in range(g.n_edges()):
            imgs = " ".join(str(x) for x in T.monos[e].images)
            lines.append(f"mono {e} = {imgs}")
        lines.append(f"stabilizer generators = {len(atlas.stabilizers[k])}")
        for mv, alpha in zip(atlas.slides[k], atlas.connectors[k]):
            inner = "inner" if _is_identity_like(atlas.members[0], alpha) else "outer"
            lines.append(
                f"slide {mv.e1} across {mv.e2} witness {mv.witness} -> {inner} connector"
            )
        lines.append("")
    return "\n".join(lines)


def _is_identity_like(gog: GraphOfGroups, m: Pi1Map) -> bool:
    return all(
        is_equal(gog, a, b) for a, b in zip(m.images, m.presentation.gen_words)
    )
