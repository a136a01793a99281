"""Isomorphisms between graphs of finite groups.

An isomorphism in delta form is a graph isomorphism F together with an
isomorphism phi_e per edge pair, an isomorphism phi_v per vertex, and a
twist gamma_e in the target vertex group at F(t(e)) per oriented edge,
subject to the commutation square

    phi_{t(e)} o i_e  =  ad_{gamma_e} o i_{F(e)} o phi_e.

Such data induces an isomorphism of fundamental groups (the edge letter e
maps to gamma_ebar^-1 F(e) gamma_e), and every isomorphism respecting the
two tree actions arises from such data, so the restricted form loses
nothing.

Once F and the phi_e are fixed, completing them to a full isomorphism is
a finite per-vertex search: phi_v must carry each incident edge-image
tuple to its counterpart up to one conjugation, and a marked peripheral
structure adds tuple constraints of the same shape.  Distinct vertices
never interact, so scanning the vertex group isomorphisms one vertex at a
time decides existence.  Running that completion over all F and phi_e
settles the isomorphism problem, and running it over self-maps yields the
four generating families (edge twists, marked vertex automorphisms,
edge-group relabelings, graph symmetries) whose fundamental-group images
generate the tree-preserving outer automorphisms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterator, Optional, Sequence

from .errors import (
    Mismatch,
    NotAGroup,
    NotAPath,
    ParseError,
    PeripheralInEdgeGroup,
    ResourceLimit,
)
from .fingroup import (
    FiniteGroup,
    Homomorphism,
    automorphisms,
    centralizer,
    identity_map,
    isomorphisms,
    minimal_generating_sequence,
    subgroup_generated,
)
from .gogcore import (
    GraphOfGroups,
    Presentation,
    SerreGraph,
    Word,
    _reduce,
    common_fixed_vertex,
    is_equal,
    normal_form,
    pi1_presentation,
    simultaneous_conjugacy,
    w_end,
    w_inv,
    w_mul,
)

ENUM_CAP = 200_000


# ---------------------------------------------------------------------------
# the isomorphism record

@dataclass(frozen=True)
class GoGIso:
    """An isomorphism of graphs of groups in delta form.

    f_vertex and f_edge give the underlying graph isomorphism.  phi_v[v]
    maps the vertex group at v onto the target group at f_vertex[v], and
    phi_e[e] maps the edge group of e onto the one at f_edge[e], equal on
    the two orientations of a pair.  gamma[e] lies in the target vertex
    group at f_vertex[t(e)] and makes the commutation square hold:
    phi_{t(e)}(i_e(x)) = gamma_e i_{F(e)}(phi_e(x)) gamma_e^-1.
    """

    source: GraphOfGroups
    target: GraphOfGroups
    f_vertex: tuple[int, ...]
    f_edge: tuple[int, ...]
    phi_v: tuple[Homomorphism, ...]
    phi_e: tuple[Homomorphism, ...]
    gamma: tuple[int, ...]

    def problems(self) -> list[str]:
        g1, g2 = self.source.graph, self.target.graph
        nv, ne = g1.n_vertices, g1.n_edges()
        if g2.n_vertices != nv or g2.n_edges() != ne:
            return ["source and target graphs differ in size"]
        if (
            len(self.f_vertex) != nv
            or len(self.phi_v) != nv
            or len(self.f_edge) != ne
            or len(self.phi_e) != ne
            or len(self.gamma) != ne
        ):
            return ["component counts do not match the source graph"]
        out: list[str] = []
        if sorted(self.f_vertex) != list(range(nv)):
            out.append("f_vertex is not a vertex bijection")
        if sorted(self.f_edge) != list(range(ne)):
            out.append("f_edge is not an edge bijection")
        if out:
            return out
        for e in range(ne):
            if self.f_edge[g1.inv[e]] != g2.inv[self.f_edge[e]]:
                out.append(f"f_edge breaks the involution at edge {e}")
            if self.f_vertex[g1.t(e)] != g2.t(self.f_edge[e]):
                out.append(f"f_edge breaks the terminus at edge {e}")
        if out:
            return out
        for v in range(nv):
            h = self.phi_v[v]
            if h.source != self.source.vertex_groups[v] or h.target != self.target.vertex_groups[self.f_vertex[v]]:
                out.append(f"phi_v[{v}] connects the wrong groups")
            elif not h.is_bijective():
                out.append(f"phi_v[{v}] is not bijective")
        for e in range(ne):
            h = self.phi_e[e]
            if h.source != self.source.edge_groups[e] or h.target != self.target.edge_groups[self.f_edge[e]]:
                out.append(f"phi_e[{e}] connects the wrong groups")
            elif not h.is_bijective():
                out.append(f"phi_e[{e}] is not bijective")
            elif h.images != self.phi_e[g1.inv[e]].images:
                out.append(f"phi_e differs across the pair of edge {e}")
            if not 0 <= self.gamma[e] < self.target.vertex_groups[self.f_vertex[g1.t(e)]].order:
                out.append(f"gamma[{e}] is out of range")
        if out:
            return out
        for e in range(ne):
            if not _square_commutes(self, e):
                out.append(f"the commutation square fails at edge {e}")
        return out


def _square_commutes(phi: GoGIso, e: int) -> bool:
    v = phi.source.graph.t(e)
    G = phi.target.vertex_groups[phi.f_vertex[v]]
    i1 = phi.source.monos[e]
    i2 = phi.target.monos[phi.f_edge[e]]
    pv, pe, c = phi.phi_v[v], phi.phi_e[e], phi.gamma[e]
    return all(
        pv(i1(x)) == G.conjugate(c, i2(pe(x)))
        for x in range(phi.source.edge_groups[e].order)
    )


def _same_gog(a: GraphOfGroups, b: GraphOfGroups) -> bool:
    return a is b or (
        a.graph == b.graph
        and a.vertex_groups == b.vertex_groups
        and a.edge_groups == b.edge_groups
        and a.monos == b.monos
    )


def _iso_signature(phi: GoGIso) -> tuple:
    """Hashable full record of the map data; two isomorphisms of the same
    graphs of groups are equal exactly when their signatures agree."""
    return (
        phi.f_vertex,
        phi.f_edge,
        tuple(h.images for h in phi.phi_v),
        tuple(h.images for h in phi.phi_e),
        phi.gamma,
    )


def identity_iso(gog: GraphOfGroups) -> GoGIso:
    g = gog.graph
    return GoGIso(
        source=gog,
        target=gog,
        f_vertex=tuple(range(g.n_vertices)),
        f_edge=tuple(range(g.n_edges())),
        phi_v=tuple(identity_map(G) for G in gog.vertex_groups),
        phi_e=tuple(identity_map(G) for G in gog.edge_groups),
        gamma=(0,) * g.n_edges(),
    )


def compose(outer: GoGIso, inner: GoGIso) -> GoGIso:
    """outer o inner; twists compose as phi'_{F(t(e))}(gamma_e) * gamma'_{F(e)}."""
    if not _same_gog(inner.target, outer.source):
        raise Mismatch("inner target and outer source differ")
    g1 = inner.source.graph
    nv, ne = g1.n_vertices, g1.n_edges()
    gamma = []
    for e in range(ne):
        mid = inner.f_vertex[g1.t(e)]
        G = outer.target.vertex_groups[outer.f_vertex[mid]]
        gamma.append(G.mul(outer.phi_v[mid](inner.gamma[e]), outer.gamma[inner.f_edge[e]]))
    out = GoGIso(
        source=inner.source,
        target=outer.target,
        f_vertex=tuple(outer.f_vertex[inner.f_vertex[v]] for v in range(nv)),
        f_edge=tuple(outer.f_edge[inner.f_edge[e]] for e in range(ne)),
        phi_v=tuple(outer.phi_v[inner.f_vertex[v]].compose(inner.phi_v[v]) for v in range(nv)),
        phi_e=tuple(outer.phi_e[inner.f_edge[e]].compose(inner.phi_e[e]) for e in range(ne)),
        gamma=tuple(gamma),
    )
    assert not out.problems()  # squares stack, with the twist formula above
    return out


def invert(phi: GoGIso) -> GoGIso:
    """The inverse isomorphism; its twist at F(e) is phi_{t(e)}^-1(gamma_e)^-1."""
    g1, g2 = phi.source.graph, phi.target.graph
    back_v = [0] * g2.n_vertices
    for v, w in enumerate(phi.f_vertex):
        back_v[w] = v
    back_e = [0] * g2.n_edges()
    for e, f in enumerate(phi.f_edge):
        back_e[f] = e
    inv_v = tuple(phi.phi_v[back_v[w]].inverted() for w in range(g2.n_vertices))
    gamma = []
    for f in range(g2.n_edges()):
        e = back_e[f]
        G = phi.source.vertex_groups[g1.t(e)]
        gamma.append(G.inv[inv_v[g2.t(f)](phi.gamma[e])])
    out = GoGIso(
        source=phi.target,
        target=phi.source,
        f_vertex=tuple(back_v),
        f_edge=tuple(back_e),
        phi_v=inv_v,
        phi_e=tuple(phi.phi_e[back_e[f]].inverted() for f in range(g2.n_edges())),
        gamma=tuple(gamma),
    )
    assert not out.problems()
    return out


# ---------------------------------------------------------------------------
# induced map on the fundamental group

@dataclass(frozen=True)
class Pi1Map:
    """A fundamental-group homomorphism recorded by generator images.

    Generators are those of pi1_presentation on the source; every image is
    a loop at vertex 0 of the target.  problems() checks that each relator
    maps to the trivial element, which is what makes the record a
    homomorphism.
    """

    presentation: Presentation
    target: GraphOfGroups
    images: tuple[Word, ...]

    def apply(self, refs: Sequence[int]) -> Word:
        """Evaluate a signed generator sequence (k+1 for generator k)."""
        parts = [Word(0, ())]
        for k in refs:
            w = self.images[abs(k) - 1]
            parts.append(w if k > 0 else w_inv(self.target, w))
        return w_mul(self.target, *parts)

    def problems(self) -> list[str]:
        if len(self.images) != len(self.presentation.names):
            return ["image count differs from generator count"]
        out: list[str] = []
        for name, w in zip(self.presentation.names, self.images):
            try:
                closed = w.base == 0 and w_end(self.target, w) == 0
            except NotAPath:
                closed = False
            if not closed:
                out.append(f"image of {name} is not a loop at vertex 0")
        if out:
            return out
        for i, rel in enumerate(self.presentation.relators):
            if not is_equal(self.target, self.apply(rel), Word(0, ())):
                out.append(f"relator {i} maps to a nontrivial element")
        return out


def _push_word(phi: GoGIso, w: Word) -> Word:
    """Image under the induced morphism: e maps to gamma_ebar^-1 F(e) gamma_e."""
    g1 = phi.source.graph
    out: list = []
    for L in w.letters:
        if L[0] == "v":
            out.append(("v", phi.f_vertex[L[1]], phi.phi_v[L[1]](L[2])))
        else:
            e = L[1]
            a = phi.f_vertex[g1.o(e)]
            b = phi.f_vertex[g1.t(e)]
            Ga = phi.target.vertex_groups[a]
            out.append(("v", a, Ga.inv[phi.gamma[g1.inv[e]]]))
            out.append(("e", phi.f_edge[e]))
            out.append(("v", b, phi.gamma[e]))
    return Word(phi.f_vertex[w.base], tuple(out))


def induced_pi1(phi: GoGIso) -> Pi1Map:
    """The fundamental-group isomorphism, rebased at vertex 0 of the target."""
    assert not phi.problems()
    pres = pi1_presentation(phi.source)
    tgt = phi.target
    p = tgt.tree_path(phi.f_vertex[0])
    ip = w_inv(tgt, p)
    images = tuple(
        normal_form(tgt, w_mul(tgt, p, _push_word(phi, gw), ip)).word
        for gw in pres.gen_words
    )
    out = Pi1Map(pres, tgt, images)
    assert not out.problems()  # the squares carry relators to relators
    return out


# ---------------------------------------------------------------------------
# marked peripheral structures

@dataclass(frozen=True)
class MarkedPeripheral:
    """An ordered list of marked subgroup tuples, each taken up to conjugacy.

    Entries are loops at vertex 0.  In every comparison, tuple j on one
    side corresponds to tuple j on the other, entry by entry.
    """

    tuples: tuple[tuple[Word, ...], ...] = ()

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(len(t) for t in self.tuples)

    def problems(self, gog: GraphOfGroups) -> list[str]:
        out: list[str] = []
        for j, tup in enumerate(self.tuples):
            for w in tup:
                try:
                    closed = w.base == 0 and w_end(gog, w) == 0
                except NotAPath:
                    closed = False
                if not closed:
                    out.append(f"tuple {j} contains a word that is not a loop at vertex 0")
                    break
        return out


def _locate_peripheral(gog: GraphOfGroups, tup: Sequence[Word]) -> tuple[int, tuple[int, ...]]:
    """Fixed vertex of the tuple's subgroup plus the conjugated local form.

    Raises Mismatch when the subgroup fixes no vertex, and
    PeripheralInEdgeGroup when it also fixes an edge, which happens exactly
    when it lands in an incident edge image up to vertex-group conjugacy.
    """
    path = common_fixed_vertex(gog, list(tup))
    if path is None:
        raise Mismatch("peripheral subgroup is not conjugate into a vertex group")
    v = w_end(gog, path)
    ipath = w_inv(gog, path)
    local = []
    for w in tup:
        alt = _reduce(gog, v, w_mul(gog, ipath, w, path).letters)
        assert len(alt) == 1  # elliptic at v by the choice of path
        local.append(alt[0][2])
    G = gog.vertex_groups[v]
    members = subgroup_generated(G, local).elements
    for f in range(gog.graph.n_edges()):
        if gog.graph.t(f) != v:
            continue
        image = set(gog.monos[f].images)
        for a in G.elements():
            if all(G.conjugate(a, h) in image for h in members):
                raise PeripheralInEdgeGroup(
                    f"peripheral subgroup at vertex {v} lies in the image of edge {f}"
                )
    return v, tuple(local)


# ---------------------------------------------------------------------------
# completion search

def _tuple_conjugator(G: FiniteGroup, xs: Sequence[int], ys: Sequence[int]) -> Optional[int]:
    """Least c with xs[i] = c ys[i] c^-1 for all i, or None."""
    for c in G.elements():
        if all(x == G.conjugate(c, y) for x, y in zip(xs, ys)):
            return c
    return None


def _edge_twist(
    gog1: GraphOfGroups,
    gog2: GraphOfGroups,
    f_edge: Sequence[int],
    phi_e: Sequence[Homomorphism],
    psi: Homomorphism,
    e: int,
) -> Optional[int]:
    """Least gamma making the square commute at e, given phi_{t(e)} = psi."""
    i1 = gog1.monos[e]
    i2 = gog2.monos[f_edge[e]]
    pe = phi_e[e]
    G = gog2.vertex_groups[gog2.graph.t(f_edge[e])]
    order = gog1.edge_groups[e].order
    wanted = [psi(i1(x)) for x in range(order)]
    raw = [i2(pe(x)) for x in range(order)]
    return _tuple_conjugator(G, wanted, raw)


def _check_graph_map(
    g1: SerreGraph, g2: SerreGraph, f_vertex: Sequence[int], f_edge: Sequence[int]
) -> None:
    if g1.n_vertices != g2.n_vertices or g1.n_edges() != g2.n_edges():
        raise Mismatch("graphs differ in size")
    if sorted(f_vertex) != list(range(g1.n_vertices)):
        raise Mismatch("f_vertex is not a vertex bijection")
    if sorted(f_edge) != list(range(g1.n_edges())):
        raise Mismatch("f_edge is not an edge bijection")
    for e in range(g1.n_edges()):
        if f_edge[g1.inv[e]] != g2.inv[f_edge[e]] or f_vertex[g1.t(e)] != g2.t(f_edge[e]):
            raise Mismatch(f"the maps do not form a graph isomorphism at edge {e}")


def _peripheral_pairing(
    gog1: GraphOfGroups,
    gog2: GraphOfGroups,
    f_vertex: Sequence[int],
    periph1: Optional[MarkedPeripheral],
    periph2: Optional[MarkedPeripheral],
) -> Optional[list[list[tuple[tuple[int, ...], tuple[int, ...]]]]]:
    """Marked-tuple constraints grouped by source vertex, or None when the
    structures cannot correspond under this vertex map."""
    p1 = periph1 if periph1 is not None else MarkedPeripheral()
    p2 = periph2 if periph2 is not None else MarkedPeripheral()
    bad = p1.problems(gog1) + p2.problems(gog2)
    if bad:
        raise Mismatch(bad[0])
    located1 = [_locate_peripheral(gog1, t) for t in p1.tuples]
    located2 = [_locate_peripheral(gog2, t) for t in p2.tuples]
    if len(located1) != len(located2):
        return None
    marks: list[list[tuple[tuple[int, ...], tuple[int, ...]]]] = [
        [] for _ in range(gog1.graph.n_vertices)
    ]
    for (v1, loc1), (v2, loc2) in zip(located1, located2):
        if len(loc1) != len(loc2) or f_vertex[v1] != v2:
            return None
        marks[v1].append((loc1, loc2))
    return marks


def decide_given_F_phiE(
    gog1: GraphOfGroups,
    gog2: GraphOfGroups,
    f_vertex: Sequence[int],
    f_edge: Sequence[int],
    phi_e: Sequence[Homomorphism],
    periph1: Optional[MarkedPeripheral] = None,
    periph2: Optional[MarkedPeripheral] = None,
) -> Optional[GoGIso]:
    """Complete the given F and phi_e to a full isomorphism, if possible.

    A candidate phi_v works at its vertex iff every incident edge admits a
    twist and every marked tuple located there matches its partner up to
    conjugacy.  Vertices are independent once F and phi_e are fixed, so
    taking the first workable choice at each vertex decides existence; the
    witness is assembled with the least twist per edge.
    """
    g1, g2 = gog1.graph, gog2.graph
    f_vertex = tuple(f_vertex)
    f_edge = tuple(f_edge)
    phi_e = tuple(phi_e)
    _check_graph_map(g1, g2, f_vertex, f_edge)
    if len(phi_e) != g1.n_edges():
        raise Mismatch("phi_e count differs from edge count")
    for e in range(g1.n_edges()):
        h = phi_e[e]
        if h.source != gog1.edge_groups[e] or h.target != gog2.edge_groups[f_edge[e]]:
            raise Mismatch(f"phi_e[{e}] connects the wrong edge groups")
        if not h.is_bijective():
            raise Mismatch(f"phi_e[{e}] is not bijective")
        if h.images != phi_e[g1.inv[e]].images:
            raise Mismatch(f"phi_e differs across the pair of edge {e}")
    marks = _peripheral_pairing(gog1, gog2, f_vertex, periph1, periph2)
    if marks is None:
        return None
    chosen: list[Homomorphism] = []
    for v in range(g1.n_vertices):
        G2 = gog2.vertex_groups[f_vertex[v]]
        incident = [e for e in range(g1.n_edges()) if g1.t(e) == v]
        pick = None
        for psi in isomorphisms(gog1.vertex_groups[v], G2):
            if any(_edge_twist(gog1, gog2, f_edge, phi_e, psi, e) is None for e in incident):
                continue
            if any(
                _tuple_conjugator(G2, [psi(x) for x in loc1], loc2) is None
                for loc1, loc2 in marks[v]
            ):
                continue
            pick = psi
            break
        if pick is None:
            return None
        chosen.append(pick)
    gamma = tuple(
        _edge_twist(gog1, gog2, f_edge, phi_e, chosen[g1.t(e)], e)
        for e in range(g1.n_edges())
    )
    out = GoGIso(gog1, gog2, f_vertex, f_edge, tuple(chosen), phi_e, gamma)
    assert not out.problems()
    return out


def _graph_isos(g1: SerreGraph, g2: SerreGraph) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All graph isomorphisms, in lexicographic vertex-map order."""
    if g1.n_vertices != g2.n_vertices or g1.n_edges() != g2.n_edges():
        return
    reps = g1.pair_reps()
    for fv in itertools.permutations(range(g1.n_vertices)):
        options: Optional[list[list[int]]] = []
        for e in reps:
            opts = [
                f
                for f in range(g2.n_edges())
                if g2.o(f) == fv[g1.o(e)] and g2.t(f) == fv[g1.t(e)]
            ]
            if not opts:
                options = None
                break
            options.append(opts)
        if options is None:
            continue
        for picks in itertools.product(*options):
            if len({min(f, g2.inv[f]) for f in picks}) != len(reps):
                continue
            fe = [-1] * g1.n_edges()
            for e, f in zip(reps, picks):
                fe[e] = f
                fe[g1.inv[e]] = g2.inv[f]
            yield tuple(fv), tuple(fe)


def _edge_iso_families(
    gog1: GraphOfGroups, gog2: GraphOfGroups, f_edge: Sequence[int]
) -> Iterator[tuple[Homomorphism, ...]]:
    """Families (phi_e), one choice per edge pair, lexicographic by images."""
    reps = gog1.graph.pair_reps()
    per_pair = [isomorphisms(gog1.edge_groups[e], gog2.edge_groups[f_edge[e]]) for e in reps]
    if any(not lst for lst in per_pair):
        return
    for picks in itertools.product(*per_pair):
        fam: list = [None] * gog1.graph.n_edges()
        for e, h in zip(reps, picks):
            fam[e] = h
            fam[gog1.graph.inv[e]] = h
        yield tuple(fam)


def decide_iso(
    gog1: GraphOfGroups,
    gog2: GraphOfGroups,
    periph1: Optional[MarkedPeripheral] = None,
    periph2: Optional[MarkedPeripheral] = None,
) -> Optional[GoGIso]:
    """First isomorphism in enumeration order, or None.

    Runs the completion search over every graph isomorphism and every
    family of edge-group isomorphisms.
    """
    for f_vertex, f_edge in _graph_isos(gog1.graph, gog2.graph):
        for fam in _edge_iso_families(gog1, gog2, f_edge):
            got = decide_given_F_phiE(gog1, gog2, f_vertex, f_edge, fam, periph1, periph2)
            if got is not None:
                return got
    return None


# ---------------------------------------------------------------------------
# generators of the delta automorphism group

def _marked_vertex_auts(
    gog: GraphOfGroups, v: int, marked: Sequence[tuple[int, ...]]
) -> list[Homomorphism]:
    """Automorphisms of the vertex group that restrict to an inner map on
    every incident edge image and fix every marked tuple up to conjugacy."""
    G = gog.vertex_groups[v]
    tuples = [
        tuple(gog.monos[e].images)
        for e in range(gog.graph.n_edges())
        if gog.graph.t(e) == v
    ]
    tuples.extend(tuple(m) for m in marked)
    return [
        psi
        for psi in automorphisms(G)
        if all(_tuple_conjugator(G, [psi(x) for x in tup], tup) is not None for tup in tuples)
    ]


def _generating_auts(auts: Sequence[Homomorphism]) -> list[Homomorphism]:
    """A short generating list for a composition-closed automorphism set."""
    auts = sorted(auts, key=lambda h: h.images)  # the identity sorts first
    pos = {h.images: i for i, h in enumerate(auts)}
    table = [[pos[tuple(a.images[x] for x in b.images)] for b in auts] for a in auts]
    return [auts[k] for k in minimal_generating_sequence(FiniteGroup(table))]


def delta_aut_generators(
    gog: GraphOfGroups,
    periph: Optional[MarkedPeripheral] = None,
    budget: int = ENUM_CAP,
) -> list[GoGIso]:
    """Generators of the delta automorphism group, in four families.

    Twists over centralizer generators, extensions of marked vertex
    automorphisms, one preimage per realizable edge-group relabeling, and
    one preimage per realizable graph symmetry.  Images under induced_pi1
    generate the tree-preserving outer automorphisms.
    """
    g = gog.graph
    nv, ne = g.n_vertices, g.n_edges()
    p = periph if periph is not None else MarkedPeripheral()
    bad = p.problems(gog)
    if bad:
        raise Mismatch(bad[0])
    marked: list[list[tuple[int, ...]]] = [[] for _ in range(nv)]
    for tup in p.tuples:
        v, loc = _locate_peripheral(gog, tup)
        marked[v].append(loc)
    ident = identity_iso(gog)
    gens: list[GoGIso] = []

    # twists by centralizer generators, one oriented edge at a time
    for e in range(ne):
        G = gog.vertex_groups[g.t(e)]
        Z, emb = centralizer(G, gog.monos[e].images).as_group()
        for k in minimal_generating_sequence(Z):
            gamma = list(ident.gamma)
            gamma[e] = emb(k)
            gens.append(replace(ident, gamma=tuple(gamma)))

    # extensions of marked vertex automorphism generators
    for v in range(nv):
        for psi in _generating_auts(_marked_vertex_auts(gog, v, marked[v])):
            phi_v = list(ident.phi_v)
            phi_v[v] = psi
            gamma = []
            for e in range(ne):
                c = _edge_twist(gog, gog, ident.f_edge, ident.phi_e, phi_v[g.t(e)], e)
                assert c is not None  # marked automorphisms extend edgewise
                gamma.append(c)
            gens.append(replace(ident, phi_v=tuple(phi_v), gamma=tuple(gamma)))

    spent = 0

    def spend():
        nonlocal spent
        spent += 1
        if spent > budget:
            raise ResourceLimit("generator enumeration exceeded its budget")

    # one preimage per realizable edge-group relabeling (identity graph map)
    reps = g.pair_reps()
    for picks in itertools.product(*[automorphisms(gog.edge_groups[e]) for e in reps]):
        fam: list = [None] * ne
        for e, h in zip(reps, picks):
            fam[e] = h
            fam[g.inv[e]] = h
        spend()
        got = decide_given_F_phiE(gog, gog, ident.f_vertex, ident.f_edge, tuple(fam), p, p)
        if got is not None:
            gens.append(got)

    # one preimage per realizable graph symmetry
    for f_vertex, f_edge in _graph_isos(g, g):
        for fam in _edge_iso_families(gog, gog, f_edge):
            spend()
            got = decide_given_F_phiE(gog, gog, f_vertex, f_edge, fam, p, p)
            if got is not None:
                gens.append(got)
                break

    seen: set = set()
    unique: list[GoGIso] = []
    for phi in gens:
        key = _iso_signature(phi)
        if key not in seen:
            seen.add(key)
            unique.append(phi)
    return unique


def out_T_generators(
    gog: GraphOfGroups,
    periph: Optional[MarkedPeripheral] = None,
    budget: int = ENUM_CAP,
) -> list[Pi1Map]:
    """Fundamental-group images of delta_aut_generators."""
    return [induced_pi1(phi) for phi in delta_aut_generators(gog, periph, budget)]


# ---------------------------------------------------------------------------
# serialization

def format_iso_block(phi: GoGIso) -> str:
    """Body of an [iso] block; the marking line records that induced
    peripheral tuples follow edge-index order."""
    lines = ["vertices = " + " ".join(str(x) for x in phi.f_vertex)]
    lines.append("edges = " + " ".join(str(x) for x in phi.f_edge))
    lines.append("marking = edge-index")
    for v, h in enumerate(phi.phi_v):
        lines.append(f"vmap {v} = " + " ".join(str(x) for x in h.images))
    for e, h in enumerate(phi.phi_e):
        lines.append(f"emap {e} = " + " ".join(str(x) for x in h.images))
    lines.append("gamma = " + " ".join(str(x) for x in phi.gamma))
    return "\n".join(lines)


def parse_iso_block(gog1: GraphOfGroups, gog2: GraphOfGroups, text: str) -> GoGIso:
    fields: dict[str, tuple[str, int]] = {}
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

    f_vertex = ints(take("vertices"))
    f_edge = ints(take("edges"))
    if take("marking") != "edge-index":
        raise ParseError("unsupported marking order")
    nv, ne = gog1.graph.n_vertices, gog1.graph.n_edges()
    if sorted(f_vertex) != list(range(nv)) or sorted(f_edge) != list(range(ne)):
        raise ParseError("vertex or edge map is not a bijection")

    def group_map(source: FiniteGroup, target: FiniteGroup, chunk: str) -> Homomorphism:
        images = ints(chunk)
        if any(not 0 <= x < target.order for x in images):
            raise ParseError("image entry out of range")
        try:
            return Homomorphism(source, target, images)
        except NotAGroup as err:
            raise ParseError(str(err))

    phi_v = tuple(
        group_map(gog1.vertex_groups[v], gog2.vertex_groups[f_vertex[v]], take(f"vmap {v}"))
        for v in range(nv)
    )
    phi_e = tuple(
        group_map(gog1.edge_groups[e], gog2.edge_groups[f_edge[e]], take(f"emap {e}"))
        for e in range(ne)
    )
    gamma = ints(take("gamma"))
    if fields:
        key = next(iter(fields))
        raise ParseError(f"unknown field {key!r}", line=fields[key][1])
    out = GoGIso(gog1, gog2, f_vertex, f_edge, phi_v, phi_e, gamma)
    errs = out.problems()
    if errs:
        raise ParseError("; ".join(errs))
    return out
