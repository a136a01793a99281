"""Graphs of finite groups and their Bass-Serre word calculus.

A graph of groups is a Serre graph (oriented edges with a fixed-point-free
involution) carrying a finite vertex group per vertex, a finite edge group
per edge pair, and a monomorphism i_e into the terminal vertex group per
oriented edge.  Group elements of the fundamental group are path words
g0 e1 g1 ... en gn; the Bass relation e i_e(x) e^-1 = i_ebar(x) drives both
Britton pinch removal and the transversal rewriting that yields a unique
canonical form per element.

Conjugacy works on the Bass-Serre tree: hyperbolic elements (cyclic core
with edge letters) are matched by rotating the core, elliptic elements by a
fusion walk through vertex stabilizers, and simultaneous conjugacy by
intersecting witness cosets over the centralizer of a hyperbolic head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import Mismatch, NotAPath, ParseError, ResourceLimit
from .fingroup import FiniteGroup, Homomorphism, Subgroup, all_subgroups

FUSION_NODE_CAP = 4096
WALK_SLACK = 16


@dataclass(frozen=True)
class SerreGraph:
    """Oriented edges e with terminus term[e] and reversal inv[e]."""

    n_vertices: int
    term: tuple[int, ...]
    inv: tuple[int, ...]

    def n_edges(self) -> int:
        return len(self.term)

    def t(self, e: int) -> int:
        return self.term[e]

    def o(self, e: int) -> int:
        return self.term[self.inv[e]]

    def pair_reps(self) -> list[int]:
        return [e for e in range(len(self.term)) if e < self.inv[e]]

    def edges_at(self, v: int) -> list[int]:
        return [e for e in range(len(self.term)) if self.o(e) == v]

    def problems(self) -> list[str]:
        out = []
        m = len(self.term)
        if len(self.inv) != m:
            out.append("term and inv have different lengths")
            return out
        if self.n_vertices < 1:
            out.append("graph needs at least one vertex")
        for e in range(m):
            if not 0 <= self.term[e] < self.n_vertices:
                out.append(f"terminus of edge {e} out of range")
            if not 0 <= self.inv[e] < m:
                out.append(f"involution of edge {e} out of range")
                return out
            if self.inv[e] == e:
                out.append(f"involution fixes edge {e}")
            elif self.inv[self.inv[e]] != e:
                out.append(f"involution not self-inverse at edge {e}")
        if not out:
            seen = {0}
            frontier = [0]
            while frontier:
                v = frontier.pop()
                for e in range(m):
                    if self.o(e) == v and self.term[e] not in seen:
                        seen.add(self.term[e])
                        frontier.append(self.term[e])
            if len(seen) != self.n_vertices:
                out.append("graph is not connected")
        return out


@dataclass(frozen=True)
class Word:
    """A path word: base vertex plus letters ("v", vertex, elt) / ("e", edge)."""

    base: int
    letters: tuple = ()


@dataclass(frozen=True)
class NormalForm:
    """Canonical alternating word r0 e1 r1 ... en g_n, plus loop ellipticity."""

    word: Word
    elliptic: Optional[bool]

    @property
    def edge_length(self) -> int:
        return sum(1 for L in self.word.letters if L[0] == "e")


@dataclass(frozen=True)
class Presentation:
    """Finite presentation of pi1(Gamma, tau) over named abstract generators.

    Relators are tuples of signed generator references: k+1 for generator k,
    -(k+1) for its inverse.  gen_words realizes each generator as a loop at
    vertex 0.
    """

    names: tuple[str, ...]
    relators: tuple[tuple[int, ...], ...]
    gen_words: tuple[Word, ...]


class GraphOfGroups:
    """Serre graph + finite vertex/edge groups + edge monomorphisms."""

    def __init__(
        self,
        graph: SerreGraph,
        vertex_groups: Sequence[FiniteGroup],
        edge_groups: Sequence[FiniteGroup],
        monos: Sequence[Homomorphism],
    ):
        self.graph = graph
        self.vertex_groups = tuple(vertex_groups)
        self.edge_groups = tuple(edge_groups)
        self.monos = tuple(monos)
        self._caches = None

    # -- validation ---------------------------------------------------------

    def validate(self) -> list[str]:
        out = self.graph.problems()
        g = self.graph
        if len(self.vertex_groups) != g.n_vertices:
            out.append("vertex group count differs from vertex count")
        if len(self.edge_groups) != g.n_edges() or len(self.monos) != g.n_edges():
            out.append("edge group / mono count differs from edge count")
            return out
        for e in range(g.n_edges()):
            if self.edge_groups[e].table != self.edge_groups[g.inv[e]].table:
                out.append(f"edge groups of pair ({e},{g.inv[e]}) differ")
            mono = self.monos[e]
            if mono.source.table != self.edge_groups[e].table:
                out.append(f"mono of edge {e} has wrong source")
            elif not 0 <= g.term[e] < g.n_vertices:
                pass
            elif mono.target.table != self.vertex_groups[g.term[e]].table:
                out.append(f"mono of edge {e} has wrong target")
            elif not mono.is_injective():
                out.append(f"mono of edge {e} is not injective")
        return out

    # -- cached tables ------------------------------------------------------

    def _t(self):
        if self._caches is None:
            errs = self.validate()
            if errs:
                raise Mismatch("invalid graph of groups: " + "; ".join(errs))
            g = self.graph
            image_set = []
            mono_inv = []
            decomp = []
            for e in range(g.n_edges()):
                mono = self.monos[e]
                imgs = frozenset(mono.images)
                image_set.append(imgs)
                mono_inv.append({y: x for x, y in enumerate(mono.images)})
                G = self.vertex_groups[g.term[e]]
                table = [None] * G.order
                for a in range(G.order):
                    if table[a] is not None:
                        continue
                    coset = sorted(G.mul(a, h) for h in imgs)
                    r = coset[0]
                    rinv = G.inv[r]
                    for c in coset:
                        # c = r * i_e(x)
                        table[c] = (r, mono_inv[e][G.mul(rinv, c)])
                decomp.append(tuple(table))
            # maximal tree by BFS from vertex 0, least edge index first
            tree_edges: set[int] = set()
            parent_edge: dict[int, int] = {}
            seen = {0}
            frontier = [0]
            while frontier:
                nxt = []
                for v in sorted(frontier):
                    for e in range(g.n_edges()):
                        if g.o(e) == v and g.term[e] not in seen:
                            w = g.term[e]
                            seen.add(w)
                            tree_edges.add(e)
                            tree_edges.add(g.inv[e])
                            parent_edge[w] = e
                            nxt.append(w)
                frontier = nxt
            self._caches = {
                "image_set": image_set,
                "mono_inv": mono_inv,
                "decomp": decomp,
                "tree": frozenset(tree_edges),
                "parent_edge": parent_edge,
            }
        return self._caches

    @property
    def maximal_tree(self) -> frozenset:
        return self._t()["tree"]

    def tree_path(self, v: int) -> Word:
        """Edge-letter path from vertex 0 to v inside the maximal tree."""
        parent = self._t()["parent_edge"]
        edges = []
        while v != 0:
            e = parent[v]
            edges.append(e)
            v = self.graph.o(e)
        return Word(0, tuple(("e", e) for e in reversed(edges)))

    # -- small helpers ------------------------------------------------------

    def vgroup(self, v: int) -> FiniteGroup:
        return self.vertex_groups[v]


# ---------------------------------------------------------------------------
# word building blocks

def w_vertex(v: int, g: int) -> Word:
    return Word(v, (("v", v, g),))


def w_edge(gog: GraphOfGroups, e: int) -> Word:
    return Word(gog.graph.o(e), (("e", e),))


def w_end(gog: GraphOfGroups, w: Word) -> int:
    cur = w.base
    for L in w.letters:
        if L[0] == "e":
            if gog.graph.o(L[1]) != cur:
                raise NotAPath(f"edge {L[1]} does not start at vertex {cur}")
            cur = gog.graph.t(L[1])
        elif L[1] != cur:
            raise NotAPath(f"vertex letter at {L[1]} while path is at {cur}")
    return cur


def w_mul(gog: GraphOfGroups, *words: Word) -> Word:
    if not words:
        raise NotAPath("empty product has no base vertex")
    letters: list = []
    cur = words[0].base
    for w in words:
        if w.base != cur:
            raise NotAPath(f"cannot concatenate: word based at {w.base}, path at {cur}")
        letters.extend(w.letters)
        cur = w_end(gog, w)
    return Word(words[0].base, tuple(letters))


def w_inv(gog: GraphOfGroups, w: Word) -> Word:
    end = w_end(gog, w)
    out = []
    for L in reversed(w.letters):
        if L[0] == "e":
            out.append(("e", gog.graph.inv[L[1]]))
        else:
            out.append(("v", L[1], gog.vertex_groups[L[1]].inv[L[2]]))
    return Word(end, tuple(out))


def w_conj(gog: GraphOfGroups, c: Word, w: Word) -> Word:
    """c * w * c^-1."""
    return w_mul(gog, c, w, w_inv(gog, c))


def w_pow(gog: GraphOfGroups, w: Word, k: int) -> Word:
    if w.base != w_end(gog, w):
        raise NotAPath("power of a non-loop word")
    if k < 0:
        w, k = w_inv(gog, w), -k
    out = Word(w.base, ())
    for _ in range(k):
        out = w_mul(gog, out, w)
    return out


# ---------------------------------------------------------------------------
# serialization

def format_word(w: Word) -> str:
    toks = []
    for L in w.letters:
        if L[0] == "e":
            toks.append(f"e{L[1]}")
        else:
            toks.append(f"v{L[1]}:{L[2]}")
    return " ".join(toks) if toks else "1"


def parse_word(gog: GraphOfGroups, text: str, base: Optional[int] = None) -> Word:
    n_e = gog.graph.n_edges()
    letters: list = []
    for tok in text.split():
        if tok == "1":
            continue
        try:
            if tok[0] == "v":
                v, g = (int(p) for p in tok[1:].split(":"))
            elif tok[0] in "eE":
                j = int(tok[1:])
            else:
                raise ValueError(tok)
        except (ValueError, IndexError):
            raise ParseError(f"bad word token {tok!r}")
        if tok[0] == "v":
            if not 0 <= v < len(gog.vertex_groups):
                raise ParseError(f"vertex {v} out of range in {tok!r}")
            if not 0 <= g < gog.vertex_groups[v].order:
                raise ParseError(f"element {g} out of range in {tok!r}")
            letters.append(("v", v, g))
        else:
            if not 0 <= j < n_e:
                raise ParseError(f"edge {j} out of range in {tok!r}")
            letters.append(("e", j if tok[0] == "e" else gog.graph.inv[j]))
    if base is None:
        if letters and letters[0][0] == "v":
            base = letters[0][1]
        elif letters:
            base = gog.graph.o(letters[0][1])
        else:
            base = 0
    w = Word(base, tuple(letters))
    w_end(gog, w)  # path check
    return w


# ---------------------------------------------------------------------------
# normal forms

def _alternate(gog: GraphOfGroups, base: int, letters: Iterable) -> list:
    """Path-check and rewrite as [g0, e1, g1, ..., en, gn] with explicit g_i."""
    out: list = []
    cur = base
    pending = 0
    for L in letters:
        if L[0] == "v":
            _, v, g = L
            if v != cur:
                raise NotAPath(f"vertex letter at {v} while path is at {cur}")
            pending = gog.vertex_groups[cur].mul(pending, g)
        else:
            e = L[1]
            if gog.graph.o(e) != cur:
                raise NotAPath(f"edge {e} does not start at vertex {cur}")
            out.append(("v", cur, pending))
            out.append(("e", e))
            pending = 0
            cur = gog.graph.t(e)
    out.append(("v", cur, pending))
    return out


def _britton(gog: GraphOfGroups, alt: list) -> list:
    """Remove every pinch e i_e(x) ebar; input and output alternate v,e,...,v."""
    t = gog._t()
    image_set, mono_inv = t["image_set"], t["mono_inv"]
    st: list = []
    for L in alt:
        if L[0] == "v":
            if st and st[-1][0] == "v":
                G = gog.vertex_groups[L[1]]
                st[-1] = ("v", L[1], G.mul(st[-1][2], L[2]))
            else:
                st.append(L)
        else:
            f = L[1]
            if len(st) >= 2 and st[-2][0] == "e":
                e, g = st[-2][1], st[-1][2]
                if gog.graph.inv[e] == f and g in image_set[e]:
                    x = mono_inv[e][g]
                    st.pop()
                    st.pop()
                    h = gog.monos[gog.graph.inv[e]].images[x]
                    v = gog.graph.o(e)
                    if st and st[-1][0] == "v":
                        st[-1] = ("v", v, gog.vertex_groups[v].mul(st[-1][2], h))
                    else:
                        st.append(("v", v, h))
                    continue
            st.append(L)
    return st


def _transversal(gog: GraphOfGroups, alt: list) -> list:
    """Push coset remainders rightward; g_i becomes the least rep of its coset."""
    t = gog._t()
    decomp = t["decomp"]
    out = list(alt)
    for i in range(1, len(out), 2):
        e = out[i][1]
        f = gog.graph.inv[e]
        v, g = out[i - 1][1], out[i - 1][2]
        r, x = decomp[f][g]  # g = r * i_f(x) in Gamma_v, v = t(f)
        out[i - 1] = ("v", v, r)
        carry = gog.monos[e].images[x]
        nv, ng = out[i + 1][1], out[i + 1][2]
        out[i + 1] = ("v", nv, gog.vertex_groups[nv].mul(carry, ng))
    return out


def _reduce(gog: GraphOfGroups, base: int, letters: Iterable) -> list:
    return _transversal(gog, _britton(gog, _alternate(gog, base, letters)))


def normal_form(gog: GraphOfGroups, w: Word) -> NormalForm:
    alt = _reduce(gog, w.base, w.letters)
    elliptic: Optional[bool] = None
    if w.base == w_end(gog, w):
        core = _cyclic_core(gog, w.base, alt)
        elliptic = core.edge_count == 0
    return NormalForm(Word(w.base, tuple(alt)), elliptic)


def is_equal(gog: GraphOfGroups, w1: Word, w2: Word) -> bool:
    if w1.base != w2.base or w_end(gog, w1) != w_end(gog, w2):
        return False
    return _reduce(gog, w1.base, w1.letters) == _reduce(gog, w2.base, w2.letters)


def edge_length(gog: GraphOfGroups, w: Word) -> int:
    """Edge letters in the reduced form: tree distance from the base lift."""
    return sum(1 for L in _reduce(gog, w.base, w.letters) if L[0] == "e")


# ---------------------------------------------------------------------------
# cyclic structure

@dataclass(frozen=True)
class CyclicCore:
    """w = conj * core * conj^-1 with core cyclically reduced.

    Hyperbolic core: edge-leading letters [e1, g1, ..., en, gn] at base.
    Elliptic core: a single vertex letter.
    """

    base: int
    letters: tuple
    conj: Word

    @property
    def edge_count(self) -> int:
        return sum(1 for L in self.letters if L[0] == "e")

    @property
    def vertex_element(self) -> int:
        if self.edge_count:
            raise Mismatch("hyperbolic core has no single vertex element")
        return self.letters[0][2]


def _cyclic_core(gog: GraphOfGroups, base: int, alt: list) -> CyclicCore:
    t = gog._t()
    image_set = t["image_set"]
    conj: list = []
    cur = base
    work = list(alt)
    while True:
        if len(work) == 1:
            return CyclicCore(cur, (work[0],), Word(base, tuple(conj)))
        lead = work[0]
        if lead[0] == "v":
            if lead[2] != 0:
                conj.append(lead)
                G = gog.vertex_groups[cur]
                last = work[-1]
                work[-1] = ("v", cur, G.mul(last[2], lead[2]))
            work = work[1:]
            continue
        e1 = work[0][1]
        en, gn = work[-2][1], work[-1][2]
        if gog.graph.inv[en] == e1 and gn in image_set[en]:
            conj.append(("e", e1))
            cur = gog.graph.t(e1)
            rest = work[1:] + [("e", e1), ("v", cur, 0)]
            work = _britton(gog, rest)
            continue
        # cyclically reduced; canonicalize coset reps with a leading identity
        canon = _transversal(gog, [("v", cur, 0)] + work)
        return CyclicCore(cur, tuple(canon[1:]), Word(base, tuple(conj)))


def translation_length(gog: GraphOfGroups, w: Word) -> int:
    if w.base != w_end(gog, w):
        raise NotAPath("translation length of a non-loop word")
    return _cyclic_core(gog, w.base, _reduce(gog, w.base, w.letters)).edge_count


def element_order(gog: GraphOfGroups, w: Word):
    if w.base != w_end(gog, w):
        raise NotAPath("order of a non-loop word")
    core = _cyclic_core(gog, w.base, _reduce(gog, w.base, w.letters))
    if core.edge_count:
        return math.inf
    return gog.vertex_groups[core.base].element_order(core.vertex_element)


# ---------------------------------------------------------------------------
# conjugacy: hyperbolic side

def _core_rotation(gog: GraphOfGroups, core: CyclicCore, k: int):
    """Rotation by k edge blocks: (prefix path p_k, canonical rotated letters).

    p_k^-1 * core * p_k equals the rotation as an element.
    """
    letters = list(core.letters)
    prefix = letters[: 2 * k]
    rot = letters[2 * k :] + prefix
    nb = gog.graph.t(prefix[-2][1]) if k else core.base
    canon = _transversal(gog, _britton(gog, [("v", nb, 0)] + rot))
    return Word(core.base, tuple(prefix)), canon[1:] if canon[0] == ("v", nb, 0) else canon


def _edge_seq(letters) -> tuple:
    return tuple(L[1] for L in letters if L[0] == "e")


def _vertex_conjugators_between(gog, base: int, lettersA, lettersB) -> list[int]:
    """All s in the base vertex group with s*A*s^-1 = B, for edge-leading cores."""
    out = []
    G = gog.vertex_groups[base]
    target = [("v", base, 0)] + list(lettersB)
    for s in range(G.order):
        cand = [("v", base, s)] + list(lettersA) + [("v", base, G.inv[s])]
        if _reduce(gog, base, cand) == _reduce(gog, base, target):
            out.append(s)
    return out


def _hyperbolic_matchers(gog, core1: CyclicCore, core2: CyclicCore) -> list[Word]:
    """All words m = s * p_k^-1 with m * core1 * m^-1 = core2 (k one period)."""
    n = core1.edge_count
    out = []
    if n != core2.edge_count:
        return out
    seq2 = _edge_seq(core2.letters)
    for k in range(n):
        p_k, rot = _core_rotation(gog, core1, k)
        if k and gog.graph.t(core1.letters[2 * k - 2][1]) != core2.base:
            continue
        if not k and core1.base != core2.base:
            continue
        if _edge_seq(rot) != seq2:
            continue
        for s in _vertex_conjugators_between(gog, core2.base, rot, core2.letters):
            out.append(w_mul(gog, w_vertex(core2.base, s), w_inv(gog, p_k)))
    return out


def hyperbolic_centralizer_data(gog, w: Word):
    """Z(w) = { w^m * f : m in Z, f in F }; returns (core, list F of Words)."""
    core = _cyclic_core(gog, w.base, _reduce(gog, w.base, w.letters))
    if core.edge_count == 0:
        raise Mismatch("centralizer data needs a hyperbolic element")
    F = []
    for m in _hyperbolic_matchers(gog, core, core):
        F.append(w_mul(gog, core.conj, m, w_inv(gog, core.conj)))
    return core, F


# ---------------------------------------------------------------------------
# conjugacy: elliptic side (fusion walk), shared by tuples

def _fusion_budget(gog: GraphOfGroups, arity: int = 1) -> int:
    pairs = len(gog.graph.pair_reps())
    mx = max(G.order for G in gog.vertex_groups)
    return max(2 * pairs * mx**arity, 64)


def _canon_tuple(gog, v: int, tup: tuple):
    """Lexicographically least diagonal conjugate, with a witness g."""
    G = gog.vertex_groups[v]
    best, bg = None, 0
    for g in range(G.order):
        cand = tuple(G.conjugate(g, x) for x in tup)
        if best is None or cand < best:
            best, bg = cand, g
    return best, bg


def _tuple_fusion(gog, v1: int, tup1: tuple, v2: int, tup2: tuple) -> Optional[Word]:
    """A word U with U * tup1 * U^-1 = tup2 (entrywise, as vertex loops), or None."""
    t = gog._t()
    image_set, mono_inv = t["image_set"], t["mono_inv"]
    budget = _fusion_budget(gog, len(tup1))
    start, g0 = _canon_tuple(gog, v1, tup1)
    target, g2 = _canon_tuple(gog, v2, tup2)
    witness = {(v1, start): w_vertex(v1, g0)}
    frontier = [(v1, start)]
    steps = 0
    while frontier:
        nxt = []
        for (v, tup) in frontier:
            V = witness[(v, tup)]
            G = gog.vertex_groups[v]
            for e in gog.graph.edges_at(v):
                f = gog.graph.inv[e]  # terminus v
                steps += 1
                if steps > budget:
                    raise ResourceLimit("conjugacy fusion walk exceeded budget")
                for g in range(G.order):
                    moved = tuple(G.conjugate(g, x) for x in tup)
                    if any(x not in image_set[f] for x in moved):
                        continue
                    w = gog.graph.t(e)
                    raw = tuple(gog.monos[e].images[mono_inv[f][x]] for x in moved)
                    canon, h = _canon_tuple(gog, w, raw)
                    if (w, canon) in witness:
                        continue
                    witness[(w, canon)] = w_mul(
                        gog, w_vertex(w, h), w_edge(gog, gog.graph.inv[e]), w_vertex(v, g), V
                    )
                    nxt.append((w, canon))
        frontier = nxt
    got = witness.get((v2, target))
    if got is None:
        return None
    # U = g2^-1 * got conjugates tup1 onto tup2
    G2 = gog.vertex_groups[v2]
    return w_mul(gog, w_vertex(v2, G2.inv[g2]), got)


def _project_to_fix(gog, P: Word, x: Word) -> Word:
    """Extend path P to the projection of its endpoint onto Fix(x)."""
    u = w_end(gog, P)
    q = _reduce(gog, u, w_mul(gog, w_inv(gog, P), x, P).letters)
    d = sum(1 for L in q if L[0] == "e") // 2
    prefix = q[: 2 * d]  # up to and including the d-th edge letter
    return Word(P.base, P.letters + tuple(prefix))


def common_fixed_vertex(gog, loops: Sequence[Word]) -> Optional[Word]:
    """Path from the base to a vertex fixed by every loop, if one exists.

    Sequential projection onto the fixed trees: in a tree the projection
    onto an intersection of pairwise-meeting convex sets is reached by
    projecting onto each set once, in order.
    """
    if not loops:
        return Word(0, ())
    P = Word(loops[0].base, ())
    for x in loops:
        P = _project_to_fix(gog, P, x)
    P = Word(P.base, tuple(_reduce(gog, P.base, P.letters)))
    for x in loops:
        if sum(1 for L in _reduce(gog, w_end(gog, P), w_mul(gog, w_inv(gog, P), x, P).letters) if L[0] == "e"):
            return None
    return P


# ---------------------------------------------------------------------------
# conjugacy: public entry points

def is_conjugate(gog: GraphOfGroups, w1: Word, w2: Word) -> Optional[Word]:
    """A word c with c*w1*c^-1 = w2, or None; w1, w2 loops at a common base."""
    if w1.base != w_end(gog, w1) or w2.base != w_end(gog, w2):
        raise NotAPath("conjugacy is defined for loops")
    if w1.base != w2.base:
        raise Mismatch("loops must share a base vertex")
    c1 = _cyclic_core(gog, w1.base, _reduce(gog, w1.base, w1.letters))
    c2 = _cyclic_core(gog, w2.base, _reduce(gog, w2.base, w2.letters))
    if (c1.edge_count == 0) != (c2.edge_count == 0):
        return None
    if c1.edge_count:
        for m in _hyperbolic_matchers(gog, c1, c2):
            return w_mul(gog, c2.conj, m, w_inv(gog, c1.conj))
        return None
    U = _tuple_fusion(gog, c1.base, (c1.vertex_element,), c2.base, (c2.vertex_element,))
    if U is None:
        return None
    return w_mul(gog, c2.conj, U, w_inv(gog, c1.conj))


def _solution_all():
    return ("residues", (0,), 1)


def _intersect_solutions(a, b):
    if a == ("empty",) or b == ("empty",):
        return ("empty",)
    if a[0] == "finite" or b[0] == "finite":
        fin = a if a[0] == "finite" else b
        other = b if a[0] == "finite" else a
        keep = []
        for m in fin[1]:
            if other[0] == "finite":
                if m in other[1]:
                    keep.append(m)
            elif m % other[2] in other[1]:
                keep.append(m)
        return ("finite", tuple(sorted(set(keep)))) if keep else ("empty",)
    p = math.lcm(a[2], b[2])
    offs = tuple(sorted(o for o in range(p) if o % a[2] in a[1] and o % b[2] in b[1]))
    return ("residues", offs, p) if offs else ("empty",)


def _pick_solution(sol) -> Optional[int]:
    if sol == ("empty",):
        return None
    if sol[0] == "finite":
        return min(sol[1], key=abs)
    offs, p = sol[1], sol[2]
    return min((o if o <= p - o else o - p for o in offs), key=abs)


class _AxisCalc:
    """Position bookkeeping along the axis of a hyperbolic core."""

    def __init__(self, gog, core: CyclicCore):
        self.gog = gog
        self.core = core
        self.n = core.edge_count
        self.core_word = Word(core.base, core.letters)
        self._pi: dict[int, Word] = {}
        self._pset: Optional[frozenset] = None

    def pi(self, j: int) -> Word:
        """Path word from the core base to axis vertex j."""
        if j not in self._pi:
            q, r = divmod(j, self.n)
            prefix = Word(self.core.base, self.core.letters[: 2 * r])
            self._pi[j] = w_mul(self.gog, w_pow(self.gog, self.core_word, q), prefix)
        return self._pi[j]

    def axis_vertex(self, j: int) -> int:
        r = j % self.n
        return self.gog.graph.t(self.core.letters[2 * r - 2][1]) if r else self.core.base

    def based_at(self, j: int, a: Word) -> list:
        p = self.pi(j)
        return _reduce(self.gog, self.axis_vertex(j), w_mul(self.gog, w_inv(self.gog, p), a, p).letters)

    def edge_len_at(self, j: int, a: Word) -> int:
        return sum(1 for L in self.based_at(j, a) if L[0] == "e")

    def pointwise_stab(self) -> frozenset:
        """Elements of the base vertex group fixing the whole axis."""
        if self._pset is None:
            G = self.gog.vertex_groups[self.core.base]
            S = set(range(G.order))
            A = self.core_word
            while True:
                keep = set()
                for s in S:
                    ok = True
                    for sgn in (1, -1):
                        w = w_conj(self.gog, w_pow(self.gog, A, sgn), w_vertex(self.core.base, s))
                        red = _reduce(self.gog, self.core.base, w.letters)
                        if len(red) != 1 or red[0][2] not in S:
                            ok = False
                            break
                    if ok:
                        keep.add(s)
                if keep == S:
                    break
                S = keep
            self._pset = frozenset(S)
        return self._pset

    def in_pointwise_stab(self, a: Word) -> Optional[int]:
        if a.base != self.core.base:
            raise Mismatch("pointwise stabilizer test needs a loop at the core base")
        red = _reduce(self.gog, a.base, a.letters)
        if len(red) != 1:
            return None
        s = red[0][2]
        return s if s in self.pointwise_stab() else None


def _axis_orientation(gog, ax: _AxisCalc, w: Word, lw: int) -> Optional[int]:
    """Direction of a hyperbolic w along the core axis: +1/-1, None if off it.

    w must be a loop at the core base with translation edge count lw > 0.
    w^n * A^(-sgn*lw) fixes the axis pointwise iff axis(w) is the core axis
    traversed with sign sgn.
    """
    for sgn in (1, -1):
        probe = w_mul(gog, w_pow(gog, w, ax.n), w_pow(gog, ax.core_word, -sgn * lw))
        if ax.in_pointwise_stab(probe) is not None:
            return sgn
    return None


def _min_window(gog, ax: _AxisCalc, a: Word, ell: int, cap: int):
    """Bottom of the convex position-distance function j -> d(axis_j, Min(a)).

    Returns (lo, hi, dmin) in axis positions.  Caller guarantees Min(a) does
    not contain the whole axis, so the bottom is a bounded interval.
    """
    D = lambda j: (ax.edge_len_at(j, a) - ell) // 2
    j = 0
    d = D(j)
    steps = 0
    while True:
        steps += 1
        if steps > cap:
            raise ResourceLimit("axis walk exceeded its cap")
        if D(j + 1) < d:
            j, d = j + 1, D(j + 1)
        elif D(j - 1) < d:
            j, d = j - 1, D(j - 1)
        else:
            break
    lo = hi = j
    while D(lo - 1) == d:
        lo -= 1
        steps += 1
        if steps > cap:
            raise ResourceLimit("axis walk exceeded its cap")
    while D(hi + 1) == d:
        hi += 1
        steps += 1
        if steps > cap:
            raise ResourceLimit("axis walk exceeded its cap")
    return lo, hi, d


def solve_power_conjugacy(gog, u: Word, a: Word, b: Word):
    """The set { m : u^m a u^-m = b } for hyperbolic u; all loops at one base.

    Returns ("empty",) | ("finite", (m, ...)) | ("residues", offsets, period).
    """
    if len({u.base, a.base, b.base}) != 1:
        raise Mismatch("power conjugacy needs loops at a common base")
    cu = _cyclic_core(gog, u.base, _reduce(gog, u.base, u.letters))
    if cu.edge_count == 0:
        raise Mismatch("power conjugacy needs a hyperbolic u")
    # move to the core base so that the base lift lies on the axis
    a0 = w_mul(gog, w_inv(gog, cu.conj), a, cu.conj)
    b0 = w_mul(gog, w_inv(gog, cu.conj), b, cu.conj)
    ax = _AxisCalc(gog, cu)
    n = cu.edge_count
    ca = _cyclic_core(gog, cu.base, _reduce(gog, cu.base, a0.letters))
    cb = _cyclic_core(gog, cu.base, _reduce(gog, cu.base, b0.letters))
    la, lb = ca.edge_count, cb.edge_count
    if la != lb:
        return ("empty",)
    A = ax.core_word

    def verify(m: int):
        return is_equal(gog, w_mul(gog, w_pow(gog, A, m), a0, w_pow(gog, A, -m)), b0)

    def vertex_elt(w: Word) -> int:
        red = _reduce(gog, cu.base, w.letters)
        if len(red) != 1:
            raise Mismatch("expected a vertex element on the axis stabilizer")
        return red[0][2]

    def orbit_residues(start: int, target: int, step_of):
        # iterate a bijection of the finite pointwise stabilizer: purely periodic
        seen: dict[int, int] = {}
        cur, m = start, 0
        offs = []
        while cur not in seen:
            seen[cur] = m
            if cur == target:
                offs.append(m)
            cur = step_of(cur)
            m += 1
        period = m - seen[cur]
        if not offs:
            return ("empty",)
        return ("residues", tuple(sorted(o % period for o in offs)), period)

    # case: a fixes the whole axis pointwise
    sa = ax.in_pointwise_stab(a0)
    if la == 0 and sa is not None:
        sb = ax.in_pointwise_stab(b0)
        if sb is None:
            return ("empty",)
        return orbit_residues(
            sa, sb, lambda s: vertex_elt(w_conj(gog, A, w_vertex(cu.base, s)))
        )
    if la == 0 and ax.in_pointwise_stab(b0) is not None:
        return ("empty",)

    # case: hyperbolic a sharing the axis of u (either direction)
    if la:
        a_on = _axis_orientation(gog, ax, a0, la) is not None
        b_on = _axis_orientation(gog, ax, b0, lb) is not None
        if a_on != b_on:
            return ("empty",)
        if a_on:
            rho_b = w_mul(gog, b0, w_inv(gog, a0))
            sb = ax.in_pointwise_stab(rho_b)
            if sb is None:
                return ("empty",)
            s1 = ax.in_pointwise_stab(w_mul(gog, w_conj(gog, A, a0), w_inv(gog, a0)))
            if s1 is None:
                return ("empty",)
            G = gog.vertex_groups[cu.base]
            return orbit_residues(
                0,
                sb,
                lambda s: G.mul(vertex_elt(w_conj(gog, A, w_vertex(cu.base, s))), s1),
            )

    # bounded window: align the bottom intervals and verify the one candidate
    cap = (max(G.order for G in gog.vertex_groups) + 2) * n + \
        sum(1 for L in _reduce(gog, cu.base, a0.letters) if L[0] == "e") + \
        sum(1 for L in _reduce(gog, cu.base, b0.letters) if L[0] == "e") + WALK_SLACK
    lo1, hi1, d1 = _min_window(gog, ax, a0, la, cap)
    lo2, hi2, d2 = _min_window(gog, ax, b0, lb, cap)
    if d1 != d2 or (hi1 - lo1) != (hi2 - lo2):
        return ("empty",)
    if (lo2 - lo1) % n:
        return ("empty",)
    m = (lo2 - lo1) // n
    return ("finite", (m,)) if verify(m) else ("empty",)


def simultaneous_conjugacy(
    gog: GraphOfGroups, tuple1: Sequence[Word], tuple2: Sequence[Word]
) -> Optional[Word]:
    """One word c with c*x_i*c^-1 = y_i for all i, or None."""
    if len(tuple1) != len(tuple2):
        raise Mismatch("tuples must have equal arity")
    if not tuple1:
        return Word(0, ())
    bases = {w.base for w in tuple1} | {w.base for w in tuple2}
    if len(bases) != 1:
        raise Mismatch("all loops must share one base vertex")
    for w in list(tuple1) + list(tuple2):
        if w_end(gog, w) != w.base:
            raise NotAPath("simultaneous conjugacy is defined for loops")
    xs, ys = list(tuple1), list(tuple2)
    cores_x = [_cyclic_core(gog, w.base, _reduce(gog, w.base, w.letters)) for w in xs]
    cores_y = [_cyclic_core(gog, w.base, _reduce(gog, w.base, w.letters)) for w in ys]
    for cx, cy in zip(cores_x, cores_y):
        if (cx.edge_count == 0) != (cy.edge_count == 0) or cx.edge_count != cy.edge_count:
            return None

    hyp = [i for i, c in enumerate(cores_x) if c.edge_count]
    if not hyp:
        # all elliptic: look for a hyperbolic pairwise product (Serre's lemma)
        derived = None
        for i in range(len(xs)):
            for j in range(len(xs)):
                if i == j:
                    continue
                p = w_mul(gog, xs[i], xs[j])
                if _cyclic_core(gog, p.base, _reduce(gog, p.base, p.letters)).edge_count:
                    derived = (i, j)
                    break
            if derived:
                break
        if derived is None:
            # whole group elliptic: move both tuples to common fixed vertices
            P1 = common_fixed_vertex(gog, xs)
            P2 = common_fixed_vertex(gog, ys)
            if P1 is None or P2 is None:
                return None
            v1, v2 = w_end(gog, P1), w_end(gog, P2)
            t1 = tuple(
                _reduce(gog, v1, w_mul(gog, w_inv(gog, P1), x, P1).letters)[0][2] for x in xs
            )
            t2 = tuple(
                _reduce(gog, v2, w_mul(gog, w_inv(gog, P2), y, P2).letters)[0][2] for y in ys
            )
            U = _tuple_fusion(gog, v1, t1, v2, t2)
            if U is None:
                return None
            c = w_mul(gog, P2, U, w_inv(gog, P1))
            return c if all(is_equal(gog, w_conj(gog, c, x), y) for x, y in zip(xs, ys)) else None
        i, j = derived
        xs = [w_mul(gog, xs[i], xs[j])] + xs
        ys = [w_mul(gog, ys[i], ys[j])] + ys
    else:
        k = hyp[0]
        xs = [xs[k]] + xs[:k] + xs[k + 1 :]
        ys = [ys[k]] + ys[:k] + ys[k + 1 :]

    u, v = xs[0], ys[0]
    c0 = is_conjugate(gog, u, v)
    if c0 is None:
        return None
    core_u, F = hyperbolic_centralizer_data(gog, u)
    rest = list(zip(xs[1:], ys[1:]))
    for f in F:
        sol = _solution_all()
        for xi, yi in rest:
            ai = w_conj(gog, f, xi)
            bi = w_conj(gog, w_inv(gog, c0), yi)
            sol = _intersect_solutions(sol, solve_power_conjugacy(gog, u, ai, bi))
            if sol == ("empty",):
                break
        m = _pick_solution(sol)
        if m is None:
            continue
        c = w_mul(gog, c0, w_pow(gog, u, m), f)
        if all(is_equal(gog, w_conj(gog, c, x), y) for x, y in zip(xs, ys)):
            return c
    return None


# ---------------------------------------------------------------------------
# finite subgroup representatives

def finite_subgroup_reps(gog: GraphOfGroups) -> list[tuple[int, Subgroup]]:
    """One (vertex, Subgroup) per conjugacy class of finite subgroups of pi1."""
    t = gog._t()
    image_set, mono_inv = t["image_set"], t["mono_inv"]
    nodes: list[tuple[int, tuple[int, ...]]] = []
    for v, G in enumerate(gog.vertex_groups):
        for H in all_subgroups(G):
            nodes.append((v, H.elements))
    if len(nodes) > FUSION_NODE_CAP:
        raise ResourceLimit("too many vertex subgroups to fuse")
    index = {node: i for i, node in enumerate(nodes)}
    parent = list(range(len(nodes)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    for (v, elems), i in index.items():
        G = gog.vertex_groups[v]
        for g in range(G.order):
            conj = tuple(sorted(G.conjugate(g, h) for h in elems))
            union(i, index[(v, conj)])
        for e in gog.graph.edges_at(v):
            f = gog.graph.inv[e]  # t(f) = v
            if all(h in image_set[f] for h in elems):
                moved = tuple(
                    sorted(gog.monos[e].images[mono_inv[f][h]] for h in elems)
                )
                union(i, index[(gog.graph.t(e), moved)])
    classes: dict[int, tuple[int, tuple[int, ...]]] = {}
    for node, i in index.items():
        r = find(i)
        if r not in classes or node < classes[r]:
            classes[r] = node
    reps = sorted(classes.values(), key=lambda n: (len(n[1]), n[0], n[1]))
    return [(v, Subgroup(gog.vertex_groups[v], elems)) for v, elems in reps]


# ---------------------------------------------------------------------------
# pi1 presentation and generators

def pi1_vertex_generator(gog: GraphOfGroups, v: int, g: int) -> Word:
    p = gog.tree_path(v)
    return w_mul(gog, p, w_vertex(v, g), w_inv(gog, p))


def pi1_edge_generator(gog: GraphOfGroups, e: int) -> Word:
    po = gog.tree_path(gog.graph.o(e))
    pt = gog.tree_path(gog.graph.t(e))
    return w_mul(gog, po, w_edge(gog, e), w_inv(gog, pt))


def pi1_presentation(gog: GraphOfGroups) -> Presentation:
    """Generators: non-identity vertex elements and non-tree edge pairs."""
    tree = gog.maximal_tree
    names: list[str] = []
    gen_words: list[Word] = []
    gen_index: dict = {}
    for v, G in enumerate(gog.vertex_groups):
        for g in range(1, G.order):
            gen_index[("v", v, g)] = len(names)
            names.append(f"v{v}:{g}")
            gen_words.append(pi1_vertex_generator(gog, v, g))
    nontree = [e for e in gog.graph.pair_reps() if e not in tree]
    for e in nontree:
        gen_index[("e", e)] = len(names)
        names.append(f"e{e}")
        gen_words.append(pi1_edge_generator(gog, e))

    def vref(v, g):
        return gen_index[("v", v, g)] + 1

    relators: list[tuple[int, ...]] = []
    for v, G in enumerate(gog.vertex_groups):
        for x in range(1, G.order):
            for y in range(1, G.order):
                z = G.mul(x, y)
                rel = [vref(v, x), vref(v, y)]
                if z:
                    rel.append(-vref(v, z))
                relators.append(tuple(rel))
    for e in gog.graph.pair_reps():
        tv, ov = gog.graph.t(e), gog.graph.o(e)
        ebar = gog.graph.inv[e]
        for x in range(1, gog.edge_groups[e].order):
            a = gog.monos[e].images[x]
            bimg = gog.monos[ebar].images[x]
            if e in tree:
                rel = [vref(tv, a), -vref(ov, bimg)]
            else:
                k = gen_index[("e", e)] + 1
                rel = [k, vref(tv, a), -k, -vref(ov, bimg)]
            relators.append(tuple(rel))
    return Presentation(tuple(names), tuple(relators), tuple(gen_words))
