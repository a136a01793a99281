"""Finite groups given by full multiplication tables.

Elements are dense indices 0..n-1 with the identity pinned at index 0.
All operations are pure functions over immutable values, and every list
an operation returns is canonically ordered, so outputs are reproducible
across runs.  Intended scale is |G| up to a few hundred; `all_subgroups`
is capped at |G| <= 1024.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import NotAGroup, ResourceLimit

DEFAULT_AUT_BUDGET = 5_000_000
ALL_SUBGROUPS_CAP = 1024


class FiniteGroup:
    """A finite group: `table[i][j]` is the index of i*j, identity is 0."""

    __slots__ = ("order", "table", "inv", "name")

    def __init__(self, table: Sequence[Sequence[int]], name: str | None = None):
        arr = np.asarray(table, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise NotAGroup("table is not square")
        n = int(arr.shape[0])
        if n == 0:
            raise NotAGroup("empty table")
        if arr.min() < 0 or arr.max() >= n:
            raise NotAGroup("table entry out of range")
        rng = np.arange(n)
        if not np.array_equal(arr[0], rng) or not np.array_equal(arr[:, 0], rng):
            raise NotAGroup("identity law fails at index 0")
        if not np.array_equal(np.sort(arr, axis=1), np.tile(rng, (n, 1))):
            raise NotAGroup("some row is not a permutation")
        if not np.array_equal(np.sort(arr, axis=0), np.tile(rng.reshape(n, 1), (1, n))):
            raise NotAGroup("some column is not a permutation")
        # (i*j)*k == i*(j*k), row-chunked to bound memory near the size cap.
        for i in range(n):
            if not np.array_equal(arr[arr[i]], arr[i][arr]):
                raise NotAGroup(f"associativity fails in row {i}")
        self.order = n
        self.table = tuple(tuple(int(x) for x in row) for row in arr)
        inv = [0] * n
        for i, row in enumerate(self.table):
            inv[i] = row.index(0)
        self.inv = tuple(inv)
        self.name = name

    def mul(self, x: int, y: int) -> int:
        return self.table[x][y]

    def inverse(self, x: int) -> int:
        return self.inv[x]

    def conjugate(self, g: int, x: int) -> int:
        """ad_g(x) = g * x * g^-1."""
        return self.table[self.table[g][x]][self.inv[g]]

    def element_order(self, x: int) -> int:
        k, y = 1, x
        while y != 0:
            y = self.table[y][x]
            k += 1
        return k

    def power(self, x: int, k: int) -> int:
        if k < 0:
            x, k = self.inv[x], -k
        y = 0
        for _ in range(k):
            y = self.table[y][x]
        return y

    def elements(self) -> range:
        return range(self.order)

    def is_abelian(self) -> bool:
        return all(
            self.table[i][j] == self.table[j][i]
            for i in range(self.order)
            for j in range(i + 1, self.order)
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FiniteGroup) and self.table == other.table

    def __hash__(self) -> int:
        return hash(self.table)

    def __repr__(self) -> str:
        label = self.name or f"order {self.order}"
        return f"FiniteGroup({label})"


def from_table(table: Sequence[Sequence[int]], name: str | None = None) -> FiniteGroup:
    """Validate a square index table and return the group it defines."""
    return FiniteGroup(table, name=name)


@dataclass(frozen=True)
class Homomorphism:
    """An element-wise map between finite groups, checked on construction."""

    source: FiniteGroup
    target: FiniteGroup
    images: tuple[int, ...]

    def __post_init__(self):
        if len(self.images) != self.source.order:
            raise NotAGroup("image list length differs from source order")
        if self.images[0] != 0:
            raise NotAGroup("identity is not mapped to identity")
        mul_s, mul_t, im = self.source.table, self.target.table, self.images
        for x in range(self.source.order):
            imx = im[x]
            row = mul_s[x]
            trow = mul_t[imx]
            for y in range(self.source.order):
                if im[row[y]] != trow[im[y]]:
                    raise NotAGroup(f"not a homomorphism at ({x}, {y})")

    def __call__(self, x: int) -> int:
        return self.images[x]

    def is_injective(self) -> bool:
        return len(set(self.images)) == self.source.order

    def is_bijective(self) -> bool:
        return self.source.order == self.target.order and self.is_injective()

    def compose(self, inner: "Homomorphism") -> "Homomorphism":
        """self o inner."""
        if inner.target is not self.source and inner.target != self.source:
            raise NotAGroup("composition mismatch")
        return Homomorphism(inner.source, self.target, tuple(self.images[x] for x in inner.images))

    def inverted(self) -> "Homomorphism":
        if not self.is_bijective():
            raise NotAGroup("cannot invert a non-bijective homomorphism")
        back = [0] * self.target.order
        for x, y in enumerate(self.images):
            back[y] = x
        return Homomorphism(self.target, self.source, tuple(back))

    def image_elements(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.images)))


def identity_map(G: FiniteGroup) -> Homomorphism:
    return Homomorphism(G, G, tuple(range(G.order)))


@dataclass(frozen=True)
class Subgroup:
    """A subgroup of `ambient`, stored as the sorted tuple of its elements."""

    ambient: FiniteGroup
    elements: tuple[int, ...]

    def __post_init__(self):
        elems = set(self.elements)
        if tuple(sorted(elems)) != self.elements:
            raise NotAGroup("subgroup elements must be sorted and duplicate-free")
        if 0 not in elems:
            raise NotAGroup("subgroup misses the identity")
        G = self.ambient
        for x in self.elements:
            if G.inv[x] not in elems:
                raise NotAGroup("subgroup not closed under inverse")
            for y in self.elements:
                if G.table[x][y] not in elems:
                    raise NotAGroup("subgroup not closed under multiplication")

    @property
    def order(self) -> int:
        return len(self.elements)

    def contains(self, x: int) -> bool:
        return x in set(self.elements)

    def index(self) -> int:
        return self.ambient.order // self.order

    def conjugate_by(self, g: int) -> "Subgroup":
        """ad_g(H) = g H g^-1."""
        G = self.ambient
        return Subgroup(G, tuple(sorted(G.conjugate(g, h) for h in self.elements)))

    def is_normal(self) -> bool:
        mine = set(self.elements)
        G = self.ambient
        return all(G.conjugate(g, h) in mine for g in G.elements() for h in self.elements)

    def as_group(self) -> tuple[FiniteGroup, Homomorphism]:
        """Reindexed copy plus the embedding into the ambient group."""
        pos = {e: i for i, e in enumerate(self.elements)}
        amb = self.ambient
        table = [[pos[amb.table[x][y]] for y in self.elements] for x in self.elements]
        H = FiniteGroup(table)
        return H, Homomorphism(H, amb, self.elements)


def closure(G: FiniteGroup, seed: Iterable[int]) -> tuple[int, ...]:
    """Elements of the subgroup generated by `seed`, sorted."""
    have = {0}
    frontier = [0]
    for s in seed:
        if s not in have:
            have.add(s)
            frontier.append(s)
    while frontier:
        nxt = []
        for x in frontier:
            for y in list(have):
                for z in (G.table[x][y], G.table[y][x]):
                    if z not in have:
                        have.add(z)
                        nxt.append(z)
        frontier = nxt
    return tuple(sorted(have))


def subgroup_generated(G: FiniteGroup, seed: Iterable[int]) -> Subgroup:
    return Subgroup(G, closure(G, seed))


def minimal_generating_sequence(G: FiniteGroup) -> list[int]:
    """Greedy generating sequence: repeatedly adjoin the least element outside."""
    gens: list[int] = []
    have = (0,)
    while len(have) < G.order:
        g = next(x for x in range(G.order) if x not in set(have))
        gens.append(g)
        have = closure(G, gens)
    return gens


def _definition_chain(G: FiniteGroup, gens: Sequence[int]) -> list[tuple[int, tuple]]:
    """Order of construction of every element from `gens`.

    Entries are (element, ('gen', k)) or (element, ('mul', x, y)) with x, y
    defined earlier; lets a generator-image assignment extend to all of G in
    O(|G|) multiplications.
    """
    chain: list[tuple[int, tuple]] = [(0, ("id",))]
    defined = {0}
    for k, g in enumerate(gens):
        if g in defined:
            continue
        chain.append((g, ("gen", k)))
        defined.add(g)
        frontier = [g]
        while frontier:
            nxt = []
            for x in list(defined):
                for y in frontier:
                    for a, b in ((x, y), (y, x)):
                        z = G.table[a][b]
                        if z not in defined:
                            chain.append((z, ("mul", a, b)))
                            defined.add(z)
                            nxt.append(z)
            frontier = nxt
    return chain


def isomorphisms(G: FiniteGroup, H: FiniteGroup, budget: int = DEFAULT_AUT_BUDGET) -> list[Homomorphism]:
    """All isomorphisms G -> H, sorted by image tuple.

    Search is by images of a greedy minimal generating sequence with
    incremental pruning; raises ResourceLimit past `budget` work units.
    """
    if G.order != H.order:
        return []
    if sorted(G.element_order(x) for x in G.elements()) != sorted(
        H.element_order(x) for x in H.elements()
    ):
        return []
    gens = minimal_generating_sequence(G)
    chain = _definition_chain(G, gens)
    stage_of: dict[int, int] = {}
    # stage k of the chain = elements of <gens[0..k]>
    for elem, how in chain:
        if how[0] == "id":
            stage_of[elem] = -1
        elif how[0] == "gen":
            stage_of[elem] = how[1]
        else:
            stage_of[elem] = max(stage_of[how[1]], stage_of[how[2]])
    by_order: dict[int, list[int]] = {}
    for y in H.elements():
        by_order.setdefault(H.element_order(y), []).append(y)
    candidates = [by_order.get(G.element_order(g), []) for g in gens]

    prior_elems: list[list[int]] = []
    stage_elems: list[list[tuple[int, tuple]]] = []
    for k in range(len(gens)):
        prior_elems.append([e for e, _ in chain if stage_of[e] < k])
        stage_elems.append([(e, how) for e, how in chain if stage_of[e] == k])

    found: list[tuple[int, ...]] = []
    phi: list[int | None] = [None] * G.order
    phi[0] = 0
    work = 0

    def extend(stage: int) -> None:
        nonlocal work
        if stage == len(gens):
            found.append(tuple(phi))  # type: ignore[arg-type]
            return
        prior = prior_elems[stage]
        mine = stage_elems[stage]
        for cand in candidates[stage]:
            work += 1
            if work > budget:
                raise ResourceLimit("isomorphism search budget exceeded")
            used = {phi[e] for e in prior}
            if cand in used:
                continue
            ok = True
            for e, how in mine:
                if how[0] == "gen":
                    phi[e] = cand
                else:
                    phi[e] = H.table[phi[how[1]]][phi[how[2]]]  # type: ignore[index]
                if phi[e] in used:
                    ok = False
                    break
                used.add(phi[e])
            if ok:
                # homomorphism check on pairs that touch this stage;
                # prior x prior was verified one level up
                new = [e for e, _ in mine]
                done = prior + new
                for a, b in itertools.chain(
                    itertools.product(done, new), itertools.product(new, prior)
                ):
                    work += 1
                    if work > budget:
                        raise ResourceLimit("isomorphism search budget exceeded")
                    if phi[G.table[a][b]] != H.table[phi[a]][phi[b]]:  # type: ignore[index]
                        ok = False
                        break
            if ok:
                extend(stage + 1)
            for e, _ in mine:
                phi[e] = None

    extend(0)
    found.sort()
    return [Homomorphism(G, H, images) for images in found]


def automorphisms(G: FiniteGroup, budget: int = DEFAULT_AUT_BUDGET) -> list[Homomorphism]:
    """The full automorphism list of G in lexicographic-images order."""
    return isomorphisms(G, G, budget=budget)


def centralizer(G: FiniteGroup, S: Iterable[int]) -> Subgroup:
    """Elements commuting with every member of S."""
    S = list(S)
    elems = [g for g in G.elements() if all(G.table[g][s] == G.table[s][g] for s in S)]
    return Subgroup(G, tuple(elems))


def normalizer(G: FiniteGroup, H: Subgroup) -> Subgroup:
    mine = set(H.elements)
    elems = [g for g in G.elements() if {G.conjugate(g, h) for h in H.elements} == mine]
    return Subgroup(G, tuple(sorted(elems)))


def subgroup_conjugator(G: FiniteGroup, H1: Subgroup, H2: Subgroup) -> Optional[int]:
    """Least g with H1 = H2^g (equivalently g H1 g^-1 = H2), or None."""
    if H1.order != H2.order:
        return None
    target = set(H2.elements)
    for g in G.elements():
        if all(G.conjugate(g, h) in target for h in H1.elements):
            return g
    return None


def all_subgroups(G: FiniteGroup, cap: int = ALL_SUBGROUPS_CAP) -> list[Subgroup]:
    """Every subgroup of G, ordered by (order, element tuple)."""
    if G.order > cap:
        raise ResourceLimit(f"all_subgroups cap is |G| <= {cap}")
    seen: set[tuple[int, ...]] = {(0,)}
    frontier = [(0,)]
    while frontier:
        nxt = []
        for base in frontier:
            inside = set(base)
            for g in G.elements():
                if g in inside:
                    continue
                K = closure(G, base + (g,))
                if K not in seen:
                    seen.add(K)
                    nxt.append(K)
        frontier = nxt
    return [Subgroup(G, elems) for elems in sorted(seen, key=lambda t: (len(t), t))]


def quotient(G: FiniteGroup, N: Subgroup) -> tuple[FiniteGroup, Homomorphism]:
    """G/N for normal N, with the projection map; coset reps are least indices."""
    if not N.is_normal():
        raise NotAGroup("quotient by a non-normal subgroup")
    nset = set(N.elements)
    rep_of: dict[int, int] = {}
    for g in G.elements():
        if g in rep_of:
            continue
        coset = sorted(G.table[g][n] for n in nset)
        for c in coset:
            rep_of[c] = coset[0]
    reps = sorted(set(rep_of.values()))
    pos = {r: i for i, r in enumerate(reps)}
    table = [[pos[rep_of[G.table[a][b]]] for b in reps] for a in reps]
    Q = FiniteGroup(table)
    return Q, Homomorphism(G, Q, tuple(pos[rep_of[g]] for g in G.elements()))


# ---------------------------------------------------------------------------
# stock constructions used across tests and sample files

def trivial() -> FiniteGroup:
    return FiniteGroup([[0]], name="1")


def cyclic(n: int) -> FiniteGroup:
    if n < 1:
        raise NotAGroup("cyclic group order must be positive")
    return FiniteGroup([[(i + j) % n for j in range(n)] for i in range(n)], name=f"Z{n}")


def direct_product(A: FiniteGroup, B: FiniteGroup) -> FiniteGroup:
    """Index (a, b) as a * B.order + b; identity stays at 0."""
    n, m = A.order, B.order
    table = [
        [A.table[i // m][j // m] * m + B.table[i % m][j % m] for j in range(n * m)]
        for i in range(n * m)
    ]
    name = None
    if A.name and B.name:
        name = f"{A.name}x{B.name}"
    return FiniteGroup(table, name=name)


def klein_four() -> FiniteGroup:
    return FiniteGroup(direct_product(cyclic(2), cyclic(2)).table, name="V4")


def dihedral(n: int) -> FiniteGroup:
    """D_n of order 2n: pairs r^i s^e indexed as i + n*e."""
    if n < 1:
        raise NotAGroup("dihedral parameter must be positive")
    size = 2 * n

    def mul(x: int, y: int) -> int:
        i, e = x % n, x // n
        j, f = y % n, y // n
        # (r^i s^e)(r^j s^f) = r^(i + j or i - j) s^(e+f)
        k = (i + j) % n if e == 0 else (i - j) % n
        return k + n * ((e + f) % 2)

    return FiniteGroup([[mul(x, y) for y in range(size)] for x in range(size)], name=f"D{n}")


def symmetric(n: int) -> FiniteGroup:
    """S_n with permutations enumerated so the identity is first."""
    perms = sorted(itertools.permutations(range(n)))
    pos = {p: i for i, p in enumerate(perms)}
    table = [
        [pos[tuple(p[q[k]] for k in range(n))] for q in perms]
        for p in perms
    ]
    return FiniteGroup(table, name=f"S{n}")
