"""Extensions of a group by a finite kernel: validation, equivalence, orbits.

An extension 1 -> N -> E -> G -> 1 is recorded by explicit data: the total
group E, the abstract finite kernel N together with the list of its embedded
images in E, and the quotient map E -> G through its values on a fixed
generating set of E.  Both E and G may be finite groups or fundamental
groups of graphs of finite groups; the algorithms only ever use the word
problem, which both backends solve.

Two extensions with the same kernel and quotient are equivalent when some
isomorphism E1 -> E2 restricts to the identity on N and induces the identity
on G.  Equivalence is decided by brute force over lifted generating sets:
pick generators s_1..s_r of E1, lift their quotient images to t_1..t_r in
E2, and try every decoration (t_1 n_1, ..., t_r n_r) with n_i in the
embedded kernel as a candidate homomorphism; do the same in the opposite
direction and look for a mutually inverse pair.  Any map inducing the
identity on G must have this shape, so the search is complete, and every
returned witness re-checks from scratch through
ExtensionEquivalence.problems.

Aut(G) acts on extension data by composing the quotient map with an
automorphism.  Orbits and stabilizers under a finite list of automorphisms
run through the generic orbit search with equivalence as the equality
oracle; only finitely many classes of extensions of G by N exist, so the
orbit closes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence, Union

from .defspace import OrbitProblem, orbit_explore, pi1_apply, word_to_refs
from .errors import Mismatch, ResourceLimit, Unsupported
from .fingroup import FiniteGroup, Homomorphism, minimal_generating_sequence
from .gogcore import GraphOfGroups, Word, is_equal, normal_form, pi1_presentation, w_inv, w_mul

GroupLike = Union[FiniteGroup, GraphOfGroups]

LIFT_CAP = 20_000
DECOR_CAP = 10_000
EXT_ORBIT_CAP = 256


# -- word-problem backends -----------------------------------------------------


class _FinModel:
    """Word-problem view of a finite group; elements are table indices."""

    def __init__(self, group: FiniteGroup):
        self.group = group
        self.gens = tuple(minimal_generating_sequence(group))
        words: dict[int, tuple[int, ...]] = {0: ()}
        queue = deque([0])
        while queue:
            x = queue.popleft()
            for k, s in enumerate(self.gens):
                for ref, y in ((k + 1, group.mul(x, s)), (-(k + 1), group.mul(x, group.inv[s]))):
                    if y not in words:
                        words[y] = words[x] + (ref,)
                        queue.append(y)
        assert len(words) == group.order
        self._words = words
        self.identity = 0

    def mul(self, a: int, b: int) -> int:
        return self.group.mul(a, b)

    def inv(self, a: int) -> int:
        return self.group.inv[a]

    def equal(self, a: int, b: int) -> bool:
        return a == b

    def key(self, a: int) -> int:
        return a

    def refs(self, a: int) -> tuple[int, ...]:
        """Spelling of a over the generators, from the BFS factorization."""
        return self._words[a]

    def relators(self) -> tuple[tuple[int, ...], ...]:
        # one Cayley-cycle relator per (element, generator); presents the group
        out = []
        for x in range(self.group.order):
            wx = self._words[x]
            for k, s in enumerate(self.gens):
                wy = self._words[self.group.mul(x, s)]
                rel = wx + (k + 1,) + tuple(-r for r in reversed(wy))
                if rel:
                    out.append(rel)
        return tuple(out)

    def push(self, auto: Homomorphism, a: int) -> int:
        return auto.images[a]


class _GogModel:
    """Word-problem view of the fundamental group of a graph of groups.

    Elements are loops at vertex 0; generators and relators come from
    pi1_presentation, and canonical keys from the normal form.
    """

    def __init__(self, gog: GraphOfGroups):
        self.gog = gog
        self.pres = pi1_presentation(gog)
        self.gens = self.pres.gen_words
        self.identity = Word(0, ())

    def mul(self, a: Word, b: Word) -> Word:
        return w_mul(self.gog, a, b)

    def inv(self, a: Word) -> Word:
        return w_inv(self.gog, a)

    def equal(self, a: Word, b: Word) -> bool:
        return is_equal(self.gog, a, b)

    def key(self, a: Word) -> Word:
        return normal_form(self.gog, a).word

    def refs(self, a: Word) -> tuple[int, ...]:
        return word_to_refs(self.gog, a)

    def relators(self) -> tuple[tuple[int, ...], ...]:
        return self.pres.relators

    def push(self, auto, a: Word) -> Word:
        return pi1_apply(self.gog, auto, a)


def _model(g: GroupLike):
    if isinstance(g, FiniteGroup):
        return _FinModel(g)
    if isinstance(g, GraphOfGroups):
        return _GogModel(g)
    raise Unsupported("group must be a FiniteGroup or a GraphOfGroups")


def extension_generators(total: GroupLike) -> tuple:
    """The generating set of E that quot_images must follow, in order.

    A finite group uses its minimal generating sequence; a graph of groups
    uses the pi1_presentation generators (loops at vertex 0).
    """
    return _model(total).gens


def _eval_refs(m, refs: Sequence[int], images: Sequence) -> object:
    """Evaluate a signed generator word with the given images, in model m."""
    out = m.identity
    for r in refs:
        g = images[r - 1] if r > 0 else m.inv(images[-r - 1])
        out = m.mul(out, g)
    return out


def _preimage(me, quot_images: Sequence, mq, target, budget: int):
    """Total-group element mapping onto target, by breadth-first search.

    Returns None when the image subgroup closes without reaching target;
    raises ResourceLimit when budget quotient elements were seen with the
    frontier still open, so running out is never reported as absence.
    """
    tkey = mq.key(target)
    if mq.key(mq.identity) == tkey:
        return me.identity
    arrows = []
    for i, s in enumerate(me.gens):
        arrows.append((s, quot_images[i]))
        arrows.append((me.inv(s), mq.inv(quot_images[i])))
    seen = {mq.key(mq.identity)}
    frontier = [(me.identity, mq.identity)]
    while frontier:
        nxt = []
        for ee, eq in frontier:
            for se, sq in arrows:
                nq = mq.mul(eq, sq)
                k = mq.key(nq)
                if k == tkey:
                    return me.mul(ee, se)
                if k in seen:
                    continue
                seen.add(k)
                if len(seen) > budget:
                    raise ResourceLimit(f"preimage search saw more than {budget} quotient elements")
                nxt.append((me.mul(ee, se), nq))
        frontier = nxt
    return None


# -- extension data --------------------------------------------------------


@dataclass(frozen=True)
class ExtensionDatum:
    """An extension 1 -> N -> E -> G -> 1 by explicit data.

    total is E and quot is G; each is a FiniteGroup or a GraphOfGroups
    standing for its fundamental group, whose elements are loops at vertex
    0.  n_images[x] is the embedded image in E of the kernel element x, and
    quot_images[i] the quotient image in G of the i-th entry of
    extension_generators(total).
    """

    total: GroupLike
    n_group: FiniteGroup
    n_images: tuple
    quot: GroupLike
    quot_images: tuple


def validate_extension(d: ExtensionDatum, budget: int = LIFT_CAP) -> list[str]:
    """Check that the data describes an extension; returns readable defects.

    Verified in order: the kernel list is an injective homomorphism onto a
    normal subgroup of E, the quotient images define a homomorphism E -> G
    killing the embedded kernel, and that homomorphism is onto with kernel
    exactly the embedded copy, so it identifies E/N with G.  The last part
    lifts quotient generators by a preimage search capped at budget.
    """
    me, mq = _model(d.total), _model(d.quot)
    N = d.n_group
    if len(d.n_images) != N.order:
        return ["kernel image count differs from the kernel order"]
    if len(d.quot_images) != len(me.gens):
        return ["quotient image count differs from the generator count"]
    errs: list[str] = []
    keys = [me.key(n) for n in d.n_images]
    member = set(keys)
    if len(member) != N.order:
        errs.append("kernel images are not distinct")
    for x in range(N.order):
        bad = next(
            (
                y
                for y in range(N.order)
                if not me.equal(d.n_images[N.mul(x, y)], me.mul(d.n_images[x], d.n_images[y]))
            ),
            None,
        )
        if bad is not None:
            errs.append(f"kernel images do not multiply like the kernel at ({x}, {bad})")
            break
    for s in me.gens:
        for t in (s, me.inv(s)):
            if any(me.key(me.mul(me.mul(t, n), me.inv(t))) not in member for n in d.n_images):
                errs.append("embedded kernel is not normal")
                break
        else:
            continue
        break
    for i, rel in enumerate(me.relators()):
        if not mq.equal(_eval_refs(mq, rel, d.quot_images), mq.identity):
            errs.append(f"quotient images break relator {i} of the total group")
            break
    if errs:
        return errs
    for x in range(N.order):
        if not mq.equal(_eval_refs(mq, me.refs(d.n_images[x]), d.quot_images), mq.identity):
            return [f"quotient map does not kill embedded kernel element {x}"]
    # invert the identification: lift each quotient generator and check the
    # two containments that make E/N -> G injective and the lifts generating
    sigma = []
    for i, gq in enumerate(mq.gens):
        t = _preimage(me, d.quot_images, mq, gq, budget)
        if t is None:
            return [f"quotient generator {i} has no preimage: the map is not onto"]
        sigma.append(t)
    for j, rel in enumerate(mq.relators()):
        if me.key(_eval_refs(me, rel, sigma)) not in member:
            errs.append(f"quotient relator {j} lifts outside the embedded kernel")
    for i, s in enumerate(me.gens):
        lifted = _eval_refs(me, mq.refs(d.quot_images[i]), sigma)
        if me.key(me.mul(me.inv(lifted), s)) not in member:
            errs.append(f"generator {i} is not a kernel multiple of a lifted element")
    return errs


def _check_compatible(d1: ExtensionDatum, d2: ExtensionDatum) -> None:
    if d1.n_group.table != d2.n_group.table:
        raise Mismatch("the kernels must be the same finite group")
    q1, q2 = d1.quot, d2.quot
    if isinstance(q1, FiniteGroup) and isinstance(q2, FiniteGroup):
        if q1.table != q2.table:
            raise Mismatch("the quotients must be the same group")
    elif q1 is not q2:
        raise Mismatch("graph-of-groups quotients must be the same object")


# -- equivalence -------------------------------------------------------------


@dataclass(frozen=True)
class ExtensionEquivalence:
    """Mutually inverse isomorphism pair recorded by generator images.

    fwd[i] is the image in E2 of the i-th generator of E1, back[j] the image
    in E1 of the j-th generator of E2.  problems(d1, d2) re-checks the whole
    diagram from scratch: both maps are homomorphisms, mutually inverse, fix
    the embedded kernel pointwise, and commute with the quotient maps.
    """

    fwd: tuple
    back: tuple

    def problems(self, d1: ExtensionDatum, d2: ExtensionDatum) -> list[str]:
        me1, me2, mq = _model(d1.total), _model(d2.total), _model(d1.quot)
        if len(self.fwd) != len(me1.gens) or len(self.back) != len(me2.gens):
            return ["image counts differ from the generator counts"]
        out: list[str] = []
        for label, ms, mt, imgs in (("fwd", me1, me2, self.fwd), ("back", me2, me1, self.back)):
            for i, rel in enumerate(ms.relators()):
                if not mt.equal(_eval_refs(mt, rel, imgs), mt.identity):
                    out.append(f"{label} breaks relator {i}")
                    break
        if out:
            return out
        if not _mutually_inverse(me1, me2, self.fwd, self.back):
            out.append("the two maps are not mutually inverse")
        for x in range(d1.n_group.order):
            if not me2.equal(_eval_refs(me2, me1.refs(d1.n_images[x]), self.fwd), d2.n_images[x]):
                out.append("fwd moves the embedded kernel")
                break
        for x in range(d2.n_group.order):
            if not me1.equal(_eval_refs(me1, me2.refs(d2.n_images[x]), self.back), d1.n_images[x]):
                out.append("back moves the embedded kernel")
                break
        for i in range(len(self.fwd)):
            pushed = _eval_refs(mq, me2.refs(self.fwd[i]), d2.quot_images)
            if not mq.equal(pushed, d1.quot_images[i]):
                out.append("fwd does not commute with the quotient maps")
                break
        for j in range(len(self.back)):
            pushed = _eval_refs(mq, me1.refs(self.back[j]), d1.quot_images)
            if not mq.equal(pushed, d2.quot_images[j]):
                out.append("back does not commute with the quotient maps")
                break
        return out


def _mutually_inverse(m1, m2, f_imgs: Sequence, g_imgs: Sequence) -> bool:
    for i, s in enumerate(m1.gens):
        if not m1.equal(_eval_refs(m1, m2.refs(f_imgs[i]), g_imgs), s):
            return False
    for j, t in enumerate(m2.gens):
        if not m2.equal(_eval_refs(m2, m1.refs(g_imgs[j]), f_imgs), t):
            return False
    return True


def _lifted_morphisms(ds: ExtensionDatum, ms, dt: ExtensionDatum, mt, mq, budget: int) -> list[tuple]:
    """All maps s_i -> t_i * n_i that are homomorphisms fixing the kernel."""
    N = ds.n_group
    lifts = []
    for gq in ds.quot_images:
        t = _preimage(mt, dt.quot_images, mq, gq, budget)
        if t is None:
            return []
        lifts.append(t)
    r = len(lifts)
    if N.order**r > budget:
        raise ResourceLimit(f"{N.order}^{r} kernel decorations exceed the budget {budget}")
    rels = ms.relators()
    n_refs = [ms.refs(n) for n in ds.n_images]
    out = []
    for deco in product(range(N.order), repeat=r):
        imgs = tuple(mt.mul(lifts[i], dt.n_images[deco[i]]) for i in range(r))
        if any(not mt.equal(_eval_refs(mt, rel, imgs), mt.identity) for rel in rels):
            continue
        if all(mt.equal(_eval_refs(mt, n_refs[x], imgs), dt.n_images[x]) for x in range(N.order)):
            out.append(imgs)
    return out


def equivalent(
    d1: ExtensionDatum, d2: ExtensionDatum, budget: int = DECOR_CAP
) -> Optional[ExtensionEquivalence]:
    """First mutually inverse pair of kernel-fixing lifted isomorphisms.

    None means no decoration works in one of the directions, which by
    completeness of the lift enumeration makes the extensions inequivalent.
    budget bounds the preimage searches and the decorations per direction;
    overrunning it raises ResourceLimit instead of answering.
    """
    _check_compatible(d1, d2)
    me1, me2, mq = _model(d1.total), _model(d2.total), _model(d1.quot)
    fwd = _lifted_morphisms(d1, me1, d2, me2, mq, budget)
    back = _lifted_morphisms(d2, me2, d1, me1, mq, budget)
    for f in fwd:
        for g in back:
            if _mutually_inverse(me1, me2, f, g):
                return ExtensionEquivalence(f, g)
    return None


# -- the Aut(G) action --------------------------------------------------------


@dataclass(frozen=True)
class ExtensionOrbit:
    """Orbit of an extension class under quotient automorphisms.

    word spells, innermost first, a composite of the automorphisms carrying
    the first datum's class onto the second's, when one exists.  stabilizer
    holds signed Schreier words fixing the first class, and orbit one datum
    per class reached.
    """

    related: bool
    word: Optional[tuple[int, ...]]
    stabilizer: tuple[tuple[int, ...], ...]
    orbit: tuple[ExtensionDatum, ...]


def extension_orbit(
    d1: ExtensionDatum,
    d2: ExtensionDatum,
    alphas: Sequence,
    budget: int = DECOR_CAP,
    cap: int = EXT_ORBIT_CAP,
) -> ExtensionOrbit:
    """Decide whether some composite of alphas carries d1's class to d2's.

    alphas are automorphisms of the shared quotient: bijective fingroup
    homomorphisms for a finite quotient, pi1 maps for a graph of groups.
    Twisting replaces the quotient map by its composite with an
    automorphism; the orbit search uses equivalence as its equality oracle,
    so verdicts reduce to re-checkable witnesses.
    """
    _check_compatible(d1, d2)
    for a in alphas:
        if isinstance(a, Homomorphism):
            if not a.is_bijective():
                raise Mismatch("quotient automorphisms must be bijective")
        elif a.problems():
            raise Mismatch("quotient automorphism is not a homomorphism")
    mq = _model(d1.quot)

    def act(k: int, d: ExtensionDatum) -> ExtensionDatum:
        twisted = tuple(mq.push(alphas[k], g) for g in d.quot_images)
        return ExtensionDatum(d.total, d.n_group, d.n_images, d.quot, twisted)

    p = OrbitProblem(
        labels=tuple(f"a{k}" for k in range(len(alphas))),
        seed=d1,
        same=lambda x, y: equivalent(x, y, budget) is not None,
        act=act,
    )
    res = orbit_explore(p, cap)
    for i, rep in enumerate(res.representatives):
        if equivalent(rep, d2, budget) is not None:
            return ExtensionOrbit(True, res.words[i], res.stabilizer, res.representatives)
    return ExtensionOrbit(False, None, res.stabilizer, res.representatives)
