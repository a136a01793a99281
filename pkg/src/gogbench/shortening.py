"""Short and long morphisms into a hyperbolic target, exact over free groups.

A morphism into a hyperbolic group H is long, for a distinguished source
pair a, b, when some element h of length 200*delta certifies that one of the
triples (phi(a), phi(b)), (phi(b), phi(ab), phi(a^-1 b)), or (phi(a),
phi(ba), phi(b^-1 a)) lies in the set L_h: elements g with |g| >= 1000*delta
whose geodesic [1, g] passes within 20*delta of both h and g*h.  Long
morphisms shrink: conjugating by the witness strictly decreases
Q = max(|phi(a)|, |phi(b)|), so iterating reaches a short representative of
the post-conjugacy class, and within a post-conjugacy class whose images
generate a non-elementary subgroup only finitely many short morphisms exist.

Free targets are handled exactly: words are strings over the first rank
lowercase letters with uppercase inverses, geodesics are freely reduced
words, and membership in L_h reduces to interval arithmetic on common
prefix lengths.  Free groups have delta = 0, which would degenerate every
threshold, so the effective delta is floored at 1; the tree geometry keeps
every inequality exact.  Witness candidates are restricted to the
length-200*delta prefixes of the six relevant image words and of their
inverses.  In a tree this restriction is complete: a valid witness agrees
with each certified word up to the 20*delta slack, so the exact prefix of
any certified word is itself a valid witness (prefix meets satisfy
meet(x, z) >= min(meet(x, y), meet(y, z))).  The test suite cross-checks
this claim against full sphere scans at scaled-down thresholds.

Other targets go through a user-supplied geodesic oracle mapping any word
to a geodesic representative, with inverses spelled by swapping case.
There the restricted witness search is not known to be complete: Long is
still only reported with a verified witness, and Short verdicts carry
exhaustive=False.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

from .errors import ElementaryImage, Mismatch, NonDecreasingStep, OracleRequired


# -- free words as case-sensitive strings ---------------------------------------


def inv_word(w: str) -> str:
    return w[::-1].swapcase()


def reduce_word(w: str) -> str:
    out: list[str] = []
    for ch in w:
        if out and out[-1] == ch.swapcase():
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


def meet_len(u: str, v: str) -> int:
    """Length of the common prefix of two reduced words."""
    n = 0
    for x, y in zip(u, v):
        if x != y:
            break
        n += 1
    return n


def _check_letters(rank: int, w: str, what: str) -> None:
    allowed = string.ascii_lowercase[:rank]
    for ch in w:
        if ch.lower() not in allowed:
            raise Mismatch(f"{what} uses letter {ch!r} outside rank {rank}")


def ball_words(rank: int, radius: int) -> Iterator[str]:
    """All reduced words of length at most radius, shortest first."""
    letters = [ch for c in string.ascii_lowercase[:rank] for ch in (c, c.upper())]
    yield ""
    frontier = [""]
    for _ in range(radius):
        nxt = []
        for w in frontier:
            for ch in letters:
                if w and ch == w[-1].swapcase():
                    continue
                nxt.append(w + ch)
        yield from nxt
        frontier = nxt


# -- context and morphisms ----------------------------------------------------


@dataclass(frozen=True)
class HypContext:
    """Target geometry: a free rank in exact mode, otherwise a geodesic oracle.

    The oracle maps any word to a geodesic word for the same element, over
    letters whose inverses are their case swaps.  Thresholds default to the
    1000/200/20 multiples of delta_eff.
    """

    rank: Optional[int] = None
    oracle: Optional[Callable[[str], str]] = None
    delta_eff: float = 1.0
    c_in: int = 1000
    c_h: int = 200
    c_near: int = 20


def hyp_context(
    rank: Optional[int] = None,
    oracle: Optional[Callable[[str], str]] = None,
    delta_eff: float = 1.0,
    c_in: Optional[int] = None,
    c_h: Optional[int] = None,
    c_near: Optional[int] = None,
) -> HypContext:
    """Build a checked context; thresholds scale with delta_eff unless given."""
    if (rank is None) == (oracle is None):
        raise Mismatch("give exactly one of a free rank or a geodesic oracle")
    if rank is not None and rank < 1:
        raise Mismatch("rank must be at least 1")
    if delta_eff < 1:
        raise Mismatch("delta_eff is floored at 1; smaller values degenerate the thresholds")
    ci = int(1000 * delta_eff) if c_in is None else c_in
    ch = int(200 * delta_eff) if c_h is None else c_h
    cn = int(20 * delta_eff) if c_near is None else c_near
    if not (0 <= cn < ch < ci):
        raise Mismatch("thresholds must satisfy 0 <= c_near < c_h < c_in")
    return HypContext(rank, oracle, delta_eff, ci, ch, cn)


def _geo(ctx: HypContext) -> Callable[[str], str]:
    if ctx.rank is not None:
        rank = ctx.rank

        def exact(w: str) -> str:
            _check_letters(rank, w, "word")
            return reduce_word(w)

        return exact
    if ctx.oracle is not None:
        oracle = ctx.oracle
        return lambda w: oracle(w)
    raise OracleRequired("the context has neither a free rank nor a geodesic oracle")


@dataclass(frozen=True)
class MorphismCandidate:
    """Images of the source generators, with the distinguished pair a, b.

    q caches max(|phi(a)|, |phi(b)|); images are stored reduced (geodesic
    when the context has an oracle).
    """

    names: tuple[str, ...]
    images: tuple[str, ...]
    q: int

    def image(self, name: str) -> str:
        return self.images[self.names.index(name)]

    def problems(self) -> list[str]:
        out: list[str] = []
        if len(self.names) != len(self.images):
            return ["image count differs from the generator count"]
        if "a" not in self.names or "b" not in self.names:
            out.append("the distinguished generators a and b are missing")
            return out
        for name, w in zip(self.names, self.images):
            if reduce_word(w) != w:
                out.append(f"image of {name} is not freely reduced")
        if not out and self.q != max(len(self.image("a")), len(self.image("b"))):
            out.append("cached q disagrees with the image lengths")
        return out


def morphism(names: Sequence[str], images: Sequence[str], ctx: Optional[HypContext] = None) -> MorphismCandidate:
    """Normalize images and cache q; ctx supplies the geodesic normalizer."""
    names = tuple(names)
    if "a" not in names or "b" not in names:
        raise Mismatch("the source generators must include a and b")
    if len(set(names)) != len(names) or len(names) != len(images):
        raise Mismatch("generator names must be distinct and match the images")
    geo = _geo(ctx) if ctx is not None else reduce_word
    imgs = tuple(geo(w) for w in images)
    m = MorphismCandidate(names, imgs, 0)
    q = max(len(m.image("a")), len(m.image("b")))
    return MorphismCandidate(names, imgs, q)


def apply_morphism(m: MorphismCandidate, word: str) -> str:
    """Freely reduced image of a source word (free reduction is valid in any group)."""
    table = dict(zip(m.names, m.images))
    parts = []
    for ch in word:
        if ch in table:
            parts.append(table[ch])
        elif ch.lower() in table:
            parts.append(inv_word(table[ch.lower()]))
        else:
            raise Mismatch(f"source word uses unknown generator {ch!r}")
    return reduce_word("".join(parts))


def post_conjugate(ctx: HypContext, m: MorphismCandidate, h: str) -> MorphismCandidate:
    """ad_h of the candidate: every generator image becomes h * image * h^-1."""
    hb = inv_word(h)
    return morphism(m.names, tuple(h + w + hb for w in m.images), ctx)


# -- membership in L_h ----------------------------------------------------------


def _prefix_interval(other: int, m: int, c: int, glen: int) -> Optional[tuple[int, int]]:
    # d(target, g[:l]) = other + l - 2*min(l, m); the valid l form an interval
    lo = max(0, other - c)
    hi = min(glen, 2 * m - other + c)
    return (lo, hi) if lo <= hi else None


def in_Lh(ctx: HypContext, g: str, h: str) -> bool:
    """Is g at distance >= c_in from 1 with [1, g] passing c_near-close to h and g*h?

    The near-point to h must not come after the near-point to g*h along the
    geodesic.  Exact over a free target; via prefix scans of one oracle
    geodesic otherwise.
    """
    geo = _geo(ctx)
    g, h = geo(g), geo(h)
    if len(g) < ctx.c_in:
        return False
    gh = geo(g + h)
    if ctx.rank is not None:
        x = _prefix_interval(len(h), meet_len(g, h), ctx.c_near, len(g))
        y = _prefix_interval(len(gh), meet_len(g, gh), ctx.c_near, len(g))
        return x is not None and y is not None and x[0] <= y[1]
    lx = next((l for l in range(len(g) + 1) if len(geo(inv_word(g[:l]) + h)) <= ctx.c_near), None)
    if lx is None:
        return False
    ly = next(
        (l for l in range(len(g), -1, -1) if len(geo(inv_word(g[:l]) + gh)) <= ctx.c_near),
        None,
    )
    return ly is not None and lx <= ly


# -- shortness ------------------------------------------------------------------


@dataclass(frozen=True)
class Shortness:
    """Verdict of the witness search.

    witness and clause are set on Long verdicts; exhaustive records whether
    the restricted candidate set is known complete (true over free targets,
    false through an oracle).
    """

    short: bool
    witness: Optional[str] = None
    clause: Optional[int] = None
    exhaustive: bool = True


def is_short(ctx: HypContext, m: MorphismCandidate) -> Shortness:
    """Search the three longness clauses over length-c_h prefix witnesses."""
    geo = _geo(ctx)
    fa, fb = geo(m.image("a")), geo(m.image("b"))
    fab, faib = geo(apply_morphism(m, "ab")), geo(apply_morphism(m, "Ab"))
    fba, fbia = geo(apply_morphism(m, "ba")), geo(apply_morphism(m, "Ba"))
    six = (fa, fb, fab, faib, fba, fbia)
    pool: list[str] = []
    for w in six:
        for v in (w, geo(inv_word(w))):
            if len(v) >= ctx.c_h and v[: ctx.c_h] not in pool:
                pool.append(v[: ctx.c_h])
    clauses = ((fa, fb), (fb, fab, faib), (fa, fba, fbia))
    exhaustive = ctx.rank is not None
    for ci, words in enumerate(clauses, 1):
        if any(len(w) < ctx.c_in for w in words):
            continue
        for h in pool:
            if all(in_Lh(ctx, w, h) for w in words):
                return Shortness(False, h, ci, exhaustive)
    return Shortness(True, None, None, exhaustive)


def shorten_with_trace(ctx: HypContext, m: MorphismCandidate) -> tuple[MorphismCandidate, tuple[int, ...]]:
    """Conjugate by witnesses until short; the q trace strictly decreases."""
    trace = [m.q]
    while True:
        verdict = is_short(ctx, m)
        if verdict.short:
            return m, tuple(trace)
        nxt = post_conjugate(ctx, m, inv_word(verdict.witness))
        if nxt.q >= m.q:
            raise NonDecreasingStep(f"witness failed to shrink q: {m.q} -> {nxt.q}")
        m = nxt
        trace.append(m.q)


def shorten(ctx: HypContext, m: MorphismCandidate) -> MorphismCandidate:
    return shorten_with_trace(ctx, m)[0]


def count_short_postconjugates(
    ctx: HypContext, m: MorphismCandidate, radius: int
) -> tuple[int, tuple[str, ...]]:
    """All conjugators h with |h| <= radius making ad_h of the candidate short.

    Complete only within the radius; finiteness of the full set needs the
    images of a, b, ab, ab^-1 to be nontrivial with phi(a), phi(b) not
    commuting, which is checked up front.
    """
    if ctx.rank is None:
        raise OracleRequired("conjugator enumeration needs a free target")
    fa, fb = m.image("a"), m.image("b")
    for name, w in (("a", fa), ("b", fb), ("ab", apply_morphism(m, "ab")), ("ab^-1", apply_morphism(m, "aB"))):
        if reduce_word(w) == "":
            raise ElementaryImage(f"the image of {name} is trivial")
    if reduce_word(fa + fb) == reduce_word(fb + fa):
        raise ElementaryImage("the images of a and b commute")
    found = [h for h in ball_words(ctx.rank, radius) if is_short(ctx, post_conjugate(ctx, m, h)).short]
    return len(found), tuple(found)
