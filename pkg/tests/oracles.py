"""Independent brute-force reference implementations used only by tests.

Everything in here works on raw data (nested lists / tuples of ints), never
on the package's own classes, so a bug in the package cannot hide inside
its oracle.
"""

from __future__ import annotations

import itertools


def brute_automorphism_images(table) -> list[tuple[int, ...]]:
    """All identity-fixing permutations that are homomorphisms. O(n!)."""
    n = len(table)
    out = []
    for perm in itertools.permutations(range(1, n)):
        phi = (0,) + perm
        if all(
            phi[table[x][y]] == table[phi[x]][phi[y]]
            for x in range(n)
            for y in range(n)
        ):
            out.append(phi)
    return sorted(out)


def brute_isomorphism_images(table_a, table_b) -> list[tuple[int, ...]]:
    """All bijections table_a -> table_b that are homomorphisms. O(n!)."""
    n = len(table_a)
    if len(table_b) != n:
        return []
    out = []
    for perm in itertools.permutations(range(1, n)):
        phi = (0,) + perm
        if all(
            phi[table_a[x][y]] == table_b[phi[x]][phi[y]]
            for x in range(n)
            for y in range(n)
        ):
            out.append(phi)
    return sorted(out)


def brute_subgroup_sets(table) -> list[tuple[int, ...]]:
    """All subsets containing 0 closed under product and inverse. O(2^n)."""
    n = len(table)
    inv = [row.index(0) for row in table]
    subs = []
    for mask in range(1, 1 << n, 2):  # odd masks: those containing element 0
        elems = [i for i in range(n) if mask >> i & 1]
        eset = set(elems)
        if all(inv[x] in eset and table[x][y] in eset for x in elems for y in elems):
            subs.append(tuple(elems))
    return sorted(subs, key=lambda t: (len(t), t))


# ---------------------------------------------------------------------------
# shortlex Knuth-Bendix rewriting for finitely presented groups
#
# Words are tuples of signed ints: k+1 for generator k, -(k+1) for its
# inverse.  Completion is the naive sweep: resolve every critical pair,
# restart, stop when a full sweep adds no rule.

def _rank(x):
    return 2 * (abs(x) - 1) + (0 if x > 0 else 1)


def _skey(w):
    return (len(w), tuple(_rank(x) for x in w))


class PresentedGroupOracle:
    def __init__(self, n_gens, relators, max_rules=4000, max_sweeps=60):
        self.n = n_gens
        self.rules = []
        for g in range(1, n_gens + 1):
            self.rules.append(((g, -g), ()))
            self.rules.append(((-g, g), ()))
        for r in relators:
            self._add_equation(tuple(r), ())
        self.confluent = False
        for _ in range(max_sweeps):
            added = False
            i = 0
            while i < len(self.rules):
                j = 0
                while j < len(self.rules):
                    for a, b in self._critical_pairs(self.rules[i], self.rules[j]):
                        if self._add_equation(a, b):
                            added = True
                            if len(self.rules) > max_rules:
                                return
                    j += 1
                i += 1
            if not added:
                self.confluent = True
                return

    def normal(self, word):
        w = list(word)
        changed = True
        while changed:
            changed = False
            for lhs, rhs in self.rules:
                L = len(lhs)
                i = 0
                while i + L <= len(w):
                    if tuple(w[i : i + L]) == lhs:
                        w[i : i + L] = list(rhs)
                        changed = True
                        i = 0
                    else:
                        i += 1
        return tuple(w)

    def equal(self, w1, w2):
        return self.normal(w1) == self.normal(w2)

    def _add_equation(self, a, b):
        a, b = self.normal(a), self.normal(b)
        if a == b:
            return False
        if _skey(a) < _skey(b):
            a, b = b, a
        self.rules.append((a, b))
        return True

    @staticmethod
    def _critical_pairs(r1, r2):
        l1, s1 = r1
        l2, s2 = r2
        out = []
        for k in range(1, min(len(l1), len(l2))):
            if l1[len(l1) - k :] == l2[:k]:
                out.append((s1 + l2[k:], l1[: len(l1) - k] + s2))
        if len(l2) <= len(l1):
            for p in range(len(l1) - len(l2) + 1):
                if l1[p : p + len(l2)] == l2:
                    out.append((s1, l1[:p] + s2 + l1[p + len(l2) :]))
        return out

    def ball(self, radius, cap=10000):
        """Distinct normal forms of words of length <= radius."""
        seen = {(): 0}
        frontier = [()]
        letters = [g for k in range(1, self.n + 1) for g in (k, -k)]
        for d in range(1, radius + 1):
            nxt = []
            for w in frontier:
                for g in letters:
                    nf = self.normal(w + (g,))
                    if nf not in seen:
                        seen[nf] = d
                        nxt.append(nf)
                        if len(seen) > cap:
                            raise RuntimeError("oracle ball exceeded its cap")
            frontier = nxt
        return seen
