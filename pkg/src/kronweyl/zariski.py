"""Closed sets of the verbal (Zariski) topology and closures of symbolic sets.

A closed set is kept in the normal form

    F  union  (h_1 + G[n_1])  union ... union  (h_r + G[n_r])

with F finite and every coset irreducible, i.e. not a finite union of
smaller cosets.  In the representable groups the irreducible cosets are
exactly those with modulus 0 in an unbounded group, or with modulus a
divisor n >= 2 of the tail exponent such that G[n] is infinite.  Subset and
equality tests therefore reduce to coset containment; the argument is
written up in ``docs/closure.md``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import ceil, gcd
from typing import Dict, Iterable, List, Optional, Tuple

from .abelian import (FINITE, FREE, TAIL, ZERO, Element, GroupDescriptor,
                      divisors, element_order, lcm, n_torsion, scale_group)
from .errors import BudgetError, ValidationError
from .setexpr import (Affine, BlockStream, Finite, SetExpr, Translate, Union,
                      block_stream, decompose, enumerate_prefix, finite_part,
                      infinite_leaves, normalize, scale_set)


def elementary_member(x: Element, g: Element, n: int, G: GroupDescriptor) -> bool:
    """True iff n (x - g) = 0, i.e. x lies in the coset g + G[n]."""
    return G.scale(n, G.sub(x, g)).is_zero()


def reduce_rep(G: GroupDescriptor, g: Element, n: int) -> Element:
    """Canonical representative of g + G[n]."""
    if n == 0:
        return ZERO
    fin = {}
    for i, v in g.finite:
        q = G.finite_orders[i]
        fin[i] = v % (q // gcd(n, q))
    tail = {}
    for i, v in g.tail:
        q = G.tail_order(i)
        tail[i] = v % (q // gcd(n, q))
    return G.element(dict(g.free), fin, tail)


@dataclass(frozen=True, order=True)
class Coset:
    mod: int
    rep: Element

    def to_json(self) -> dict:
        return {"rep": self.rep.to_json(), "mod": self.mod}


def coset_subset(G: GroupDescriptor, a: Coset, b: Coset) -> bool:
    """(g + G[n]) is contained in (h + G[m])."""
    if not n_torsion(G, a.mod).issubset(n_torsion(G, b.mod)):
        return False
    return n_torsion(G, b.mod).contains(G.sub(a.rep, b.rep))


def _split(G: GroupDescriptor, g: Element, n: int):
    """Write g + G[n] as points plus irreducible cosets."""
    if n == 0:
        if not G.is_bounded():
            return [], [Coset(0, ZERO)]
        n = G.exponent
        if n == 0:
            return [], [Coset(0, ZERO)]
    n2 = gcd(n, G.tail_exponent)
    big = n_torsion(G, n)
    if n2 == 1:
        return [G.add(g, y) for y in big.elements()], []
    reps = {reduce_rep(G, G.add(g, y), n2) for y in big.finite_part_elements()}
    return [], [Coset(n2, r) for r in reps]


@dataclass(frozen=True)
class ClosedSet:
    group: GroupDescriptor
    finite: Tuple[Element, ...]
    cosets: Tuple[Coset, ...]

    def contains(self, x: Element) -> bool:
        if x in self.finite:
            return True
        return any(elementary_member(x, c.rep, c.mod, self.group) for c in self.cosets)

    __contains__ = contains

    def is_finite(self) -> bool:
        return not self.cosets

    def is_everything(self) -> bool:
        return closed_set(self.group, [], [(ZERO, 0)]).issubset(self)

    def issubset(self, other: "ClosedSet") -> bool:
        for x in self.finite:
            if x not in other:
                return False
        for c in self.cosets:
            if not any(coset_subset(self.group, c, d) for d in other.cosets):
                return False
        return True

    def union(self, other: "ClosedSet") -> "ClosedSet":
        return closed_union(self, other, self.group)

    def intersect(self, other: "ClosedSet") -> "ClosedSet":
        return closed_intersect(self, other, self.group)

    def to_json(self) -> dict:
        return {"finite": [x.to_json() for x in self.finite],
                "cosets": [c.to_json() for c in self.cosets]}

    def render(self) -> str:
        parts = []
        if self.finite:
            parts.append("{" + ", ".join(str(x) for x in self.finite) + "}")
        for c in self.cosets:
            parts.append(f"G[{c.mod}]" if c.rep.is_zero() else f"{c.rep} + G[{c.mod}]")
        return " ∪ ".join(parts) if parts else "∅"

    def as_setexpr(self) -> SetExpr:
        """A symbolic set whose closure is this closed set."""
        G = self.group
        parts: List[SetExpr] = [Finite(self.finite)]
        for c in self.cosets:
            if c.mod == 0:
                parts.append(Translate(c.rep, Affine(ZERO, G.basis(FREE, 0))))
                continue
            tmpl = {}
            for j, q in enumerate(G.tail_pattern):
                if gcd(c.mod, q) > 1:
                    tmpl[j] = q // gcd(c.mod, q)
            u = G.element(tail=tmpl)
            parts.append(Translate(c.rep, block_stream(G, ZERO, u)))
        return Union(tuple(parts))


def closed_set(G: GroupDescriptor, finite: Iterable[Element] = (),
               cosets: Iterable[Tuple[Element, int]] = ()) -> ClosedSet:
    """Normalize points and cosets (rep, modulus) into a ClosedSet."""
    points = set()
    for x in finite:
        points.add(G.validate(x))
    pieces: List[Coset] = []
    for g, n in cosets:
        if n < 0:
            raise ValidationError("modulus must be non-negative")
        pts, cs = _split(G, G.validate(g), n)
        points.update(pts)
        for c in cs:
            c = Coset(c.mod, reduce_rep(G, c.rep, c.mod))
            if c not in pieces:
                pieces.append(c)
    # canonical cosets denote distinct sets, so plain containment suffices
    keep = sorted(c for c in pieces
                  if not any(d != c and coset_subset(G, c, d) for d in pieces))
    pts = sorted(x for x in points
                 if not any(elementary_member(x, c.rep, c.mod, G) for c in keep))
    return ClosedSet(G, tuple(pts), tuple(keep))


def closed_union(A: ClosedSet, B: ClosedSet, G: GroupDescriptor) -> ClosedSet:
    return closed_set(G, A.finite + B.finite,
                      [(c.rep, c.mod) for c in A.cosets + B.cosets])


def _crt(r1: int, m1: int, r2: int, m2: int):
    """Solve x = r1 mod m1, x = r2 mod m2; returns (x, lcm) or None."""
    g = gcd(m1, m2)
    if (r2 - r1) % g:
        return None
    l = m1 // g * m2
    t = (r2 - r1) // g * pow(m1 // g, -1, m2 // g) % (m2 // g)
    return (r1 + m1 * t) % l, l


def coset_intersect(G: GroupDescriptor, a: Coset, b: Coset):
    """(g + G[n]) ∩ (h + G[m]) as a (rep, modulus) pair or None if empty."""
    k = gcd(a.mod, b.mod)
    free = {}
    for i in set(a.rep.support(FREE)) | set(b.rep.support(FREE)):
        gv, hv = dict(a.rep.free).get(i, 0), dict(b.rep.free).get(i, 0)
        if a.mod and b.mod:
            if gv != hv:
                return None
            free[i] = gv
        elif a.mod:
            free[i] = gv
        elif b.mod:
            free[i] = hv
    out = {FINITE: {}, TAIL: {}}
    for name in (FINITE, TAIL):
        ga, hb = dict(a.rep.block(name)), dict(b.rep.block(name))
        for i in set(ga) | set(hb):
            q = G.coord_order(name, i)
            ma = q // gcd(a.mod, q) if a.mod else 1
            mb = q // gcd(b.mod, q) if b.mod else 1
            sol = _crt(ga.get(i, 0) % ma, ma, hb.get(i, 0) % mb, mb)
            if sol is None:
                return None
            out[name][i] = sol[0]
    return G.element(free, out[FINITE], out[TAIL]), k


def closed_intersect(A: ClosedSet, B: ClosedSet, G: GroupDescriptor) -> ClosedSet:
    pts = [x for x in A.finite if x in B] + [x for x in B.finite if x in A]
    cos = []
    for a in A.cosets:
        for b in B.cosets:
            r = coset_intersect(G, a, b)
            if r is not None:
                cos.append(r)
    return closed_set(G, pts, cos)


# ---------------------------------------------------------------------------
# closure and density of symbolic sets
# ---------------------------------------------------------------------------

def zariski_closure(X: SetExpr, G: GroupDescriptor) -> ClosedSet:
    """Closure of X: its finite part plus h + G[n] for every infinite leaf
    decomposed as h + (almost n-torsion set)."""
    fin, pieces = decompose(X, G)
    return closed_set(G, fin, [(g, n) for g, _, n in pieces])


@dataclass
class DensityResult:
    dense: bool
    certificate: dict

    def __bool__(self):
        return self.dense


def least_finite_multiple(G: GroupDescriptor) -> int:
    """Least m >= 1 with mG finite (bounded groups only)."""
    if not G.is_bounded():
        raise ValidationError("mG is infinite for every m in an unbounded group")
    for m in divisors(G.exponent or 1):
        if scale_group(G, m).is_finite():
            return m
    return G.exponent


def _translate_family(G: GroupDescriptor, X: SetExpr):
    """Translates g that can change the verdict.

    Tail assignments on the offsets' supports are not enumerated: every tail
    coordinate has order dividing m (m is the tail exponent once the tail is
    infinite), so they never move ord(c + g) across a divisor of m.  Only
    the finite invariant-factor part is left.
    """
    yield from G.finite_elements()


def _good_leaf(G: GroupDescriptor, p: SetExpr, m: int) -> bool:
    if not isinstance(p, BlockStream):
        return False
    n = lcm(element_order(G, p.c), element_order(G, p.template))
    if n == 0 or m % n:
        return False
    q = element_order(G, p.template)
    # every proper divisor d of m must leave the template alive
    return q == m


def is_zariski_dense(X: SetExpr, G: GroupDescriptor) -> DensityResult:
    X = normalize(X, G)
    leaves = infinite_leaves(X)
    if not G.is_bounded():
        for p in leaves:
            if isinstance(p, Affine):
                return DensityResult(True, {"reason": "affine leaf with infinite-order step",
                                            "leaf": {"a": p.a.to_json(), "b": p.b.to_json()}})
        n = lcm(*(element_order(G, p.template) for p in leaves)) if leaves else 1
        nX = scale_set(n, X, G)
        return DensityResult(False, {"reason": "n X is finite", "n": n,
                                     "nX_size": len(finite_part(nX))})
    if G.is_finite():
        total = G.order()
        have = len(finite_part(X))
        return DensityResult(have == total, {"reason": "finite group", "size": have, "order": total})
    m = least_finite_multiple(G)
    per_g = []
    for g in _translate_family(G, X):
        shifted = normalize(Translate(g, X), G)
        hit = next((p for p in infinite_leaves(shifted) if _good_leaf(G, p, m)), None)
        if hit is None:
            return DensityResult(False, {"reason": "no almost m-torsion leaf after translation",
                                         "m": m, "g": g.to_json()})
        per_g.append({"g": g.to_json(), "offset": hit.c.to_json()})
    return DensityResult(True, {"m": m, "translates": per_g})


# ---------------------------------------------------------------------------
# brute-force oracle from a finite prefix
# ---------------------------------------------------------------------------

def _coset_size_key(G: GroupDescriptor, n: int) -> Tuple[int, int]:
    t = 1
    for q in G.tail_pattern:
        t *= gcd(n, q)
    f = 1
    for d in G.finite_orders:
        f *= gcd(n, d)
    return (t, f)


def closure_oracle_prefix(X: SetExpr, G: GroupDescriptor, N: int,
                          modulus_bound: Optional[int] = None, coset_bound: int = 3,
                          budget: int = 200_000) -> ClosedSet:
    """Smallest union of at most ``coset_bound`` cosets plus a finite remainder
    that covers the first N elements of X.

    Candidate cosets have moduli n >= 2 dividing the exponent and
    representatives taken from the prefix.  A coset is only considered when
    it holds at least ceil(sqrt(N)) prefix points, and the uncovered remainder
    may have at most ceil(sqrt(N)) points.  Covers are ranked by the sorted
    sizes of their cosets per tail period, then by the remainder size.
    """
    if not G.is_bounded():
        raise ValidationError("the prefix oracle needs a bounded group")
    prefix = enumerate_prefix(X, G, N)
    if len(prefix) < N:
        return closed_set(G, prefix, [])
    tau = ceil(N ** 0.5)
    mods = [n for n in divisors(G.exponent) if n >= 2
            and (modulus_bound is None or n <= modulus_bound)]
    cands: Dict[Coset, frozenset] = {}
    for n in mods:
        for p in prefix:
            c = Coset(n, reduce_rep(G, p, n))
            if c in cands:
                continue
            cover = frozenset(i for i, x in enumerate(prefix)
                              if elementary_member(x, c.rep, n, G))
            if len(cover) >= tau:
                cands[c] = cover
    witnessed = sorted(cands)
    best = None
    spent = 0
    for r in range(0, coset_bound + 1):
        for combo in combinations(witnessed, r):
            spent += 1
            if spent > budget:
                raise BudgetError(f"oracle search exceeded {budget} subsets",
                                  partial=best and best[1])
            covered = frozenset().union(*(cands[c] for c in combo)) if combo else frozenset()
            rest = len(prefix) - len(covered)
            if rest > tau:
                continue
            key = (sorted((_coset_size_key(G, c.mod) for c in combo), reverse=True), rest,
                   [c for c in combo])
            if best is None or key < best[0]:
                best = (key, combo, covered)
    if best is None:
        raise BudgetError("no cover within the coset bound")
    _, combo, covered = best
    rest = [x for i, x in enumerate(prefix) if i not in covered]
    return closed_set(G, rest, [(c.rep, c.mod) for c in combo])
