"""Countable abelian groups of the form Z^r + (finite cyclic part) + (periodic tail).

A group is described by a free rank, a list of finite cyclic orders and a
tail pattern ``[q_0, ..., q_{m-1}]`` standing for the infinite direct sum of
cyclic groups Z/q_{k mod m} over k = 0, 1, 2, ...

Elements are finitely supported, so every computation here terminates.  The
order of an element of infinite order is encoded as 0, which matches the
convention that the 0-torsion subgroup is the whole group.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce
from itertools import product
from math import gcd, isqrt
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .errors import ValidationError

FREE, FINITE, TAIL = "free", "finite", "tail"
BLOCKS = (FREE, FINITE, TAIL)


def lcm(*values: int) -> int:
    """Least common multiple with the convention lcm(...) = 0 if any value is 0."""
    out = 1
    for v in values:
        if v == 0:
            return 0
        out = out * v // gcd(out, v)
    return out


def lcm_list(values: Iterable[int]) -> int:
    return lcm(*list(values))


# ---------------------------------------------------------------------------
# Smith normal form
# ---------------------------------------------------------------------------

def smith_normal_form(matrix: Sequence[Sequence[int]]) -> List[int]:
    """Diagonal of the Smith normal form of an integer matrix.

    Returns ``min(rows, cols)`` non-negative entries ``t_1 | t_2 | ...``; zero
    entries (free directions) come last.  An empty matrix gives ``[]``.

    Examples
    --------
    >>> smith_normal_form([[2, 0], [0, 3]])
    [1, 6]
    >>> smith_normal_form([[2, 4], [6, 8]])
    [2, 4]
    """
    a = [[int(v) for v in row] for row in matrix]
    if not a or not a[0]:
        return []
    m, n = len(a), len(a[0])
    if any(len(row) != n for row in a):
        raise ValidationError("matrix rows have different lengths")

    diag = []
    for t in range(min(m, n)):
        # find a nonzero pivot of minimal absolute value in the trailing block
        while True:
            pivot = None
            for i in range(t, m):
                for j in range(t, n):
                    if a[i][j] and (pivot is None or abs(a[i][j]) < abs(a[pivot[0]][pivot[1]])):
                        pivot = (i, j)
            if pivot is None:
                diag.extend([0] * (min(m, n) - t))
                return _fix_chain(diag)
            pi, pj = pivot
            a[t], a[pi] = a[pi], a[t]
            for row in a:
                row[t], row[pj] = row[pj], row[t]
            p = a[t][t]
            done = True
            for i in range(t + 1, m):
                q = a[i][t] // p
                if q:
                    a[i] = [x - q * y for x, y in zip(a[i], a[t])]
                if a[i][t]:
                    done = False
            for j in range(t + 1, n):
                q = a[t][j] // p
                if q:
                    for row in a:
                        row[j] -= q * row[t]
                if a[t][j]:
                    done = False
            if not done:
                continue
            # pivot must divide every remaining entry
            bad = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, n)
                        if a[i][j] % p), None)
            if bad is None:
                break
            a[t] = [x + y for x, y in zip(a[t], a[bad[0]])]
        diag.append(abs(a[t][t]))
    return _fix_chain(diag)


def _fix_chain(diag: List[int]) -> List[int]:
    # the elimination above already yields a chain; this only sorts zeros last
    nonzero = [d for d in diag if d]
    return nonzero + [0] * (len(diag) - len(nonzero))


def invariant_factors(orders: Iterable[int]) -> Tuple[int, ...]:
    """Invariant-factor chain of a direct sum of cyclic groups, 1s dropped."""
    orders = list(orders)
    diag = [[orders[i] if i == j else 0 for j in range(len(orders))] for i in range(len(orders))]
    return tuple(t for t in smith_normal_form(diag) if t != 1)


# ---------------------------------------------------------------------------
# Proper divisors
# ---------------------------------------------------------------------------

class _AllPositive:
    """Marker for the proper divisors of 0: every positive integer."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __contains__(self, d) -> bool:
        return isinstance(d, int) and d >= 1

    def __repr__(self) -> str:
        return "ALL_POSITIVE"

    def upto(self, bound: int) -> List[int]:
        return list(range(1, bound + 1))


ALL_POSITIVE = _AllPositive()


def divisors(n: int) -> List[int]:
    """All positive divisors of n >= 1, ascending."""
    if n < 1:
        raise ValidationError("divisors() needs n >= 1")
    small, large = [], []
    for d in range(1, isqrt(n) + 1):
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
    return small + large[::-1]


def proper_divisors(n: int):
    """Proper divisors of ``n``: d | n with d not in {0, n}.

    For ``n == 0`` every positive integer qualifies and the marker
    ``ALL_POSITIVE`` is returned; callers have to bound it themselves.
    """
    if n < 0:
        raise ValidationError("n must be non-negative")
    if n == 0:
        return ALL_POSITIVE
    return [d for d in divisors(n) if d != n]


def proper_divisors_bounded(n: int, bound: int) -> List[int]:
    """Proper divisors of n that are <= bound (bound is mandatory for n = 0)."""
    pd = proper_divisors(n)
    if pd is ALL_POSITIVE:
        return ALL_POSITIVE.upto(bound)
    return [d for d in pd if d <= bound]


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------

Sparse = Tuple[Tuple[int, int], ...]


def _sparse(m) -> Sparse:
    if m is None:
        return ()
    if isinstance(m, Mapping):
        items = m.items()
    else:
        items = m
    out = {}
    for k, v in items:
        k, v = int(k), int(v)
        out[k] = out.get(k, 0) + v
    return tuple(sorted((k, v) for k, v in out.items() if v != 0))


@dataclass(frozen=True, order=True)
class Element:
    """A finitely supported group element in canonical sparse form.

    Each block is a sorted tuple of ``(index, value)`` pairs without zeros.
    Use :meth:`GroupDescriptor.element` to build reduced elements; the raw
    constructor does not know the coordinate orders.
    """

    free: Sparse = ()
    finite: Sparse = ()
    tail: Sparse = ()

    @classmethod
    def raw(cls, free=None, finite=None, tail=None) -> "Element":
        return cls(_sparse(free), _sparse(finite), _sparse(tail))

    def block(self, name: str) -> Sparse:
        return getattr(self, name)

    def is_zero(self) -> bool:
        return not (self.free or self.finite or self.tail)

    def support(self, name: str) -> Tuple[int, ...]:
        return tuple(i for i, _ in self.block(name))

    def max_tail(self) -> int:
        """Largest tail index in the support, or -1."""
        return self.tail[-1][0] if self.tail else -1

    def coords(self) -> Iterator[Tuple[str, int, int]]:
        for name in BLOCKS:
            for i, v in self.block(name):
                yield name, i, v

    def to_json(self) -> dict:
        return {name: {str(i): v for i, v in self.block(name)} for name in BLOCKS}

    @classmethod
    def from_json(cls, obj) -> "Element":
        if not isinstance(obj, Mapping):
            raise ValidationError("element must be a JSON object")
        extra = set(obj) - set(BLOCKS)
        if extra:
            raise ValidationError(f"unknown element keys: {sorted(extra)}")
        try:
            return cls.raw(obj.get(FREE), obj.get(FINITE), obj.get(TAIL))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad element {obj!r}: {exc}") from None

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        parts = []
        for name, i, v in self.coords():
            sym = {FREE: "z", FINITE: "f", TAIL: "e"}[name]
            parts.append(f"{v}{sym}{i}" if v != 1 else f"{sym}{i}")
        return "+".join(parts)


ZERO = Element()


# ---------------------------------------------------------------------------
# Groups and subgroups
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupDescriptor:
    """Z^free_rank + sum of Z/d_i + infinite sum of Z/q_(k mod m).

    ``finite_orders`` is normalized to its invariant-factor chain on
    construction, so two descriptors of isomorphic finite parts compare equal.
    """

    free_rank: int = 0
    finite_orders: Tuple[int, ...] = ()
    tail_pattern: Tuple[int, ...] = ()

    def __post_init__(self):
        if not isinstance(self.free_rank, int) or self.free_rank < 0:
            raise ValidationError("free_rank must be a non-negative integer")
        for name in ("finite_orders", "tail_pattern"):
            vals = tuple(int(v) for v in getattr(self, name))
            if any(v < 2 for v in vals):
                raise ValidationError(f"{name} entries must be >= 2, got {list(vals)}")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "finite_orders", invariant_factors(self.finite_orders))

    # -- structure -----------------------------------------------------------

    @property
    def period(self) -> int:
        return len(self.tail_pattern)

    @property
    def has_tail(self) -> bool:
        return bool(self.tail_pattern)

    def tail_order(self, k: int) -> int:
        if not self.tail_pattern:
            raise ValidationError("group has no tail")
        return self.tail_pattern[k % self.period]

    def coord_order(self, block: str, i: int) -> int:
        """Order of the generator of a coordinate (0 for free coordinates)."""
        if block == FREE:
            return 0
        if block == FINITE:
            return self.finite_orders[i]
        return self.tail_order(i)

    @property
    def tail_exponent(self) -> int:
        return lcm_list(self.tail_pattern)

    @property
    def torsion_exponent(self) -> int:
        return lcm_list(self.finite_orders + self.tail_pattern)

    @property
    def exponent(self) -> int:
        """Least n >= 1 with nG = 0, or 0 if G is unbounded."""
        return 0 if self.free_rank else self.torsion_exponent

    def is_bounded(self) -> bool:
        return self.free_rank == 0

    def is_finite(self) -> bool:
        return self.free_rank == 0 and not self.tail_pattern

    def order(self) -> int:
        """Cardinality of a finite group (0 for infinite groups)."""
        if not self.is_finite():
            return 0
        return reduce(lambda a, b: a * b, self.finite_orders, 1)

    # -- elements ------------------------------------------------------------

    def element(self, free=None, finite=None, tail=None) -> Element:
        """Build an element, reducing residues into [0, order)."""
        fr = _sparse(free)
        fi = _sparse(finite)
        ta = _sparse(tail)
        for i, _ in fr:
            if not 0 <= i < self.free_rank:
                raise ValidationError(f"free index {i} out of range for rank {self.free_rank}")
        for i, _ in fi:
            if not 0 <= i < len(self.finite_orders):
                raise ValidationError(f"finite index {i} out of range")
        for i, _ in ta:
            if i < 0 or not self.tail_pattern:
                raise ValidationError(f"tail index {i} invalid in this group")
        return Element(
            fr,
            tuple((i, v % self.finite_orders[i]) for i, v in fi if v % self.finite_orders[i]),
            tuple((i, v % self.tail_order(i)) for i, v in ta if v % self.tail_order(i)),
        )

    def basis(self, block: str, i: int) -> Element:
        return self.element(**{block: {i: 1}})

    def validate(self, x: Element) -> Element:
        """Raise ValidationError unless x is a canonical element of this group."""
        if not isinstance(x, Element):
            raise ValidationError(f"not an Element: {x!r}")
        for name in BLOCKS:
            idx = [i for i, _ in x.block(name)]
            if idx != sorted(set(idx)):
                raise ValidationError(f"{name} block not canonical")
            for i, v in x.block(name):
                if v == 0:
                    raise ValidationError("stored zero entry")
                if name == FREE:
                    if not 0 <= i < self.free_rank:
                        raise ValidationError(f"free index {i} out of range")
                    continue
                if name == FINITE and not 0 <= i < len(self.finite_orders):
                    raise ValidationError(f"finite index {i} out of range")
                if name == TAIL and (i < 0 or not self.tail_pattern):
                    raise ValidationError(f"tail index {i} invalid")
                q = self.coord_order(name, i)
                if not 0 <= v < q:
                    raise ValidationError(f"residue {v} out of range for order {q}")
        return x

    def _combine(self, x: Element, y: Element, sx: int, sy: int) -> Element:
        out = {}
        for name in BLOCKS:
            acc: Dict[int, int] = {}
            for i, v in x.block(name):
                acc[i] = acc.get(i, 0) + sx * v
            for i, v in y.block(name):
                acc[i] = acc.get(i, 0) + sy * v
            out[name] = acc
        return self.element(out[FREE], out[FINITE], out[TAIL])

    def add(self, x: Element, y: Element) -> Element:
        return self._combine(x, y, 1, 1)

    def sub(self, x: Element, y: Element) -> Element:
        return self._combine(x, y, 1, -1)

    def neg(self, x: Element) -> Element:
        return self._combine(x, ZERO, -1, 0)

    def scale(self, k: int, x: Element) -> Element:
        return self._combine(x, ZERO, k, 0)

    def sum(self, xs: Iterable[Element]) -> Element:
        return reduce(self.add, xs, ZERO)

    def shift_tail(self, x: Element, offset: int) -> Element:
        """Move the tail support of x by ``offset`` (orders must align)."""
        if x.free or x.finite:
            raise ValidationError("shift_tail expects a tail-only element")
        if offset % max(self.period, 1):
            raise ValidationError("tail shifts must be multiples of the period")
        return Element((), (), tuple((i + offset, v) for i, v in x.tail))

    def finite_elements(self) -> Iterator[Element]:
        """Every element of the finite cyclic part, in canonical order."""
        for vals in product(*(range(d) for d in self.finite_orders)):
            yield self.element(finite=dict(enumerate(vals)))

    # -- JSON ----------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "free_rank": self.free_rank,
            "finite_orders": list(self.finite_orders),
            "tail_pattern": list(self.tail_pattern),
        }

    @classmethod
    def from_json(cls, obj) -> "GroupDescriptor":
        if not isinstance(obj, Mapping):
            raise ValidationError("group must be a JSON object")
        extra = set(obj) - {"free_rank", "finite_orders", "tail_pattern"}
        if extra:
            raise ValidationError(f"unknown group keys: {sorted(extra)}")
        return cls(int(obj.get("free_rank", 0)),
                   tuple(obj.get("finite_orders", ())),
                   tuple(obj.get("tail_pattern", ())))

    def __str__(self) -> str:
        parts = []
        if self.free_rank:
            parts.append("Z" if self.free_rank == 1 else f"Z^{self.free_rank}")
        parts += [f"Z/{d}" for d in self.finite_orders]
        if self.tail_pattern:
            pat = ",".join(map(str, self.tail_pattern))
            parts.append(f"tail[{pat}]")
        return " + ".join(parts) or "0"


def element_order(G: GroupDescriptor, x: Element) -> int:
    """Least n >= 1 with n*x = 0, or 0 when x has infinite order."""
    G.validate(x)
    if x.free:
        return 0
    out = 1
    for name in (FINITE, TAIL):
        for i, v in x.block(name):
            q = G.coord_order(name, i)
            out = lcm(out, q // gcd(v, q))
    return out


@dataclass(frozen=True)
class SubgroupSpec:
    """A product subgroup described coordinate by coordinate.

    ``free_index`` is 0 for the zero subgroup of the free part, 1 for all of
    it and m for m*Z^r.  For every cyclic coordinate of order q the subgroup
    has some order t dividing q; it is given by a rule rather than a table
    because there are infinitely many tail coordinates.
    """

    group: GroupDescriptor
    free_index: int
    finite_sub: Tuple[int, ...]
    tail_sub: Tuple[int, ...]
    kind: str = field(default="", compare=False)

    def sub_order(self, block: str, i: int) -> int:
        if block == FINITE:
            return self.finite_sub[i]
        return self.tail_sub[i % self.group.period]

    def contains(self, x: Element) -> bool:
        for i, v in x.free:
            if self.free_index == 0 or v % self.free_index:
                return False
        for name in (FINITE, TAIL):
            for i, v in x.block(name):
                q = self.group.coord_order(name, i)
                if v % (q // self.sub_order(name, i)):
                    return False
        return True

    __contains__ = contains

    def is_zero(self) -> bool:
        return ((self.free_index == 0 or self.group.free_rank == 0)
                and all(t == 1 for t in self.finite_sub + self.tail_sub))

    def is_finite(self) -> bool:
        return ((self.free_index == 0 or self.group.free_rank == 0)
                and all(t == 1 for t in self.tail_sub))

    def is_full(self) -> bool:
        g = self.group
        return ((self.free_index == 1 or g.free_rank == 0)
                and self.finite_sub == g.finite_orders
                and self.tail_sub == g.tail_pattern)

    def issubset(self, other: "SubgroupSpec") -> bool:
        if self.group.free_rank:
            if self.free_index and (other.free_index == 0 or self.free_index % other.free_index):
                return False
        return (all(other.finite_sub[i] % t == 0 for i, t in enumerate(self.finite_sub))
                and all(other.tail_sub[i] % t == 0 for i, t in enumerate(self.tail_sub)))

    def finite_part_elements(self) -> Iterator[Element]:
        """Elements of the subgroup supported on the finite cyclic part."""
        G = self.group
        ranges = []
        for q, t in zip(G.finite_orders, self.finite_sub):
            step = q // t
            ranges.append(range(0, q, step))
        for vals in product(*ranges):
            yield G.element(finite=dict(enumerate(vals)))

    def elements(self) -> List[Element]:
        """All elements of a finite subgroup."""
        if not self.is_finite():
            raise ValidationError("subgroup is infinite")
        return list(self.finite_part_elements())

    def describe(self) -> str:
        return self.kind or repr(self)


def n_torsion(G: GroupDescriptor, n: int) -> SubgroupSpec:
    """The subgroup G[n] = {x : n x = 0}; G[0] is G itself."""
    if n < 0:
        raise ValidationError("n must be non-negative")
    cut = (lambda q: q) if n == 0 else (lambda q: gcd(n, q))
    return SubgroupSpec(G, 1 if n == 0 else 0,
                        tuple(cut(q) for q in G.finite_orders),
                        tuple(cut(q) for q in G.tail_pattern),
                        kind=f"G[{n}]")


def scale_group(G: GroupDescriptor, m: int) -> SubgroupSpec:
    """The subgroup mG = {m x : x in G}."""
    if m < 1:
        raise ValidationError("m must be positive")
    return SubgroupSpec(G, m,
                        tuple(q // gcd(m, q) for q in G.finite_orders),
                        tuple(q // gcd(m, q) for q in G.tail_pattern),
                        kind=f"{m}G")


def canonical_json(obj) -> str:
    """Deterministic JSON text used for every serialized object."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def group_from_spec(matrix: Optional[Sequence[Sequence[int]]] = None, generators: int = 0,
                    tail_pattern: Sequence[int] = ()) -> GroupDescriptor:
    """Group given by ``generators`` generators and relation rows ``matrix``,
    plus an optional tail.  Free directions (zero invariant factors and
    generators without relations) become free rank."""
    rows = [list(r) for r in (matrix or [])]
    if rows and generators and len(rows[0]) != generators:
        raise ValidationError("relation rows must have one entry per generator")
    n = generators or (len(rows[0]) if rows else 0)
    diag = smith_normal_form(rows) if rows else []
    diag = diag + [0] * (n - len(diag))
    return GroupDescriptor(sum(1 for t in diag if t == 0),
                           tuple(t for t in diag if t > 1), tuple(tail_pattern))
