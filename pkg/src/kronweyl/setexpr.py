"""Symbolic countable subsets of a group and their torsion classification.

Leaves:

* ``Finite(elements)``
* ``Affine(a, b)``: the orbit {a + k b : k >= 0}
* ``BlockStream(c, template, start, step)``: {c + shift_k(template) : k >= 0},
  where shift_k moves the tail-supported template to offset start + k*step

plus ``Translate(g, inner)`` and ``Union(parts)``.  The classification of a
normalized expression is exact; the reasoning behind the leaf rules is
written up in ``docs/classification.md``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import count, islice
from math import ceil
from typing import Dict, Iterator, List, Optional, Tuple, Union as TUnion

from .abelian import (ZERO, Element, GroupDescriptor, element_order, lcm,
                      proper_divisors)
from .errors import ValidationError


class SetExpr:
    """Base class of all set expressions."""

    kind = ""


@dataclass(frozen=True)
class Finite(SetExpr):
    elements: Tuple[Element, ...] = ()
    kind = "finite"


@dataclass(frozen=True)
class Affine(SetExpr):
    a: Element
    b: Element
    kind = "affine"


@dataclass(frozen=True)
class BlockStream(SetExpr):
    c: Element
    template: Element
    start: int
    step: int
    kind = "blocks"

    def block(self, G: GroupDescriptor, k: int) -> Element:
        return G.shift_tail(self.template, self.start + k * self.step)

    def term(self, G: GroupDescriptor, k: int) -> Element:
        return G.add(self.c, self.block(G, k))

    def thin(self, j: int, factor: int) -> "BlockStream":
        """Sub-stream of blocks j, j+factor, j+2*factor, ..."""
        return BlockStream(self.c, self.template, self.start + j * self.step, self.step * factor)


@dataclass(frozen=True)
class Translate(SetExpr):
    g: Element
    inner: SetExpr
    kind = "translate"


@dataclass(frozen=True)
class Union(SetExpr):
    parts: Tuple[SetExpr, ...]
    kind = "union"


@dataclass(frozen=True)
class AlmostTorsion:
    n: int

    def __post_init__(self):
        if self.n == 1:
            raise AssertionError("level 1 cannot occur")


@dataclass(frozen=True)
class NotAlmostTorsion:
    d: int
    g: Element


@dataclass(frozen=True)
class FiniteSet:
    pass


TorsionClass = TUnion[AlmostTorsion, NotAlmostTorsion, FiniteSet]


# ---------------------------------------------------------------------------
# construction helpers and validation
# ---------------------------------------------------------------------------

def finite(*elements: Element) -> Finite:
    return Finite(tuple(elements))


def check_blockstream(G: GroupDescriptor, X: BlockStream) -> None:
    """Raise ValidationError unless X satisfies the block invariants."""
    G.validate(X.c)
    G.validate(X.template)
    if not G.has_tail:
        raise ValidationError("block streams need a tail")
    u = X.template
    if u.free or u.finite:
        raise ValidationError("template must be supported on tail coordinates")
    if X.step < 1 or X.step % G.period:
        raise ValidationError(f"step {X.step} must be a positive multiple of the tail period {G.period}")
    if X.start < 0 or X.start % G.period:
        raise ValidationError(f"start {X.start} must be a non-negative multiple of the tail period")
    if u.tail and u.tail[-1][0] >= X.step:
        raise ValidationError("template support must lie in [0, step)")
    if X.start <= X.c.max_tail() and u.tail:
        raise ValidationError("blocks overlap the support of c; raise start past it")


def block_stream(G: GroupDescriptor, c: Element, template: Element,
                 step: Optional[int] = None, start: Optional[int] = None) -> BlockStream:
    """BlockStream with aligned defaults: the smallest legal step and a start
    just past the tail support of ``c``."""
    p = G.period
    if not p:
        raise ValidationError("block streams need a tail")
    if step is None:
        need = template.max_tail() + 1
        step = max(p, -(-need // p) * p)
    if start is None:
        start = -(-(c.max_tail() + 1) // p) * p
    X = BlockStream(c, template, start, step)
    check_blockstream(G, X)
    return X


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def _translate_leaf(G, g: Element, X: SetExpr) -> List[SetExpr]:
    if isinstance(X, Finite):
        return [Finite(tuple(G.add(g, x) for x in X.elements))]
    if isinstance(X, Affine):
        return [Affine(G.add(g, X.a), X.b)]
    if isinstance(X, BlockStream):
        c = G.add(g, X.c)
        if not X.template.tail or c.max_tail() < X.start:
            return [BlockStream(c, X.template, X.start, X.step)]
        # peel off the blocks that now overlap supp(c)
        k0 = (c.max_tail() - X.start) // X.step + 1
        head = Finite(tuple(G.add(c, X.block(G, k)) for k in range(k0)))
        return [head, BlockStream(c, X.template, X.start + k0 * X.step, X.step)]
    raise TypeError(X)


def _leaves(X: SetExpr, G: GroupDescriptor, shift: Element) -> List[SetExpr]:
    if isinstance(X, Translate):
        G.validate(X.g)
        return _leaves(X.inner, G, G.add(shift, X.g))
    if isinstance(X, Union):
        out = []
        for part in X.parts:
            out.extend(_leaves(part, G, shift))
        return out
    if isinstance(X, Finite):
        for x in X.elements:
            G.validate(x)
    elif isinstance(X, Affine):
        G.validate(X.a)
        G.validate(X.b)
    elif isinstance(X, BlockStream):
        check_blockstream(G, X)
    else:
        raise ValidationError(f"not a set expression: {X!r}")
    return _translate_leaf(G, shift, X) if not shift.is_zero() else [X]


def _fold(G: GroupDescriptor, X: SetExpr) -> SetExpr:
    if isinstance(X, Affine):
        q = element_order(G, X.b)
        if q:
            return Finite(tuple(G.add(X.a, G.scale(k, X.b)) for k in range(q)))
    if isinstance(X, BlockStream) and X.template.is_zero():
        return Finite((X.c,))
    return X


def normalize(X: SetExpr, G: GroupDescriptor) -> SetExpr:
    """Canonical form: translations pushed into leaves, degenerate leaves
    folded into a single sorted Finite part placed first, unions flattened."""
    points = set()
    infinite: List[SetExpr] = []
    for leaf in _leaves(X, G, ZERO):
        leaf = _fold(G, leaf)
        if isinstance(leaf, Finite):
            points.update(leaf.elements)
        elif leaf not in infinite:
            infinite.append(leaf)
    parts: List[SetExpr] = []
    if points:
        parts.append(Finite(tuple(sorted(points))))
    parts.extend(infinite)
    if not parts:
        return Finite(())
    if len(parts) == 1:
        return parts[0]
    return Union(tuple(parts))


def parts_of(X: SetExpr) -> Tuple[SetExpr, ...]:
    """Top-level parts of a normalized expression."""
    return X.parts if isinstance(X, Union) else (X,)


def finite_part(X: SetExpr) -> Tuple[Element, ...]:
    for p in parts_of(X):
        if isinstance(p, Finite):
            return p.elements
    return ()


def infinite_leaves(X: SetExpr) -> List[SetExpr]:
    return [p for p in parts_of(X) if not isinstance(p, Finite)]


def is_infinite(X: SetExpr, G: GroupDescriptor) -> bool:
    return bool(infinite_leaves(normalize(X, G)))


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def _leaf_iter(X: SetExpr, G: GroupDescriptor) -> Iterator[Element]:
    if isinstance(X, Finite):
        return iter(X.elements)
    if isinstance(X, Affine):
        def gen():
            x = X.a
            while True:
                yield x
                x = G.add(x, X.b)
        return gen()
    if isinstance(X, BlockStream):
        return (X.term(G, k) for k in count())
    raise TypeError(X)


def iterate(X: SetExpr, G: GroupDescriptor) -> Iterator[Element]:
    """Distinct elements in canonical order: parts interleaved round-robin,
    repeats dropped at their later occurrence."""
    X = normalize(X, G)
    active = [_leaf_iter(p, G) for p in parts_of(X)]
    seen = set()
    while active:
        still = []
        for it in active:
            try:
                x = next(it)
            except StopIteration:
                continue
            still.append(it)
            if x not in seen:
                seen.add(x)
                yield x
        active = still


def enumerate_prefix(X: SetExpr, G: GroupDescriptor, N: int) -> List[Element]:
    if N < 0:
        raise ValidationError("N must be non-negative")
    return list(islice(iterate(X, G), N))


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------

def _scale_leaf(n: int, X: SetExpr, G: GroupDescriptor) -> SetExpr:
    if isinstance(X, Finite):
        return Finite(tuple(G.scale(n, x) for x in X.elements))
    if isinstance(X, Affine):
        return Affine(G.scale(n, X.a), G.scale(n, X.b))
    if isinstance(X, BlockStream):
        return BlockStream(G.scale(n, X.c), G.scale(n, X.template), X.start, X.step)
    raise TypeError(X)


def scale_set(n: int, X: SetExpr, G: GroupDescriptor) -> SetExpr:
    """The set {n x : x in X}, normalized."""
    if n < 1:
        raise ValidationError("n must be positive")
    X = normalize(X, G)
    return normalize(Union(tuple(_scale_leaf(n, p, G) for p in parts_of(X))), G)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def leaf_level(G: GroupDescriptor, X: SetExpr) -> int:
    """lcm of element orders over a leaf (0 if some element has infinite order)."""
    if isinstance(X, Finite):
        return lcm(*(element_order(G, x) for x in X.elements))
    if isinstance(X, Affine):
        return 0
    if isinstance(X, BlockStream):
        return lcm(element_order(G, X.c), element_order(G, X.template))
    raise TypeError(X)


def classify(X: SetExpr, G: GroupDescriptor) -> TorsionClass:
    """Exact almost-n-torsion class of the set denoted by X."""
    X = normalize(X, G)
    leaves = infinite_leaves(X)
    if not leaves:
        return FiniteSet()
    N = lcm(*(leaf_level(G, p) for p in parts_of(X)))
    streams = [p for p in leaves if isinstance(p, BlockStream)]
    # An Affine leaf has injective fibers d*x = g for every d >= 1, and a
    # block stream's fiber over d is infinite exactly when d kills the
    # template (then it is the constant d*c).  Finite parts never matter.
    bad = []
    for S in streams:
        q = element_order(G, S.template)
        if N == 0:
            bad.append((q, G.scale(q, S.c)))
        else:
            for d in proper_divisors(N):
                if d % q == 0:
                    bad.append((d, G.scale(d, S.c)))
                    break
    if bad:
        d, g = min(bad)
        return NotAlmostTorsion(d, g)
    return AlmostTorsion(N)


def extract_almost_torsion(X: SetExpr, G: GroupDescriptor):
    """(g, S, n) with S infinite, g + S inside X and S almost n-torsion.

    Uses the first infinite leaf; returns None for finite sets.
    """
    X = normalize(X, G)
    for p in infinite_leaves(X):
        if isinstance(p, Affine):
            return ZERO, p, 0
        if isinstance(p, BlockStream):
            S = BlockStream(ZERO, p.template, p.start, p.step)
            return p.c, S, element_order(G, p.template)
    return None


def decompose(X: SetExpr, G: GroupDescriptor):
    """Finite part plus one (g, S, n) extraction per infinite leaf."""
    X = normalize(X, G)
    out = []
    for p in infinite_leaves(X):
        out.append(extract_almost_torsion(p, G))
    return finite_part(X), out


# ---------------------------------------------------------------------------
# finite evidence
# ---------------------------------------------------------------------------

@dataclass
class PrefixReport:
    N: int
    candidate: int
    level_stable: bool
    divisors: List[int]
    fiber_counts: Dict[Tuple[int, Element], int]
    max_fiber: int
    threshold: int
    flagged: List[Tuple[int, Element, int]]
    note: str = ("fibers are counted on a finite prefix; the threshold is a heuristic "
                 "stand-in for infinitude and proves nothing on its own")

    @property
    def consistent(self) -> bool:
        return not self.flagged

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "candidate": self.candidate,
            "level_stable": self.level_stable,
            "divisors": self.divisors,
            "max_fiber": self.max_fiber,
            "threshold": self.threshold,
            "consistent": self.consistent,
            "flagged": [{"d": d, "g": g.to_json(), "count": c} for d, g, c in self.flagged],
            "note": self.note,
        }


def classify_prefix(X, G: GroupDescriptor, N: int, d_bound: int = 12,
                    threshold: Optional[int] = None) -> PrefixReport:
    """Fiber counts of ``d x = g`` over the first N elements.

    X may be a SetExpr or any iterable of Elements (consumed once).
    """
    if N < 1:
        raise ValidationError("N must be positive")
    if d_bound < 1:
        raise ValidationError("d_bound must be positive")
    if isinstance(X, SetExpr):
        prefix = enumerate_prefix(X, G, N)
    else:
        prefix = list(islice(iter(X), N))
    orders = [element_order(G, x) for x in prefix]
    cand = lcm(*orders)
    half = lcm(*orders[: (len(orders) + 1) // 2])
    if cand == 0:
        divs = list(range(1, d_bound + 1))
    else:
        divs = proper_divisors(cand)
    if threshold is None:
        threshold = ceil(len(prefix) ** 0.5) if prefix else 1
    counts: Dict[Tuple[int, Element], int] = {}
    for d in divs:
        for x in prefix:
            key = (d, G.scale(d, x))
            counts[key] = counts.get(key, 0) + 1
    flagged = sorted((d, g, c) for (d, g), c in counts.items() if c > threshold)
    return PrefixReport(len(prefix), cand, cand == half, divs, counts,
                        max(counts.values(), default=0), threshold, flagged)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def to_json(X: SetExpr) -> dict:
    if isinstance(X, Finite):
        return {"kind": "finite", "elements": [x.to_json() for x in X.elements]}
    if isinstance(X, Affine):
        return {"kind": "affine", "a": X.a.to_json(), "b": X.b.to_json()}
    if isinstance(X, BlockStream):
        return {"kind": "blocks", "c": X.c.to_json(), "template": X.template.to_json(),
                "start": X.start, "step": X.step}
    if isinstance(X, Translate):
        return {"kind": "translate", "g": X.g.to_json(), "inner": to_json(X.inner)}
    if isinstance(X, Union):
        return {"kind": "union", "parts": [to_json(p) for p in X.parts]}
    raise TypeError(X)


_KEYS = {
    "finite": {"elements"},
    "affine": {"a", "b"},
    "blocks": {"c", "template", "start", "step"},
    "translate": {"g", "inner"},
    "union": {"parts"},
}


def from_json(obj) -> SetExpr:
    if not isinstance(obj, dict) or obj.get("kind") not in _KEYS:
        raise ValidationError(f"set expression needs a known 'kind': {obj!r}")
    kind = obj["kind"]
    keys = set(obj) - {"kind"}
    if keys != _KEYS[kind]:
        raise ValidationError(f"{kind} expects keys {sorted(_KEYS[kind])}, got {sorted(keys)}")
    E = Element.from_json
    if kind == "finite":
        return Finite(tuple(E(x) for x in obj["elements"]))
    if kind == "affine":
        return Affine(E(obj["a"]), E(obj["b"]))
    if kind == "blocks":
        return BlockStream(E(obj["c"]), E(obj["template"]), int(obj["start"]), int(obj["step"]))
    if kind == "translate":
        return Translate(E(obj["g"]), from_json(obj["inner"]))
    return Union(tuple(from_json(p) for p in obj["parts"]))


def describe_class(cls: TorsionClass) -> dict:
    if isinstance(cls, AlmostTorsion):
        return {"class": "almost-torsion", "n": cls.n}
    if isinstance(cls, NotAlmostTorsion):
        return {"class": "not-almost-torsion", "witness": {"d": cls.d, "g": cls.g.to_json()}}
    return {"class": "finite"}
