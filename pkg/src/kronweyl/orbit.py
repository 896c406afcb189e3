"""Exact nested-interval constructions on finite-dimensional tori.

``find_orbit_point`` builds a point x of the k-torus such that for each
requested box some element s of an integer stream has s*x inside the box.
``construct_dense_homomorphism`` assigns images to group generators so that
images of prescribed sets hit prescribed boxes.  All state is rational and
every comparison is exact.

These are finite-dimensional, finite-precision scale-downs: each report
covers exactly the listed boxes and nothing more.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice, product
from math import ceil, floor
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sympy import nextprime

from . import cellsearch
from .abelian import FINITE, FREE, TAIL, Element, GroupDescriptor, lcm
from .equidist import (FormalReal, TorusPoint, box_discrepancy_sampled,
                       coordinate_discrepancy, parse_rational, rational_str)
from .errors import (BudgetError, InjectivityConflict, InsufficientStreamError,
                     ValidationError)
from .setexpr import (Affine, AlmostTorsion, Finite, SetExpr,
                      classify, infinite_leaves, iterate, normalize,
                      parts_of)

SCALE_NOTE = ("finite-dimensional, finite-precision construction: only the listed "
              "boxes are certified")

HALF = Fraction(1, 2)


def circ_dist(a: Fraction, b: Fraction) -> Fraction:
    """Distance between a and b on R/Z."""
    t = (a - b) % 1
    return min(t, 1 - t)


# ---------------------------------------------------------------------------
# boxes and requirements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArcBox:
    """Product of circular arcs {x : dist(x_i, center_i) < radius_i}.

    A radius of 0 denotes the single point ``center`` and is only accepted
    in requirements at a torsion level n >= 2.
    """

    centers: Tuple[Fraction, ...]
    radii: Tuple[Fraction, ...]

    def __post_init__(self):
        c = tuple(Fraction(v) % 1 for v in self.centers)
        r = tuple(Fraction(v) for v in self.radii)
        if len(c) != len(r) or not c:
            raise ValidationError("box needs one radius per coordinate")
        if any(v < 0 or v > HALF for v in r):
            raise ValidationError("radii must lie in [0, 1/2]")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)

    @classmethod
    def cube(cls, center: Sequence, radius) -> "ArcBox":
        center = tuple(Fraction(v) for v in center)
        return cls(center, (Fraction(radius),) * len(center))

    @property
    def dim(self) -> int:
        return len(self.centers)

    def is_degenerate(self) -> bool:
        return any(r == 0 for r in self.radii)

    def margins(self, x: Sequence[Fraction]) -> Tuple[Fraction, ...]:
        return tuple(r - circ_dist(v, c) for v, c, r in zip(x, self.centers, self.radii))

    def contains(self, x) -> bool:
        coords = x.coords if isinstance(x, TorusPoint) else tuple(Fraction(v) for v in x)
        for v, c, r in zip(coords, self.centers, self.radii):
            dist = circ_dist(v, c)
            if not (dist < r or (r == 0 and dist == 0)):
                return False
        return True

    def nearest_torsion_point(self, n: int) -> Optional[TorusPoint]:
        """A point of T[n]^d inside the box closest to its center, or None."""
        out = []
        for c, r in zip(self.centers, self.radii):
            best = Fraction(round(c * n), n) % 1
            dist = circ_dist(best, c)
            if not (dist < r or (r == 0 and dist == 0)):
                return None
            out.append(best)
        return TorusPoint(tuple(out))

    def contains_float(self, pts: np.ndarray) -> np.ndarray:
        c = np.array([float(v) for v in self.centers])
        r = np.array([float(v) for v in self.radii])
        t = np.mod(pts - c, 1.0)
        dist = np.minimum(t, 1.0 - t)
        return np.all((dist < r) | ((r == 0) & (dist == 0)), axis=-1)

    def to_json(self) -> dict:
        return {"center": [rational_str(v) for v in self.centers],
                "radius": [rational_str(v) for v in self.radii]}

    @classmethod
    def from_json(cls, obj) -> "ArcBox":
        if not isinstance(obj, dict) or set(obj) != {"center", "radius"}:
            raise ValidationError(f"box needs exactly 'center' and 'radius': {obj!r}")
        center = [parse_rational(v) for v in obj["center"]]
        radius = obj["radius"]
        if isinstance(radius, list):
            radii = [parse_rational(v) for v in radius]
        else:
            radii = [parse_rational(radius)] * len(center)
        return cls(tuple(center), tuple(radii))


@dataclass(frozen=True)
class Requirement:
    id: str
    level: int
    box: ArcBox
    set_ref: str = "S"

    def __post_init__(self):
        if self.level == 1 or self.level < 0:
            raise ValidationError("requirement level must be 0 or >= 2")
        if self.level == 0 and self.box.is_degenerate():
            raise ValidationError(f"{self.id}: level-0 boxes need positive radii")
        if self.level >= 2 and self.box.nearest_torsion_point(self.level) is None:
            raise ValidationError(f"{self.id}: box misses the {self.level}-torsion points")

    def to_json(self) -> dict:
        return {"id": self.id, "level": self.level, "box": self.box.to_json(),
                "set_ref": self.set_ref}

    @classmethod
    def from_json(cls, obj) -> "Requirement":
        if not isinstance(obj, dict) or set(obj) - {"id", "level", "box", "set_ref"}:
            raise ValidationError(f"bad requirement {obj!r}")
        return cls(str(obj["id"]), int(obj.get("level", 0)), ArcBox.from_json(obj["box"]),
                   str(obj.get("set_ref", "S")))


@dataclass(frozen=True)
class Witness:
    """s * x lands in the box: |s x_i - y_i - n_i| < radius_i.

    ``element`` is an integer for orbit points and a group Element for
    homomorphisms; ``point`` is the achieved image.
    """

    req_id: str
    element: object
    shifts: Tuple[int, ...]
    point: TorusPoint
    margins: Tuple[Fraction, ...]
    index: Optional[int] = None

    def to_json(self) -> dict:
        el = self.element.to_json() if isinstance(self.element, Element) else str(self.element)
        return {"req": self.req_id, "element": el, "shifts": list(self.shifts),
                "point": self.point.to_json(),
                "margins": [rational_str(m) for m in self.margins], "index": self.index}


def _witness(req: Requirement, s, image: Sequence[Fraction], index=None) -> Witness:
    """Exact witness for an unreduced image; raises if the image misses."""
    box = req.box
    shifts, margins = [], []
    for v, c, r in zip(image, box.centers, box.radii):
        n = floor(v - c + HALF)
        shifts.append(n)
        margins.append(r - abs(v - c - n))
    pt = TorusPoint(tuple(image))
    if not box.contains(pt):
        raise AssertionError(f"internal error: witness for {req.id} misses its box")
    return Witness(req.id, s, tuple(shifts), pt, tuple(margins), index)


def requirement_net(n: int, d: int, eps, prefix: str = "net") -> List[Requirement]:
    """Finite list of boxes expressing density in T[n]^d (n = 0: all of T^d).

    For n = 0 the centers form the grid of pitch eps and the radius is eps,
    so the open boxes cover the torus.  For n >= 2 there is one box of
    radius eps around each of the n^d torsion points; eps = 0 gives exact
    point requirements.
    """
    eps = Fraction(eps)
    if n == 1:
        raise ValidationError("level 1 is empty: T[1] is a single point and no set is almost 1-torsion")
    if n < 0 or d < 1:
        raise ValidationError("need n >= 0 and d >= 1")
    if eps < 0 or eps > HALF or (n == 0 and eps == 0):
        raise ValidationError("eps must lie in (0, 1/2] (0 allowed for n >= 2)")
    if n == 0:
        steps = ceil(1 / eps)
        grid = [Fraction(i) * eps for i in range(steps)]
    else:
        grid = [Fraction(i, n) for i in range(n)]
    out = []
    for i, c in enumerate(product(grid, repeat=d)):
        out.append(Requirement(f"{prefix}-{i}", n, ArcBox.cube(c, eps)))
    return out


# ---------------------------------------------------------------------------
# integer streams
# ---------------------------------------------------------------------------

class IntStream:
    """Sequential stream over an iterable of integers, consumed once."""

    def __init__(self, items: Iterable[int]):
        self._it = iter(items)
        self.position = -1
        self.seen: List[int] = []

    def draw_at_least(self, bound: int) -> Tuple[int, int]:
        """First remaining element s with |s| >= bound, and its index."""
        for s in self._it:
            self.position += 1
            self.seen.append(int(s))
            if abs(int(s)) >= bound:
                return int(s), self.position
        raise InsufficientStreamError(f"stream exhausted before an element with |s| >= {bound}")


class PrimeStream:
    """The primes in increasing order, with arithmetic skip-ahead."""

    def __init__(self):
        self.last = 1

    def draw_at_least(self, bound: int) -> Tuple[int, None]:
        p = nextprime(max(self.last, bound - 1))
        self.last = p
        return p, None


class CountStream:
    """0, 1, 2, ... with skip-ahead."""

    def __init__(self, start: int = 0):
        self.next = start

    def draw_at_least(self, bound: int) -> Tuple[int, int]:
        s = max(self.next, bound)
        self.next = s + 1
        return s, s


class ZSetStream:
    """Canonical enumeration of a symbolic subset of Z with skip-ahead.

    Positions are (round, part) pairs in round-robin order.  Repeats are
    skipped exactly as in :func:`kronweyl.setexpr.iterate`.
    """

    def __init__(self, X: SetExpr, G: GroupDescriptor):
        if G != GroupDescriptor(1):
            raise ValidationError("integer streams need G = Z")
        X = normalize(X, G)
        self.parts = []
        for p in parts_of(X):
            if isinstance(p, Finite):
                self.parts.append(("fin", [dict(x.free).get(0, 0) for x in p.elements]))
            else:
                self.parts.append(("aff", (dict(p.a.free).get(0, 0), dict(p.b.free).get(0, 0))))
        self.cursor = (-1, len(self.parts))

    def _value(self, i: int, r: int) -> int:
        kind, data = self.parts[i]
        if kind == "fin":
            return data[r]
        a, b = data
        return a + r * b

    def _first_round(self, i: int, r_lo: int, bound: int) -> Optional[int]:
        kind, data = self.parts[i]
        if kind == "fin":
            return next((r for r in range(r_lo, len(data)) if abs(data[r]) >= bound), None)
        a, b = data
        if b < 0:
            a, b = -a, -b
        # |a + r b| >= bound with b > 0: either a + r b <= -bound (small r) or
        # a + r b >= bound (large r)
        low = (-bound - a) // b
        if r_lo <= low:
            return r_lo
        return max(r_lo, -(-(bound - a) // b))

    def _earlier(self, v: int, pos: Tuple[int, int]) -> bool:
        for i, (kind, data) in enumerate(self.parts):
            if kind == "fin":
                rs = [r for r, w in enumerate(data) if w == v]
            else:
                a, b = data
                rs = [(v - a) // b] if (v - a) % b == 0 and (v - a) // b >= 0 else []
            if any((r, i) < pos for r in rs):
                return True
        return False

    def draw_at_least(self, bound: int) -> Tuple[int, Tuple[int, int]]:
        while True:
            best = None
            cr, ci = self.cursor
            for i in range(len(self.parts)):
                r_lo = cr if i > ci else cr + 1
                r = self._first_round(i, max(r_lo, 0), bound)
                if r is not None and (best is None or (r, i) < best):
                    best = (r, i)
            if best is None:
                raise InsufficientStreamError(f"set exhausted before |s| >= {bound}")
            self.cursor = best
            v = self._value(best[1], best[0])
            if not self._earlier(v, best):
                return v, best


def as_stream(S, G: Optional[GroupDescriptor] = None):
    if hasattr(S, "draw_at_least"):
        return S
    if isinstance(S, SetExpr):
        return ZSetStream(S, G or GroupDescriptor(1))
    return IntStream(S)


# ---------------------------------------------------------------------------
# orbit points
# ---------------------------------------------------------------------------

class NestedBox:
    """Product of aligned dyadic intervals [lo_i / 2^e_i, (lo_i + 1) / 2^e_i)."""

    def __init__(self, k: int):
        self.lo = [0] * k
        self.exp = [0] * k

    def lengths(self) -> List[Fraction]:
        return [Fraction(1, 2 ** e) for e in self.exp]

    def lower(self) -> Tuple[Fraction, ...]:
        return tuple(Fraction(l, 2 ** e) for l, e in zip(self.lo, self.exp))

    def refine(self, s: int, box: ArcBox) -> None:
        """Shrink so that s * (every point) stays inside ``box``.

        Needs |s| * len >= 2 in every coordinate.  The new interval has
        |s| * len' <= r / 2 and contains the smallest preimage of the box
        center that is >= the old lower end.
        """
        a = abs(s)
        for i, (y, r) in enumerate(zip(box.centers, box.radii)):
            lo = Fraction(self.lo[i], 2 ** self.exp[i])
            if s > 0:
                n = ceil(s * lo - y)
            else:
                n = floor(s * lo - y)
            x_star = (y + n) / s
            e = self.exp[i]
            while Fraction(a, 2 ** e) > r / 2:
                e += 1
            self.lo[i] = floor(x_star * 2 ** e)
            self.exp[i] = e

    def sample(self, count_: int, seed: int = 0) -> List[Tuple[Fraction, ...]]:
        """Deterministic rational points of the box (for soundness checks)."""
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(count_):
            pt = []
            for l, e in zip(self.lo, self.exp):
                t = Fraction(int(rng.integers(0, 2 ** 20)), 2 ** 20)
                pt.append(Fraction(l, 2 ** e) + t / 2 ** e)
            out.append(tuple(pt))
        return out


def find_orbit_point(S, reqs: Sequence[Requirement], k: int, trace=None,
                     search_work: float = 3e6):
    """Point x of T^k with s_j x in box_j for every requirement j.

    S is an iterable of integers, a symbolic subset of Z or any object with a
    ``draw_at_least(bound)`` method.  Returns (x, witnesses) where x is the
    lower corner of the final dyadic box.  ``trace`` (a list) receives a
    copy of the nested box after each requirement.

    A finite iterable can run out before the nested rule finds elements
    large enough.  Its elements are then handed to a direct cell search
    (see ``cellsearch``), and x is the midpoint of the cell found; the
    trace only covers the nested steps taken before that.  The error is
    raised only when the search finds nothing either.
    """
    for req in reqs:
        if req.level != 0:
            raise ValidationError(f"{req.id}: orbit points only take level-0 requirements")
        if req.box.dim != k:
            raise ValidationError(f"{req.id}: box dimension {req.box.dim} != {k}")
    stream = as_stream(S)
    box = NestedBox(k)
    drawn = []
    try:
        for req in reqs:
            need = 2 * 2 ** max(box.exp)
            s, idx = stream.draw_at_least(need)
            box.refine(s, req.box)
            drawn.append((req, s, idx))
            if trace is not None:
                nb = NestedBox(k)
                nb.lo, nb.exp = list(box.lo), list(box.exp)
                trace.append((req, s, nb))
    except InsufficientStreamError as exc:
        seen = getattr(stream, "seen", None)
        if seen is None or search_work <= 0:
            raise
        found = cellsearch.find_point(seen, [r.box for r in reqs], work=search_work)
        if found is None:
            raise InsufficientStreamError(
                f"{exc}; a direct search over all {len(seen)} elements found no point") from None
        x, chosen = found
        first = {}
        for i, v in enumerate(seen):
            first.setdefault(v, i)
        witnesses = [_witness(req, s, [s * v for v in x], first[s]) for req, s in zip(reqs, chosen)]
        return TorusPoint(x), witnesses
    x = box.lower()
    witnesses = [_witness(req, s, [s * v for v in x], idx) for req, s, idx in drawn]
    return TorusPoint(x), witnesses


# ---------------------------------------------------------------------------
# homomorphisms
# ---------------------------------------------------------------------------

Gen = Tuple[str, int]


def _gen_order(G: GroupDescriptor, g: Gen) -> int:
    return G.coord_order(g[0], g[1])


@dataclass
class GeneratorAssignment:
    """Images of finitely many generators in T^d; other generators are free.

    Coordinates are Fractions, or FormalReals after augmentation.
    """

    group: GroupDescriptor
    dim: int
    images: Dict[Gen, Tuple] = field(default_factory=dict)

    def assigned(self, g: Gen) -> bool:
        return g in self.images

    def assign(self, g: Gen, point: Sequence) -> None:
        q = _gen_order(self.group, g)
        pt = tuple(_mod1(v) for v in point)
        if q and any(not isinstance(v, Fraction) or q % v.denominator for v in pt):
            raise ValidationError(f"image of {g} must be {q}-torsion")
        self.images[g] = pt

    def image(self, x: Element) -> Tuple:
        """Image of x with unassigned generators sent to 0."""
        acc = [Fraction(0)] * self.dim
        for name, i, v in x.coords():
            img = self.images.get((name, i))
            if img is None:
                continue
            acc = [a + v * b for a, b in zip(acc, img)]
        return tuple(_mod1(a) for a in acc)

    def unassigned_in(self, x: Element) -> List[Gen]:
        return [(name, i) for name, i, _ in x.coords() if (name, i) not in self.images]

    def to_json(self) -> dict:
        def enc(v):
            return v.to_json() if isinstance(v, FormalReal) else rational_str(v)
        return {"dim": self.dim,
                "images": [{"gen": list(g), "point": [enc(v) for v in p]}
                           for g, p in sorted(self.images.items())]}


def _mod1(v):
    if isinstance(v, FormalReal):
        return v.mod1() if not v.is_rational() else v.const % 1
    return Fraction(v) % 1


def _solve_congruence(coeffs: Sequence[int], target: int, modulus: int) -> Optional[List[int]]:
    """Integers b_i with sum coeffs_i b_i = target (mod modulus), or None."""
    g = modulus
    # running gcd with Bezout coefficients: g = u * modulus + sum w_i c_i
    w = [0] * len(coeffs)
    for i, c in enumerate(coeffs):
        d, a, b = _ext_gcd(g, c)
        w = [a * t for t in w]
        w[i] = b
        g = d
    if target % g:
        return None
    f = target // g
    return [(f * t) % modulus for t in w]


def _ext_gcd(a: int, b: int) -> Tuple[int, int, int]:
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def _solve_fresh(G, assignment: GeneratorAssignment, x: Element, target: TorusPoint):
    """Images for the unassigned generators of x so that x maps to target.

    Returns {generator: point} or None when the fresh generators cannot reach
    the target (or x has a fresh free generator, handled elsewhere).
    """
    fresh = assignment.unassigned_in(x)
    if not fresh or any(g[0] == FREE for g in fresh):
        return None
    coeff = dict(((name, i), v) for name, i, v in x.coords())
    base = assignment.image(x)
    orders = [_gen_order(G, g) for g in fresh]
    out = {g: [] for g in fresh}
    for j in range(assignment.dim):
        t = (target.coords[j] - base[j]) % 1
        L = lcm(*orders, t.denominator)
        A = [coeff[g] * (L // q) for g, q in zip(fresh, orders)]
        sol = _solve_congruence(A, int(t * L), L)
        if sol is None:
            return None
        for g, q, b in zip(fresh, orders, sol):
            out[g].append(Fraction(b % q, q))
    return out


def construct_dense_homomorphism(G: GroupDescriptor, family: Sequence[SetExpr], d: int,
                                 reqs: Sequence[Sequence[Requirement]], budget: int = 32,
                                 window: int = 100_000):
    """Generator images so every requirement box is hit by the image of its set.

    ``family[j]`` must be almost n_j-torsion and ``reqs[j]`` lists boxes at
    level n_j.  Returns (assignment, witnesses).  Raises BudgetError (with the
    partial assignment) after ``budget`` forced misses in one walk.
    """
    if len(family) != len(reqs):
        raise ValidationError("need one requirement list per set")
    levels = []
    for j, S in enumerate(family):
        cls = classify(S, G)
        if not isinstance(cls, AlmostTorsion):
            raise ValidationError(f"set {j} is not almost torsion: {cls}")
        levels.append(cls.n)
        for r in reqs[j]:
            if r.level != cls.n:
                raise ValidationError(f"{r.id}: level {r.level} != set level {cls.n}")
            if r.box.dim != d:
                raise ValidationError(f"{r.id}: box dimension {r.box.dim} != {d}")

    assignment = GeneratorAssignment(G, d)
    witnesses: List[Witness] = []

    if G == GroupDescriptor(1):
        # Hom(Z, T^d) is T^d: one nested box shared by all sets
        box = NestedBox(d)
        drawn = []
        for S, rs in zip(family, reqs):
            stream = ZSetStream(S, G)
            for req in rs:
                s, idx = stream.draw_at_least(2 * 2 ** max(box.exp))
                box.refine(s, req.box)
                drawn.append((req, s, idx))
        x = box.lower()
        if drawn:
            assignment.assign((FREE, 0), x)
        for req, s, idx in drawn:
            witnesses.append(_witness(req, G.element(free={0: s}), [s * v for v in x], idx))
        return assignment, witnesses

    for S, n, rs in zip(family, levels, reqs):
        if not rs:
            continue
        if n == 0:
            witnesses += _affine_requirements(G, assignment, S, rs, budget, window)
        else:
            witnesses += _torsion_requirements(G, assignment, S, n, rs, budget, window)
    return assignment, witnesses


class _Walker:
    """Cursor over the canonical enumeration of one set, shared by all of its
    requirements.  Elements whose images are already forced are remembered,
    since a later box may contain them."""

    def __init__(self, G, assignment, S, budget, window):
        self.assignment = assignment
        self.it = enumerate(islice(iterate(S, G), window))
        self.forced: List[Tuple[int, Element]] = []
        self.budget = budget
        self.window = window

    def hit(self, req, solve):
        """Witness for the first element whose image can be placed in (or
        already is in) the box.  ``solve(x)`` returns fresh generator images
        or None."""
        asg = self.assignment
        for idx, x in self.forced:
            img = asg.image(x)
            if req.box.contains(img):
                return _witness(req, x, img, idx)
        misses = 0
        for idx, x in self.it:
            sol = solve(x)
            if sol is not None:
                for g, pt in sol.items():
                    asg.assign(g, pt)
                self.forced.append((idx, x))
                return _witness(req, x, asg.image(x), idx)
            if not asg.unassigned_in(x):
                self.forced.append((idx, x))
                img = asg.image(x)
                if req.box.contains(img):
                    return _witness(req, x, img, idx)
            misses += 1
            if misses > self.budget:
                raise BudgetError(f"{req.id}: more than {self.budget} forced misses", partial=asg)
        raise BudgetError(f"{req.id}: no hit in the first {self.window} elements", partial=asg)


def _torsion_requirements(G, assignment, S, n, rs, budget, window):
    walker = _Walker(G, assignment, S, budget, window)
    out = []
    for req in rs:
        target = req.box.nearest_torsion_point(n)
        out.append(walker.hit(req, lambda x: _solve_fresh(G, assignment, x, target)))
    return out


def _affine_requirements(G, assignment, S, rs, budget, window):
    """Level-0 requirements through the first Affine leaf a + k b.

    A fresh free generator f in supp(b) absorbs everything: alpha, the
    wanted image of b, comes from a nested box over the multipliers k, and
    image(e_f) = (alpha - rest) / b_f.
    """
    X = normalize(S, G)
    leaf = next(p for p in infinite_leaves(X) if isinstance(p, Affine))
    b_free = dict(leaf.b.free)
    f = next((i for i in sorted(b_free) if (FREE, i) not in assignment.images), None)
    if f is None:
        walker = _Walker(G, assignment, S, budget, window)
        return [walker.hit(req, lambda x: None) for req in rs]
    zero = (Fraction(0),) * assignment.dim
    for g in assignment.unassigned_in(leaf.a) + assignment.unassigned_in(leaf.b):
        if g != (FREE, f) and not assignment.assigned(g):
            assignment.assign(g, zero)
    base_a = assignment.image(leaf.a)
    rest = assignment.image(leaf.b)
    shifted = [Requirement(r.id, 0, ArcBox(tuple(c - a for c, a in zip(r.box.centers, base_a)),
                                            r.box.radii)) for r in rs]
    alpha, ws = find_orbit_point(CountStream(0), shifted, assignment.dim)
    coef = b_free[f]
    assignment.assign((FREE, f), tuple((al - w) / coef for al, w in zip(alpha.coords, rest)))
    out = []
    for req, w in zip(rs, ws):
        x = G.add(leaf.a, G.scale(w.element, leaf.b))
        out.append(_witness(req, x, assignment.image(x), w.element))
    return out


# ---------------------------------------------------------------------------
# injectivity on a window
# ---------------------------------------------------------------------------

def _window_gens(G: GroupDescriptor, assignment: GeneratorAssignment) -> List[Gen]:
    gens = [(FREE, i) for i in range(G.free_rank)]
    gens += [(FINITE, i) for i in range(len(G.finite_orders))]
    if G.has_tail:
        top = max([i for (b, i) in assignment.images if b == TAIL] + [G.period - 1])
        gens += [(TAIL, i) for i in range(top + 1)]
    return gens


def window_elements(G: GroupDescriptor, gens: Sequence[Gen], N: int) -> List[Element]:
    """First N elements of the subgroup generated by ``gens``, by weight.

    Weight is the sum of |coefficients| (torsion coefficients taken in
    [0, q)), ties broken by canonical element order.
    """
    out: List[Element] = []
    w = 0
    while len(out) < N:
        layer = set()
        for combo in _coefficient_vectors(G, gens, w):
            layer.add(G.element(**_as_blocks(gens, combo)))
        out.extend(sorted(layer))
        w += 1
        if w > 64 and not layer:
            break
    return out[:N]


def _coefficient_vectors(G, gens, weight):
    """All coefficient vectors of total weight exactly ``weight``."""
    def rec(i, left):
        if i == len(gens):
            if left == 0:
                yield ()
            return
        q = _gen_order(G, gens[i])
        if q:
            choices = range(0, min(left, q - 1) + 1)
            signed = lambda v: [v]
        else:
            choices = range(0, left + 1)
            signed = lambda v: [v, -v] if v else [0]
        for v in choices:
            for sv in signed(v):
                for tail in rec(i + 1, left - v):
                    yield (sv,) + tail
    return rec(0, weight)


def _as_blocks(gens, combo):
    blocks = {FREE: {}, FINITE: {}, TAIL: {}}
    for (b, i), v in zip(gens, combo):
        if v:
            blocks[b][i] = v
    return blocks


def ensure_injective_window(G: GroupDescriptor, assignment: GeneratorAssignment,
                            N: int) -> GeneratorAssignment:
    """Extend the map so that it is injective on the first N window elements.

    Every unassigned generator gets its own new coordinate: a fresh formal
    symbol for free generators and 1/q for a generator of order q.  Assigned
    generators are left alone, so a forced collision is reported with the
    colliding pair.
    """
    if N < 1:
        raise ValidationError("window must be positive")
    gens = _window_gens(G, assignment)
    fresh = [g for g in gens if not assignment.assigned(g)]
    dim = assignment.dim + len(fresh)
    out = GeneratorAssignment(G, dim)
    pad = (Fraction(0),) * len(fresh)
    for g, pt in assignment.images.items():
        out.images[g] = tuple(pt) + pad
    sym = 0
    for j, g in enumerate(fresh):
        new = [Fraction(0)] * dim
        q = _gen_order(G, g)
        if q:
            new[assignment.dim + j] = Fraction(1, q)
        else:
            sym += 1
            new[assignment.dim + j] = FormalReal.symbol(sym)
        out.images[g] = tuple(new)
    seen: Dict[Tuple, Element] = {}
    for x in window_elements(G, gens, N):
        key = tuple(_mod1(v) for v in _image_formal(out, x))
        if key in seen:
            raise InjectivityConflict(f"{seen[key]} and {x} have the same image",
                                      pair=(seen[key], x))
        seen[key] = x
    return out


def _image_formal(assignment: GeneratorAssignment, x: Element) -> List:
    acc: List = [FormalReal(Fraction(0))] * assignment.dim
    for name, i, v in x.coords():
        img = assignment.images.get((name, i))
        if img is None:
            continue
        acc = [a + FormalReal.lift(b) * v for a, b in zip(acc, img)]
    return [a.mod1() for a in acc]


# ---------------------------------------------------------------------------
# orbit simulation
# ---------------------------------------------------------------------------

@dataclass
class FlowReport:
    N: int
    hits: List[int]
    first_hit: List[Optional[int]]
    discrepancy: float
    box_discrepancy: float
    points: object = None

    def to_json(self) -> dict:
        return {"N": self.N, "hits": self.hits, "first_hit": self.first_hit,
                "coordinate_discrepancy": self.discrepancy,
                "sampled_box_discrepancy": self.box_discrepancy}


def flow_simulate(S, alpha, x0, boxes: Sequence[ArcBox], N: int) -> FlowReport:
    """Visit x0 + s * alpha for the first N elements s of S.

    Exact when alpha and x0 are TorusPoints (rational), float otherwise.
    """
    if N < 1:
        raise ValidationError("N must be positive")
    if isinstance(S, SetExpr):
        svals = [dict(x.free).get(0, 0) for x in islice(iterate(S, GroupDescriptor(1)), N)]
    else:
        svals = [int(s) for s in islice(iter(S), N)]
    exact = isinstance(alpha, TorusPoint) and isinstance(x0, TorusPoint)
    hits = [0] * len(boxes)
    first: List[Optional[int]] = [None] * len(boxes)
    if exact:
        pts = [x0 + alpha.scale(s) for s in svals]
        for j, box in enumerate(boxes):
            for i, p in enumerate(pts):
                if box.contains(p):
                    hits[j] += 1
                    if first[j] is None:
                        first[j] = i
        arr = np.array([[float(c) for c in p.coords] for p in pts])
        disc = float(coordinate_discrepancy(pts))
    else:
        a = alpha.as_floats() if isinstance(alpha, TorusPoint) else np.atleast_1d(np.asarray(alpha, float))
        z = x0.as_floats() if isinstance(x0, TorusPoint) else np.atleast_1d(np.asarray(x0, float))
        arr = np.mod(z[None, :] + np.array(svals, dtype=float)[:, None] * a[None, :], 1.0)
        for j, box in enumerate(boxes):
            inside = box.contains_float(arr)
            hits[j] = int(inside.sum())
            first[j] = int(np.argmax(inside)) if inside.any() else None
        disc = coordinate_discrepancy(arr)
    return FlowReport(len(svals), hits, first, disc, box_discrepancy_sampled(arr), arr)
