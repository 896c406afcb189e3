"""Equidistribution on finite-dimensional tori.

Rational independence is decided exactly over formal irrational symbols;
Weyl sums and discrepancies are floating point with compensated summation
and an explicit error bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError

EPS = 2.0 ** -52

# default numeric values for formal symbols 1, 2, 3, ...; later symbols use
# square roots of the following primes
_DEFAULT_RADICANDS = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


def parse_rational(s) -> Fraction:
    """Exact rational from an int, Fraction or "p/q" / decimal string."""
    if isinstance(s, Fraction):
        return s
    if isinstance(s, bool):
        raise ValidationError("booleans are not rationals")
    if isinstance(s, int):
        return Fraction(s)
    if isinstance(s, str):
        try:
            return Fraction(s.strip())
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"not a rational: {s!r}") from None
    raise ValidationError(f"rationals must be given as strings, got {s!r}")


def rational_str(x: Fraction) -> str:
    return str(Fraction(x))


# ---------------------------------------------------------------------------
# torus points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusPoint:
    """A point of the d-torus with exact rational coordinates in [0, 1)."""

    coords: Tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(Fraction(c) % 1 for c in self.coords))

    @classmethod
    def zero(cls, d: int) -> "TorusPoint":
        return cls((Fraction(0),) * d)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def in_torsion(self, n: int) -> bool:
        """Membership in the n-torsion subgroup T[n]^d (n >= 1)."""
        return all(n % c.denominator == 0 for c in self.coords)

    def __add__(self, other: "TorusPoint") -> "TorusPoint":
        return TorusPoint(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: "TorusPoint") -> "TorusPoint":
        return TorusPoint(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def scale(self, k: int) -> "TorusPoint":
        return TorusPoint(tuple(k * a for a in self.coords))

    def as_floats(self) -> np.ndarray:
        return np.array([float(c) for c in self.coords])

    def to_json(self) -> List[str]:
        return [rational_str(c) for c in self.coords]

    @classmethod
    def from_json(cls, obj) -> "TorusPoint":
        if not isinstance(obj, list):
            raise ValidationError("a torus point is a list of rational strings")
        return cls(tuple(parse_rational(c) for c in obj))


# ---------------------------------------------------------------------------
# formal reals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FormalReal:
    """const + sum_j coeff_j * beta_j with rational coefficients.

    The symbols beta_1, beta_2, ... are treated as linearly independent over
    the rationals together with 1.
    """

    const: Fraction = Fraction(0)
    coeffs: Tuple[Tuple[int, Fraction], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "const", Fraction(self.const))
        acc: Dict[int, Fraction] = {}
        for j, c in self.coeffs:
            if int(j) < 1:
                raise ValidationError("symbols are numbered from 1")
            acc[int(j)] = acc.get(int(j), Fraction(0)) + Fraction(c)
        object.__setattr__(self, "coeffs", tuple(sorted((j, c) for j, c in acc.items() if c)))

    @classmethod
    def symbol(cls, j: int, coeff=1, const=0) -> "FormalReal":
        return cls(Fraction(const), ((j, Fraction(coeff)),))

    @classmethod
    def lift(cls, x) -> "FormalReal":
        return x if isinstance(x, FormalReal) else cls(Fraction(x))

    def symbols(self) -> Tuple[int, ...]:
        return tuple(j for j, _ in self.coeffs)

    def is_rational(self) -> bool:
        return not self.coeffs

    def __add__(self, other) -> "FormalReal":
        o = FormalReal.lift(other)
        return FormalReal(self.const + o.const, self.coeffs + o.coeffs)

    __radd__ = __add__

    def __neg__(self) -> "FormalReal":
        return FormalReal(-self.const, tuple((j, -c) for j, c in self.coeffs))

    def __sub__(self, other) -> "FormalReal":
        return self + (-FormalReal.lift(other))

    def __mul__(self, k) -> "FormalReal":
        k = Fraction(k)
        return FormalReal(self.const * k, tuple((j, c * k) for j, c in self.coeffs))

    __rmul__ = __mul__

    def mod1(self) -> "FormalReal":
        """Reduce the rational constant into [0, 1)."""
        return FormalReal(self.const % 1, self.coeffs)

    def evaluate(self, values: Optional[Mapping[int, float]] = None) -> float:
        vals = dict(values or {})
        total = [float(self.const)]
        for j, c in self.coeffs:
            if j not in vals:
                if j > len(_DEFAULT_RADICANDS):
                    raise ValidationError(f"no numeric value for symbol {j}")
                vals[j] = math.sqrt(_DEFAULT_RADICANDS[j - 1])
            total.append(float(c) * vals[j])
        return math.fsum(total)

    def to_json(self) -> dict:
        return {"const": rational_str(self.const),
                "coeffs": {str(j): rational_str(c) for j, c in self.coeffs}}

    @classmethod
    def from_json(cls, obj) -> "FormalReal":
        if isinstance(obj, (str, int)):
            return cls(parse_rational(obj))
        if not isinstance(obj, Mapping) or set(obj) - {"const", "coeffs"}:
            raise ValidationError(f"bad formal real {obj!r}")
        coeffs = tuple((int(j), parse_rational(c)) for j, c in obj.get("coeffs", {}).items())
        return cls(parse_rational(obj.get("const", "0")), coeffs)

    def __str__(self) -> str:
        parts = [str(self.const)] if self.const or not self.coeffs else []
        parts += [f"{c}*b{j}" for j, c in self.coeffs]
        return " + ".join(parts)


def _nullspace(rows: List[List[Fraction]]) -> Tuple[int, List[List[Fraction]]]:
    """Rank and a nullspace basis of a rational matrix (right kernel)."""
    m = [list(r) for r in rows]
    ncols = len(m[0]) if m else 0
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    basis = []
    for free in (c for c in range(ncols) if c not in pivots):
        v = [Fraction(0)] * ncols
        v[free] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -m[i][free]
        basis.append(v)
    return r, basis


def _primitive(v: Sequence[Fraction]) -> Tuple[int, ...]:
    den = 1
    for x in v:
        den = den * x.denominator // math.gcd(den, x.denominator)
    ints = [int(x * den) for x in v]
    g = 0
    for x in ints:
        g = math.gcd(g, x)
    ints = [x // g for x in ints]
    # sign convention: the first nonzero coefficient on an input is positive
    first = next((x for x in ints[1:] if x), ints[0])
    return tuple(-x for x in ints) if first < 0 else tuple(ints)


@dataclass(frozen=True)
class IndependenceResult:
    dense: bool
    relation: Optional[Tuple[int, ...]]

    def to_json(self) -> dict:
        return {"dense": self.dense, "relation": list(self.relation) if self.relation else None}


def kronecker_independence(xs: Sequence) -> IndependenceResult:
    """Decide whether 1, x_1, ..., x_d are linearly independent over Q.

    When they are not, one primitive integer relation (m_0, m_1, ..., m_d)
    with m_0 + sum m_i x_i = 0 is returned.
    """
    xs = [FormalReal.lift(x) for x in xs]
    if not xs:
        raise ValidationError("need at least one number")
    syms = sorted({j for x in xs for j in x.symbols()})
    vectors = [[Fraction(1)] + [Fraction(0)] * len(syms)]
    for x in xs:
        c = dict(x.coeffs)
        vectors.append([x.const] + [c.get(j, Fraction(0)) for j in syms])
    # a relation is a vector m with sum_i m_i * vectors[i] = 0
    cols = [[vectors[i][j] for i in range(len(vectors))] for j in range(len(syms) + 1)]
    rank, basis = _nullspace(cols)
    if not basis:
        return IndependenceResult(True, None)
    return IndependenceResult(False, _primitive(basis[0]))


def relation_value(xs: Sequence, relation: Sequence[int]) -> FormalReal:
    """m_0 + sum m_i x_i as an exact formal real."""
    total = FormalReal(Fraction(relation[0]))
    for m, x in zip(relation[1:], xs):
        total = total + FormalReal.lift(x) * m
    return total


# ---------------------------------------------------------------------------
# Weyl sums
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeylSum:
    magnitude: float
    phase: float
    bound: float
    n: int


def _as_array(points) -> Tuple[Optional[List[Tuple[Fraction, ...]]], np.ndarray]:
    """Split input into an exact list (if every coordinate is rational) and a
    float array of shape (N, d)."""
    pts = list(points) if not isinstance(points, np.ndarray) else points
    if isinstance(pts, np.ndarray):
        arr = np.asarray(pts, dtype=float)
        return None, arr.reshape(len(arr), -1)
    if not pts:
        raise ValidationError("empty point list")
    exact = []
    for p in pts:
        if isinstance(p, TorusPoint):
            exact.append(p.coords)
        elif isinstance(p, (Fraction, int)) and not isinstance(p, bool):
            exact.append((Fraction(p),))
        elif isinstance(p, (tuple, list)) and all(isinstance(c, (Fraction, int)) for c in p):
            exact.append(tuple(Fraction(c) for c in p))
        else:
            exact = None
            break
    if exact is not None:
        arr = np.array([[float(c) for c in p] for p in exact], dtype=float)
        return exact, arr
    arr = np.array([p.as_floats() if isinstance(p, TorusPoint) else np.atleast_1d(np.asarray(p, dtype=float))
                    for p in pts], dtype=float)
    return None, arr.reshape(len(arr), -1)


def _phases(points, k: Sequence[int]) -> Tuple[np.ndarray, float]:
    """Fractional parts of k.x_j and an absolute error bound on them."""
    exact, arr = _as_array(points)
    if arr.shape[0] == 0:
        raise ValidationError("empty point list")
    k = [int(v) for v in np.atleast_1d(k)]
    if len(k) != arr.shape[1]:
        raise ValidationError(f"character of dimension {len(k)} on points of dimension {arr.shape[1]}")
    if exact is not None:
        t = np.array([float(sum(kk * c for kk, c in zip(k, p)) % 1) for p in exact])
        return t, EPS
    dot = arr @ np.array(k, dtype=float)
    t = np.mod(dot, 1.0)
    scale = float(np.max(np.abs(arr)) if arr.size else 0.0) * sum(abs(v) for v in k)
    return t, (scale + 1.0) * EPS * 2


def weyl_sum(points, k) -> WeylSum:
    """Normalized Weyl sum |(1/N) sum_j exp(2 pi i k.x_j)| with its phase."""
    t, dt = _phases(points, k)
    n = len(t)
    ang = 2 * np.pi * t
    re = math.fsum(np.cos(ang)) / n
    im = math.fsum(np.sin(ang)) / n
    # per-term phase error 2*pi*dt plus a few ulps from cos/sin and the division
    bound = 2 * math.pi * dt + 4 * EPS
    return WeylSum(math.hypot(re, im), math.atan2(im, re), bound, n)


def characters(d: int, k_max: int) -> List[Tuple[int, ...]]:
    """All non-trivial integer vectors k with |k|_inf <= k_max."""
    rng = range(-k_max, k_max + 1)
    return [k for k in product(rng, repeat=d) if any(k)]


@dataclass(frozen=True)
class UDRow:
    k: Tuple[int, ...]
    magnitude: float
    bound: float
    passed: bool

    def to_json(self) -> dict:
        return {"k": list(self.k), "magnitude": self.magnitude, "bound": self.bound,
                "pass": self.passed}


def ud_test(prefix, k_max: int, m: int) -> List[UDRow]:
    """Check |(1/N) sum chi_k(x_j)| <= 1/m for every non-trivial |k|_inf <= k_max."""
    if k_max < 1 or m < 1:
        raise ValidationError("k_max and m must be positive")
    _, arr = _as_array(prefix)
    rows = []
    for k in characters(arr.shape[1], k_max):
        w = weyl_sum(prefix, k)
        mag = min(w.magnitude, 1.0)
        rows.append(UDRow(k, mag, w.bound, mag <= 1.0 / m))
    return rows


# ---------------------------------------------------------------------------
# discrepancy
# ---------------------------------------------------------------------------

def star_discrepancy_1d(points):
    """Star discrepancy sup_t |#{x_i < t}/N - t| of points in [0, 1).

    Exact (a Fraction) when every input is rational, a float otherwise.
    Input order does not matter.
    """
    pts = list(points)
    if not pts:
        raise ValidationError("empty point list")
    exact = all(isinstance(x, (Fraction, int)) and not isinstance(x, bool) for x in pts)
    if exact:
        xs = sorted(Fraction(x) for x in pts)
        one = Fraction(1)
    else:
        xs = sorted(float(x) for x in pts)
        one = 1.0
    if xs[0] < 0 or xs[-1] >= 1:
        raise ValidationError("points must lie in [0, 1)")
    n = len(xs)
    worst = max(abs(x - one * (2 * i + 1) / (2 * n)) for i, x in enumerate(xs))
    return one / (2 * n) + worst


def coordinate_discrepancy(points) -> float:
    """Average of the 1-D star discrepancies of the coordinates."""
    exact, arr = _as_array(points)
    if exact is not None:
        cols = list(zip(*exact))
        vals = [star_discrepancy_1d(c) for c in cols]
        return sum(vals, Fraction(0)) / len(vals)
    return float(np.mean([star_discrepancy_1d(arr[:, j]) for j in range(arr.shape[1])]))


def _radical_inverse(i: int, base: int) -> float:
    out, f = 0.0, 1.0 / base
    while i:
        i, r = divmod(i, base)
        out += r * f
        f /= base
    return out


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def halton(n: int, d: int) -> np.ndarray:
    """First n points (starting at index 1) of the Halton sequence in [0,1)^d."""
    if d > len(_PRIMES):
        raise ValidationError("dimension too large for the built-in probe grid")
    return np.array([[_radical_inverse(i, _PRIMES[j]) for j in range(d)]
                     for i in range(1, n + 1)])


def box_discrepancy_sampled(points, n_boxes: int = 4096) -> float:
    """max over anchored probe boxes [0, t) of |fraction inside - volume|.

    The probe corners t come from a Halton sequence, so this is a lower
    bound on the true star discrepancy, not the discrepancy itself.
    """
    _, arr = _as_array(points)
    arr = np.mod(arr, 1.0)
    probes = halton(n_boxes, arr.shape[1])
    worst = 0.0
    for chunk in np.array_split(probes, max(1, n_boxes // 256)):
        inside = np.all(arr[None, :, :] < chunk[:, None, :], axis=2).mean(axis=1)
        worst = max(worst, float(np.max(np.abs(inside - np.prod(chunk, axis=1)))))
    return worst


def reorder_uniform(points) -> List[int]:
    """Greedy permutation: each step appends the point that minimizes the
    star discrepancy of the prefix (coordinate average when d > 1).  Ties go
    to the earliest input position."""
    exact, arr = _as_array(points)
    rows = exact if exact is not None else [tuple(r) for r in arr]
    if len(set(rows)) != len(rows):
        raise ValidationError("duplicate points")
    d = len(rows[0])
    order: List[int] = []
    left = list(range(len(rows)))
    while left:
        best = None
        for i in left:
            trial = [rows[j] for j in order] + [rows[i]]
            score = sum((star_discrepancy_1d([p[c] for p in trial]) for c in range(d)),
                        Fraction(0) if exact is not None else 0.0)
            if best is None or score < best[0]:
                best = (score, i)
        order.append(best[1])
        left.remove(best[1])
    return order
