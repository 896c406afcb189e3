"""Acceptance suite: one test per criterion, each at its stated tolerance and
time limit.  conftest.py prints a pass/fail line per criterion."""
import math
import random
import time
from fractions import Fraction as F

import numpy as np
from sympy import primerange

from kronweyl.abelian import FREE, ZERO, GroupDescriptor
from kronweyl.equidist import (FormalReal, kronecker_independence,
                               relation_value, star_discrepancy_1d, ud_test,
                               weyl_sum)
from kronweyl.orbit import (ArcBox, Requirement, construct_dense_homomorphism,
                            find_orbit_point, requirement_net)
from kronweyl.setexpr import (Affine, AlmostTorsion, BlockStream, Finite,
                              block_stream, classify, is_infinite, normalize)
from kronweyl.zariski import closed_set, closure_oracle_prefix, zariski_closure

import oracles
from strategies import (random_bounded_group, random_group, random_leaf,
                        random_setexpr)

Z = GroupDescriptor(1)
G4 = GroupDescriptor(0, (), (4,))


def z(v):
    return Z.element(free={0: v})


def e(G, k, v=1):
    return G.element(tail={k: v})


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_1_cofinite_integers():
    rng = random.Random(1)
    infinite = []
    while len(infinite) < 50:
        X = random_setexpr(rng, Z)
        if is_infinite(X, Z):
            infinite.append(X)
    finite = [Finite(tuple(z(rng.randint(-50, 50)) for _ in range(rng.randint(0, 6))))
              for _ in range(50)]
    whole = closed_set(Z, [], [(ZERO, 0)])
    with Clock() as c:
        for X in infinite:
            assert zariski_closure(X, Z) == whole
        for X in finite:
            assert zariski_closure(X, Z) == closed_set(Z, X.elements)
    assert c.elapsed < 1.0, c.elapsed


def test_criterion_2_classification_invariants():
    rng = random.Random(2)
    violations = []
    checked = 0
    while checked < 1000:
        G = random_group(rng)
        X = random_setexpr(rng, G)
        c = classify(X, G)
        if isinstance(c, AlmostTorsion) and c.n == 1:
            violations.append(("level one", X))
        if classify(normalize(X, G), G) != c:
            violations.append(("renormalized", X))
        checked += 1
    thinned = 0
    while thinned < 300:
        G = random_bounded_group(rng)
        X = random_leaf(rng, G, torsion_only=True)
        if not isinstance(X, BlockStream):
            continue
        c = classify(X, G)
        if not isinstance(c, AlmostTorsion):
            continue
        for _ in range(3):
            Y = X.thin(rng.randint(0, 5), rng.randint(1, 4))
            if classify(Y, G) != c:
                violations.append(("thinned", X, Y))
        thinned += 1
    assert violations == []


def test_criterion_3_closure_normal_form():
    cases = [
        (block_stream(G4, ZERO, e(G4, 0)), closed_set(G4, [], [(ZERO, 4)])),
        (block_stream(G4, ZERO, e(G4, 0, 2)), closed_set(G4, [], [(ZERO, 2)])),
        (block_stream(G4, e(G4, 0), e(G4, 0, 2)), closed_set(G4, [], [(e(G4, 0), 2)])),
    ]
    with Clock() as c:
        for X, expected in cases:
            assert zariski_closure(X, G4) == expected
            for N in (32, 64):
                assert closure_oracle_prefix(X, G4, N) == expected
    assert c.elapsed < 5.0, c.elapsed


def _criterion_4_requirements():
    rng = random.Random(4)
    return [Requirement(f"box{i}", 0,
                        ArcBox.cube([F(rng.randrange(2 ** 16), 2 ** 16) for _ in range(3)], F(1, 64)))
            for i in range(20)]


def test_criterion_4_orbit_witnesses_on_first_primes():
    primes = list(primerange(2, 104730))
    assert len(primes) == 10 ** 4
    reqs = _criterion_4_requirements()
    with Clock() as c:
        x, ws = find_orbit_point(primes, reqs, 3)
    assert len(ws) == len(reqs)
    for w, r in zip(ws, reqs):
        assert w.element in primes
        margins = oracles.verify_witness_exact(w.element, x.coords, r.box.centers, r.box.radii)
        assert all(m > 0 for m in margins), (r.id, margins)
    assert c.elapsed < 5.0, c.elapsed


def test_criterion_5_torsion_level_density():
    S = block_stream(G4, ZERO, e(G4, 0))
    net = requirement_net(4, 2, 0)
    with Clock() as c:
        asg, ws = construct_dense_homomorphism(G4, [S], 2, [net])
    grid = {(F(a, 4), F(b, 4)) for a in range(4) for b in range(4)}
    assert {w.point.coords for w in ws} == grid
    for w, r in zip(ws, net):
        assert w.point.coords == r.box.centers
        assert w.point.in_torsion(4)
    for img in asg.images.values():
        assert all((4 * v) % 1 == 0 for v in img)
    assert c.elapsed < 1.0, c.elapsed


def test_criterion_6_weyl_criterion():
    N = 10 ** 4
    with Clock() as c:
        xs = np.mod(np.arange(1, N + 1) * math.sqrt(2), 1.0)
        for k in range(1, 6):
            for sign in (1, -1):
                assert weyl_sum(xs, sign * k).magnitude <= 1e-2
        assert all(r.passed for r in ud_test(xs, 5, 100))
        const = ud_test(np.full(N, 0.3), 1, 2)
        assert not any(r.passed for r in const)
    assert c.elapsed < 1.0, c.elapsed


def test_criterion_7_discrepancy_exactness():
    rng = random.Random(7)
    for _ in range(200):
        xs = [rng.random() for _ in range(rng.randint(1, 64))]
        brute = oracles.star_discrepancy_brute([F(x) for x in xs])
        assert abs(float(star_discrepancy_1d(xs)) - float(brute)) <= 1e-12
    N = 1024
    centered = [F(2 * i + 1, 2 * N) for i in range(N)]
    assert star_discrepancy_1d(centered) == F(1, 2 * N)


def _combo(rng):
    const = F(rng.randint(-4, 4), rng.randint(1, 4))
    coeffs = tuple((j, F(rng.randint(-2, 2), rng.randint(1, 3))) for j in (1, 2, 3)
                   if rng.random() < 0.6)
    return FormalReal(const, coeffs)


def test_criterion_8_kronecker_exactness():
    rng = random.Random(8)
    for _ in range(100):
        xs = [_combo(rng) for _ in range(rng.randint(1, 4))]
        rows = [[1, 0, 0, 0]]
        for x in xs:
            c = dict(x.coeffs)
            rows.append([x.const] + [c.get(j, 0) for j in (1, 2, 3)])
        expected = oracles.rank_over_q(rows) == len(rows)
        r = kronecker_independence(xs)
        assert r.dense == expected
        if not r.dense:
            assert any(r.relation)
            assert relation_value(xs, r.relation) == FormalReal()


def test_criterion_9_integer_homomorphisms():
    rng = random.Random(9)
    S = Affine(ZERO, z(1))
    for _ in range(20):
        k = rng.randint(1, 3)
        reqs = [Requirement(f"r{i}", 0, ArcBox.cube([F(rng.randrange(256), 256) for _ in range(k)],
                                                  F(1, rng.choice([8, 32, 128]))))
                for i in range(rng.randint(1, 8))]
        x, _ = find_orbit_point(S, reqs, k)
        asg, _ = construct_dense_homomorphism(Z, [S], k, [reqs])
        assert asg.images[(FREE, 0)] == x.coords
        assert asg.image(z(1)) == x.coords
