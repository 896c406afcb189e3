"""Random groups, elements and set expressions for property tests."""
from hypothesis import strategies as st

from kronweyl.abelian import GroupDescriptor
from kronweyl.setexpr import (Affine, Finite, Translate, Union,
                              block_stream)

SMALL_ORDERS = [2, 3, 4, 6]


@st.composite
def bounded_groups(draw, max_exp=12, need_tail=False):
    while True:
        fin = tuple(draw(st.lists(st.sampled_from(SMALL_ORDERS), max_size=2)))
        tail = tuple(draw(st.lists(st.sampled_from(SMALL_ORDERS), min_size=1 if need_tail else 0, max_size=2)))
        G = GroupDescriptor(0, fin, tail)
        if G.exponent <= max_exp:
            return G


@st.composite
def groups(draw):
    free = draw(st.integers(0, 2))
    G = draw(bounded_groups())
    return GroupDescriptor(free, G.finite_orders, G.tail_pattern)


@st.composite
def elements(draw, G, width=4, tail_span=6, allow_free=True):
    free = {}
    if allow_free and G.free_rank:
        for i in range(G.free_rank):
            free[i] = draw(st.integers(-5, 5))
    fin = {i: draw(st.integers(0, q - 1)) for i, q in enumerate(G.finite_orders)}
    tail = {}
    if G.has_tail:
        idx = draw(st.lists(st.integers(0, tail_span), max_size=width, unique=True))
        tail = {i: draw(st.integers(0, G.tail_order(i) - 1)) for i in idx}
    return G.element(free, fin, tail)


def random_element(rng, G, tail_span=6, allow_free=True, width=3):
    free = {i: rng.randint(-5, 5) for i in range(G.free_rank)} if allow_free else {}
    fin = {i: rng.randrange(q) for i, q in enumerate(G.finite_orders)}
    tail = {}
    if G.has_tail:
        for i in rng.sample(range(tail_span + 1), rng.randint(0, width)):
            tail[i] = rng.randrange(G.tail_order(i))
    return G.element(free, fin, tail)


def random_template(rng, G):
    p = G.period
    step = p * rng.randint(1, 2)
    vals = {i: rng.randrange(G.tail_order(i)) for i in range(step) if rng.random() < 0.7}
    return G.element(tail=vals), step


def random_leaf(rng, G, torsion_only=False):
    kinds = ["finite"]
    if G.has_tail:
        kinds += ["blocks", "blocks"]
    if G.free_rank and not torsion_only:
        kinds += ["affine"]
    kind = rng.choice(kinds)
    if kind == "finite":
        return Finite(tuple(random_element(rng, G, allow_free=not torsion_only)
                            for _ in range(rng.randint(0, 3))))
    if kind == "affine":
        return Affine(random_element(rng, G), random_element(rng, G))
    c = random_element(rng, G, allow_free=not torsion_only)
    u, step = random_template(rng, G)
    return block_stream(G, c, u, step=step)


def random_setexpr(rng, G, depth=2, torsion_only=False):
    r = rng.random()
    if depth == 0 or r < 0.5:
        return random_leaf(rng, G, torsion_only)
    if r < 0.7:
        return Translate(random_element(rng, G, allow_free=not torsion_only),
                         random_setexpr(rng, G, depth - 1, torsion_only))
    return Union(tuple(random_setexpr(rng, G, depth - 1, torsion_only)
                       for _ in range(rng.randint(1, 3))))


def random_bounded_group(rng, max_exp=12, need_tail=True):
    while True:
        fin = tuple(rng.choice(SMALL_ORDERS) for _ in range(rng.randint(0, 2)))
        tail = tuple(rng.choice(SMALL_ORDERS + [5]) for _ in range(rng.randint(1 if need_tail else 0, 2)))
        G = GroupDescriptor(0, fin, tail)
        if G.exponent <= max_exp:
            return G


def random_group(rng, max_exp=12):
    G = random_bounded_group(rng, max_exp, need_tail=rng.random() < 0.8)
    return GroupDescriptor(rng.choice([0, 0, 1]), G.finite_orders, G.tail_pattern)


seeds = st.integers(0, 2 ** 32 - 1)
