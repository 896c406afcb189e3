"""Point search for orbit requirements over a finite list of integers.

The nested construction in ``orbit.find_orbit_point`` needs every new
element to be about 1/radius times larger than the previous one, so a
truncated stream runs out after a handful of boxes.  This module searches
the torus directly instead.

Dyadic cells are refined level by level (every coordinate halved at each
level) and ranked by an estimate of the fraction of the cell that satisfies
all boxes.  An element s is *resolved* for a cell once s times the cell
width drops below ``RESOLVE``; before that, s*x is treated as uniform on the
torus.  For a resolved s the exact fraction of the cell that s maps into a
box is a product of one-dimensional overlaps.  Treating elements as
independent, a box is missed with probability

    prod over resolved s of (1 - f_s)  *  (1 - vol)^(#unresolved)

and the cell's score is the sum over boxes of log(1 - miss).  A box is
settled for a cell once some s maps the whole cell inside it.  The search
stops at the first cell with every box settled.

Only (cell, box, element) triples with a positive overlap are carried to
the next level, so the bookkeeping shrinks as cells get small.  The beam
width at each level is set by a work budget rather than a fixed count:
narrow while many elements are still being resolved, wide near the end
where the surviving cells are cheap.

Floating point only ranks cells.  The caller re-checks the answer exactly.
"""
from __future__ import annotations

from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

EPS = 1e-9
RESOLVE = 0.125      # an element is resolved once |s| * width < RESOLVE
FRESH_WEIGHT = 5     # work charged per cell for each element resolved next level
MAX_ABS = 2 ** 31    # larger elements lose too much precision in float64


def _arc_cdf(t, a0, w):
    # measure of [0, t) inside the periodic arc [a0, a0 + w) mod 1
    fl = np.floor(t)
    y = t - fl
    return fl * w + np.clip(y - a0, 0, w) + np.maximum(0, np.minimum(y, a0 + w - 1))


def _overlap(s, u, d, a0, w):
    """Fraction of [u, u + d) that x -> s x maps into the arc."""
    return (_arc_cdf(s * (u + d), a0, w) - _arc_cdf(s * u, a0, w)) / (s * d)


def _box_grid(c, r, reach, g):
    """CSR lists of the boxes within r + reach of each cell of a g^k grid."""
    J, k = c.shape
    mids = (np.arange(g) + 0.5) / g
    hit = np.ones((J,) + (g,) * k, bool)
    for i in range(k):
        dist = np.abs(mids[None, :] - c[:, i:i + 1])
        near = np.minimum(dist, 1 - dist) <= (r[:, i] + reach + 0.5 / g)[:, None]
        shape = [J] + [1] * k
        shape[1 + i] = g
        hit &= near.reshape(shape)
    cells, boxes = np.nonzero(hit.reshape(J, -1).T)
    return np.searchsorted(cells, np.arange(g ** k + 1)), boxes


def search_cells(values: Sequence[int], centers, radii, work: float = 3e6,
                 max_level: int = 48):
    """Candidate points for the boxes (centers[j], radii[j]) in T^k.

    Yields (x, chosen) pairs: x is the midpoint of a cell, as a tuple of
    Fractions, and chosen[j] an element that maps the whole cell into box j
    according to the float computation.  Stops after the last level or when
    every cell has some box that no element can still reach.
    """
    vals = sorted({int(v) for v in values if 0 < abs(int(v)) < MAX_ABS}, key=lambda v: (abs(v), v))
    S = np.array(vals, dtype=float)
    A = np.abs(S)
    c = np.array([[float(v) for v in row] for row in centers])
    r = np.array([[float(v) for v in row] for row in radii])
    J, k = c.shape
    a0 = np.mod(c - r, 1.0)
    w = 2 * r
    log_stay = np.log1p(-np.minimum(np.prod(w, axis=1), 1 - 1e-15))
    kids = 2 ** k
    offs = np.array([[(b >> i) & 1 for i in range(k)] for b in range(kids)], dtype=np.int64)
    grid = max(1, int(round(2 ** (15 / k))))

    lo = np.zeros((1, k), dtype=np.int64)
    settled = np.zeros((1, J), bool)
    chosen = np.zeros((1, J))
    # boxes holding the origin are hit by s = 0 if the list has it
    if any(int(v) == 0 for v in values):
        origin = np.all(np.minimum(np.abs(c), 1 - np.abs(c)) < r, axis=1)
        settled[0, origin] = True
    pc = np.zeros(0, np.int64)
    pj = np.zeros(0, np.int64)
    ps = np.zeros(0)
    nres = 0
    for m in range(1, max_level):
        d = 2.0 ** -m
        dp = 2 * d
        C = len(lo)
        upto = int(np.searchsorted(A, RESOLVE / d))
        fresh, fabs = S[nres:upto], A[nres:upto]
        nres = upto
        if len(fresh):
            # image centers of every (cell, fresh element), matched to nearby boxes
            fc = np.repeat(np.arange(C), len(fresh))
            fs = np.tile(fresh, C)
            T = fs[:, None] * (lo[fc] * dp + dp / 2)
            T -= np.floor(T)
            starts, members = _box_grid(c, r, float(fabs[-1]) * dp / 2, grid)
            gi = np.minimum((T * grid).astype(np.int64), grid - 1)
            flat = np.ravel_multi_index(tuple(gi.T), (grid,) * k)
            cnt = starts[flat + 1] - starts[flat]
            rep = np.repeat(np.arange(len(flat)), cnt)
            pos = np.arange(len(rep)) - np.repeat(np.cumsum(cnt) - cnt, cnt) + starts[flat][rep]
            fj = members[pos]
            fc, fs, T = fc[rep], fs[rep], T[rep]
            half = np.abs(fs) * dp / 2
            ok = ~settled[fc, fj]
            for i in range(k):
                dist = np.abs(T[:, i] - c[fj, i])
                ok &= np.minimum(dist, 1 - dist) < r[fj, i] + half
            pc = np.concatenate([pc, fc[ok]])
            pj = np.concatenate([pj, fj[ok]])
            ps = np.concatenate([ps, fs[ok]])

        lo2 = (lo[:, None, :] * 2 + offs[None]).reshape(-1, k)
        settled2 = np.repeat(settled, kids, axis=0)
        chosen2 = np.repeat(chosen, kids, axis=0)
        # per coordinate only the two halves of the parent differ
        g = np.ones((len(pc), kids))
        for i in range(k):
            base = lo[pc, i] * 2
            f0 = np.clip(_overlap(ps, base * d, d, a0[pj, i], w[pj, i]), 0, 1)
            f1 = np.clip(_overlap(ps, (base + 1) * d, d, a0[pj, i], w[pj, i]), 0, 1)
            g *= np.where(offs[None, :, i] == 1, f1[:, None], f0[:, None])
        qc = (pc[:, None] * kids + np.arange(kids)[None]).ravel()
        qj = np.repeat(pj, kids)
        qs = np.repeat(ps, kids)
        g = g.ravel()
        full = g >= 1 - EPS
        settled2[qc[full], qj[full]] = True
        chosen2[qc[full], qj[full]] = qs[full]
        keep = (g > 0) & ~settled2[qc, qj]
        qc, qj, qs, g = qc[keep], qj[keep], qs[keep], g[keep]

        C2 = len(lo2)
        miss = np.bincount(qc * J + qj, weights=np.log1p(-np.minimum(g, 1 - 1e-15)),
                           minlength=C2 * J).reshape(C2, J)
        miss = miss + (len(S) - nres) * log_stay[None, :]
        with np.errstate(divide="ignore"):
            logp = np.where(settled2, 0.0, np.log(-np.expm1(np.minimum(miss, 0))))
        score = logp.sum(axis=1)
        alive = np.flatnonzero(np.isfinite(score))
        for ci in alive[settled2[alive].all(axis=1)]:
            x = tuple(Fraction(2 * int(l) + 1, 2 ** (m + 1)) for l in lo2[ci])
            yield x, [int(v) for v in chosen2[ci]]
        if not len(alive):
            return

        order = alive[np.argsort(-score[alive], kind="stable")]
        upcoming = int(np.searchsorted(A, RESOLVE / (d / 2))) - nres
        # each kept cell pays for its pairs, the next fresh elements and its
        # children's dense score rows
        cost = np.bincount(qc, minlength=C2)[order] + FRESH_WEIGHT * upcoming + kids * J
        width = max(1, int(np.searchsorted(np.cumsum(cost), work, side="right")))
        sel = order[:width]
        remap = np.full(C2, -1)
        remap[sel] = np.arange(len(sel))
        kept = remap[qc] >= 0
        pc, pj, ps = remap[qc[kept]], qj[kept], qs[kept]
        lo, settled, chosen = lo2[sel], settled2[sel], chosen2[sel]


def find_point(values: Sequence[int], boxes, work: float = 3e6,
               retries: int = 1) -> Optional[Tuple[Tuple[Fraction, ...], List[int]]]:
    """(x, chosen) with chosen[j] * x inside boxes[j], checked exactly, or None.

    ``boxes`` are ArcBox-like objects with ``centers``, ``radii`` and an
    exact ``contains``.  Each retry multiplies the work budget by 4.
    """
    if not boxes:
        return None
    centers = [b.centers for b in boxes]
    radii = [b.radii for b in boxes]
    for attempt in range(retries + 1):
        for x, chosen in search_cells(values, centers, radii, work * 4 ** attempt):
            if all(b.contains([s * v for v in x]) for s, b in zip(chosen, boxes)):
                return x, chosen
    return None
