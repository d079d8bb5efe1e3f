"""Independent reference computations used to derive the frozen test values.

Nothing here imports the package's numerical code: the routines work from
plain generator/offset data in mpmath arithmetic, brute-force lattice scans
and exact rationals.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import gcd

import mpmath as mp

CP1 = {"V": [(1,), (-1,)], "lam": (0, 1), "cones": [(0,), (1,)]}
CP2 = {"V": [(1, 0), (0, 1), (-1, -1)], "lam": (0, 0, 1), "cones": [(0, 1), (1, 2), (2, 0)]}
P1XP1 = {"V": [(1, 0), (0, 1), (-1, 0), (0, -1)], "lam": (0, 0, 1, 1),
         "cones": [(0, 1), (1, 2), (2, 3), (3, 0)]}
HIRZ1 = {"V": [(1, 0), (0, 1), (-1, 1), (0, -1)], "lam": (0, 0, 2, 1),
         "cones": [(0, 1), (1, 2), (2, 3), (3, 0)]}


def facet_value(geo, i, u):
    return sum(a * b for a, b in zip(u, geo["V"][i])) + geo["lam"][i]


def brute_lattice_points(geo, span=6):
    n = len(geo["V"][0])
    pts = []
    for u in itertools.product(range(-span, span + 1), repeat=n):
        if all(facet_value(geo, i, u) >= 0 for i in range(len(geo["V"]))):
            pts.append(u)
    return sorted(pts)


def brute_vertices(geo):
    """Intersect every n-subset of facet hyperplanes (exact rationals)."""
    n = len(geo["V"][0])
    verts = set()
    for rows in itertools.combinations(range(len(geo["V"])), n):
        if n == 1:
            a = Fraction(geo["V"][rows[0]][0])
            x = (Fraction(-geo["lam"][rows[0]]) / a,)
        else:
            (a, b), (c, d) = geo["V"][rows[0]], geo["V"][rows[1]]
            det = Fraction(a * d - b * c)
            if det == 0:
                continue
            r0, r1 = -geo["lam"][rows[0]], -geo["lam"][rows[1]]
            x = (Fraction(r0 * d - b * r1) / det, Fraction(a * r1 - r0 * c) / det)
        if all(sum(Fraction(p) * q for p, q in zip(geo["V"][i], x)) + geo["lam"][i] >= 0
               for i in range(len(geo["V"]))):
            verts.add(x)
    return sorted(verts)


def phi(geo, xi, dps=50):
    with mp.workdps(dps):
        return mp.log(sum(mp.e ** (2 * mp.fsum(mp.mpf(a) * b for a, b in zip(u, xi)))
                          for u in brute_lattice_points(geo))) / 2


def guillemin(geo, a, xi):
    """``-1/2 sum_i a_i log(sum_u l_i(u) e^{2<u,xi>} / sum_u e^{2<u,xi>})``.

    Runs at the caller's working precision (``mp.diff`` raises it internally).
    """
    pts = brute_lattice_points(geo)
    w = [mp.e ** (2 * mp.fsum(mp.mpf(p) * q for p, q in zip(u, xi))) for u in pts]
    total = mp.fsum(w)
    out = mp.mpf(0)
    for i, a_i in enumerate(a):
        if a_i:
            num = mp.fsum(facet_value(geo, i, u) * wu for u, wu in zip(pts, w))
            out += a_i * mp.log(num / total)
    return -out / 2


def guillemin_directional(geo, a, xi, v, dps=60):
    """``<dg, v>`` at ``xi`` by mpmath differentiation along ``v``."""
    with mp.workdps(dps):
        return mp.diff(lambda s: guillemin(geo, a, [x + s * c for x, c in zip(xi, v)]), 0)


def condition1_limit(geo, a, cone, k, frozen=None, t=-25, dps=80):
    """``2 e^{-2t}(<dg, v_k> + a_k)`` far out along the cone, in high precision.

    At ``t = -25`` the neglected ``e^{2t}`` correction is below ``1e-21``.
    """
    n = len(geo["V"][0])
    frozen = frozen or [0] * (n - 1)
    with mp.workdps(dps):
        ts, it = [], iter(frozen)
        for m in range(n):
            ts.append(mp.mpf(t) if m == k else mp.mpf(next(it)))
        xi = [mp.fsum(ts[m] * geo["V"][cone[m]][j] for m in range(n)) for j in range(n)]
        vk = geo["V"][cone[k]]
        d = guillemin_directional(geo, a, xi, vk, dps)
        return 2 * mp.e ** (-2 * ts[k]) * (d + a[cone[k]])


def lattice_length(p, q):
    """Lattice length of the segment ``pq`` between two lattice points."""
    return Fraction(gcd(int(q[0] - p[0]), int(q[1] - p[1])))


def topological_slope(geo, a):
    """``sum_k a_k vol_lat(F_k) / Vol(P)`` in exact rationals."""
    verts = brute_vertices(geo)
    n = len(geo["V"][0])
    if n == 1:
        vol = max(verts)[0] - min(verts)[0]
        return Fraction(sum(a)) / vol
    # order the vertices around the polygon by angle from the centroid
    cx = sum(v[0] for v in verts) / len(verts)
    cy = sum(v[1] for v in verts) / len(verts)
    ring = sorted(verts, key=lambda v: mp.atan2(float(v[1] - cy), float(v[0] - cx)))
    area = Fraction(0)
    for p, q in zip(ring, ring[1:] + ring[:1]):
        area += p[0] * q[1] - q[0] * p[1]
    area = abs(area) / 2
    total = Fraction(0)
    for i, a_i in enumerate(a):
        on = [v for v in verts if facet_value(geo, i, v) == 0]
        total += a_i * lattice_length(on[0], on[1])
    return total / area
