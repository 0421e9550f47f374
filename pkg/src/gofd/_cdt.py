"""Incremental constrained Delaunay triangulation.

Bowyer-Watson insertion inside a large enclosing triangle, points taken in
Hilbert-curve order, then each constraint segment is forced in by flipping
the edges that cross it and the Delaunay property is restored around the new
edges. All geometric decisions go through the exact predicates.

Triangles are stored as vertex triples ``tv[t]`` (counterclockwise) and
neighbour triples ``tn[t]`` where ``tn[t][i]`` is across the edge opposite
``tv[t][i]`` (-1 on the hull).
"""

from collections import deque

import numpy as np

from .exceptions import ConstraintUnsatisfiable, DegenerateInput
from .predicates import incircle, orient


def hilbert_order(points, bits=16):
    """Stable permutation sorting ``points`` along a Hilbert curve."""
    pts = np.asarray(points, dtype=float)
    lo = pts.min(axis=0)
    span = float(np.max(pts.max(axis=0) - lo)) or 1.0
    side = 1 << bits
    q = np.minimum(((pts - lo) / span * (side - 1)).round().astype(np.int64), side - 1)
    x, y = q[:, 0].copy(), q[:, 1].copy()
    d = np.zeros(len(pts), dtype=np.int64)
    s = side >> 1
    while s > 0:
        rx = (x & s) > 0
        ry = (y & s) > 0
        d += s * s * ((3 * rx) ^ ry)
        # rotate the quadrant
        flip = ~ry
        swap_r = flip & rx
        x = np.where(swap_r, side - 1 - x, x)
        y = np.where(swap_r, side - 1 - y, y)
        x, y = np.where(flip, y, x), np.where(flip, x, y)
        s >>= 1
    return np.argsort(d, kind="stable")


class _Builder:
    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        n = len(pts)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        c = 0.5 * (lo + hi)
        D = float(max(hi - lo)) or 1.0
        big = 64.0 * D
        sup = [(c[0] - big, c[1] - big), (c[0] + big, c[1] - big), (c[0], c[1] + big)]
        self.n = n
        self.x = [float(v) for v in pts[:, 0]] + [p[0] for p in sup]
        self.y = [float(v) for v in pts[:, 1]] + [p[1] for p in sup]
        self.tv = [[n, n + 1, n + 2]]
        self.tn = [[-1, -1, -1]]
        self.alive = [True]
        self.vt = [-1] * (n + 3)
        self.vt[n] = self.vt[n + 1] = self.vt[n + 2] = 0
        self.free = []
        self.last = 0

    # -- helpers -------------------------------------------------------
    def _orient(self, a, b, c):
        x, y = self.x, self.y
        return orient(x[a], y[a], x[b], y[b], x[c], y[c])

    def _incircle(self, t, d):
        a, b, c = self.tv[t]
        x, y = self.x, self.y
        return incircle(x[a], y[a], x[b], y[b], x[c], y[c], x[d], y[d])

    def _new_triangle(self, verts, nbrs):
        if self.free:
            t = self.free.pop()
            self.tv[t] = verts
            self.tn[t] = nbrs
            self.alive[t] = True
        else:
            t = len(self.tv)
            self.tv.append(verts)
            self.tn.append(nbrs)
            self.alive.append(True)
        return t

    def _locate(self, px, py):
        x, y, tv, tn = self.x, self.y, self.tv, self.tn
        t = self.last
        if not self.alive[t]:
            t = next(i for i, a in enumerate(self.alive) if a)
        start = 0
        while True:
            v = tv[t]
            for r in range(3):
                i = (start + r) % 3
                a, b = v[(i + 1) % 3], v[(i + 2) % 3]
                if orient(x[a], y[a], x[b], y[b], px, py) < 0:
                    t = tn[t][i]
                    start = i + 1  # avoid stepping straight back
                    break
            else:
                return t

    # -- insertion -----------------------------------------------------
    def insert(self, p):
        x, y, tv, tn = self.x, self.y, self.tv, self.tn
        px, py = x[p], y[p]
        t0 = self._locate(px, py)
        for v in tv[t0]:
            if x[v] == px and y[v] == py:
                raise DegenerateInput("duplicate point %d at (%r, %r)" % (p, px, py))
        cavity = [t0]
        in_cav = {t0}
        seen = {t0}
        stack = [t0]
        while stack:
            t = stack.pop()
            for nb in tn[t]:
                if nb < 0 or nb in seen:
                    continue
                seen.add(nb)
                if self._incircle(nb, p) > 0:
                    in_cav.add(nb)
                    cavity.append(nb)
                    stack.append(nb)
        # boundary edges of the cavity, each (u, v, outside neighbour)
        rim = []
        for t in cavity:
            v = tv[t]
            nbs = tn[t]
            for i in range(3):
                if nbs[i] not in in_cav:
                    rim.append((v[(i + 1) % 3], v[(i + 2) % 3], nbs[i]))
        for t in cavity:
            self.alive[t] = False
            self.free.append(t)
        by_first = {}
        by_second = {}
        made = []
        for u, v, out in rim:
            t = self._new_triangle([u, v, p], [-1, -1, out])
            made.append(t)
            by_first[u] = t
            by_second[v] = t
            if out >= 0:
                ov = tv[out]
                for j in range(3):
                    if ov[j] != u and ov[j] != v:
                        tn[out][j] = t
                        break
            self.vt[u] = t
            self.vt[v] = t
        for t in made:
            u, v, _ = tv[t]
            tn[t][0] = by_first[v]  # edge (v, p)
            tn[t][1] = by_second[u]  # edge (p, u)
        self.vt[p] = made[0]
        self.last = made[0]

    # -- edges and flips -----------------------------------------------
    def _around(self, a):
        """Triangles incident to vertex ``a``."""
        tv, tn = self.tv, self.tn
        start = self.vt[a]
        out = [start]
        t = start
        while True:
            k = tv[t].index(a)
            t = tn[t][(k + 2) % 3]  # across edge (a, next)
            if t < 0 or t == start:
                break
            out.append(t)
        if t < 0:
            t = start
            while True:
                k = tv[t].index(a)
                t = tn[t][(k + 1) % 3]
                if t < 0:
                    break
                out.append(t)
        return out

    def find_edge(self, u, v):
        """(t, i) with directed edge u -> v opposite tv[t][i], or None."""
        tv = self.tv
        for t in self._around(u):
            vs = tv[t]
            k = vs.index(u)
            if vs[(k + 1) % 3] == v:
                return t, (k + 2) % 3
        return None

    def has_edge(self, u, v):
        return self.find_edge(u, v) is not None or self.find_edge(v, u) is not None

    def flip(self, t, i):
        """Flip the edge opposite tv[t][i]; returns the new diagonal (w1, w2)."""
        tv, tn = self.tv, self.tn
        w1 = tv[t][i]
        u = tv[t][(i + 1) % 3]
        v = tv[t][(i + 2) % 3]
        nt = tn[t][i]
        j = tn[nt].index(t)
        w2 = tv[nt][j]
        n_t_u = tn[t][(i + 1) % 3]  # across (v, w1)
        n_t_v = tn[t][(i + 2) % 3]  # across (w1, u)
        # nt = (w2, v, u) rotated: position of v and u in nt
        kv = tv[nt].index(v)
        ku = tv[nt].index(u)
        n_nt_u = tn[nt][ku]  # across (w2, v)
        n_nt_v = tn[nt][kv]  # across (u, w2)
        tv[t] = [w1, u, w2]
        tn[t] = [n_nt_v, nt, n_t_v]
        tv[nt] = [w2, v, w1]
        tn[nt] = [n_t_u, t, n_nt_u]
        if n_nt_v >= 0:
            tn[n_nt_v][tn[n_nt_v].index(nt)] = t
        if n_t_u >= 0:
            tn[n_t_u][tn[n_t_u].index(t)] = nt
        self.vt[u] = t
        self.vt[w1] = t
        self.vt[w2] = t
        self.vt[v] = nt
        self.last = t
        return w1, w2

    def _edge_of(self, u, v):
        hit = self.find_edge(u, v)
        if hit is None:
            hit = self.find_edge(v, u)
        return hit

    # -- constraints ---------------------------------------------------
    def _crossings(self, a, b, constrained):
        """Edges crossed by segment ab, as (right, left) vertex pairs."""
        tv, tn = self.tv, self.tn
        for t in self._around(a):
            vs = tv[t]
            k = vs.index(a)
            u, v = vs[(k + 1) % 3], vs[(k + 2) % 3]
            if u == b or v == b:
                return []
            ou = self._orient(a, b, u)
            ov = self._orient(a, b, v)
            if ou == 0 and self._between(a, u, b):
                raise ConstraintUnsatisfiable("segment (%d, %d) passes through point %d" % (a, b, u))
            if ov == 0 and self._between(a, v, b):
                raise ConstraintUnsatisfiable("segment (%d, %d) passes through point %d" % (a, b, v))
            if ou < 0 < ov:
                break
        else:
            raise ConstraintUnsatisfiable("segment (%d, %d) leaves the triangulation" % (a, b))
        out = []
        while True:
            if frozenset((u, v)) in constrained:
                raise ConstraintUnsatisfiable("segment (%d, %d) crosses another constraint" % (a, b))
            out.append((u, v))
            t = tn[t][_opp(vs, u, v)]
            if t < 0:
                raise ConstraintUnsatisfiable("segment (%d, %d) leaves the triangulation" % (a, b))
            vs = tv[t]
            w = vs[_opp(vs, u, v)]
            if w == b:
                return out
            ow = self._orient(a, b, w)
            if ow == 0:
                raise ConstraintUnsatisfiable("segment (%d, %d) passes through point %d" % (a, b, w))
            if ow < 0:
                u = w
            else:
                v = w

    def _between(self, a, p, b):
        x, y = self.x, self.y
        return min(x[a], x[b]) <= x[p] <= max(x[a], x[b]) and min(y[a], y[b]) <= y[p] <= max(y[a], y[b])

    def insert_segment(self, a, b, constrained):
        if a == b:
            return
        crossing = deque(self._crossings(a, b, constrained))
        new_edges = []
        stall = 0
        while crossing:
            u, v = crossing.popleft()
            t, i = self._edge_of(u, v)
            w1 = self.tv[t][i]
            nt = self.tn[t][i]
            w2 = self.tv[nt][self.tn[nt].index(t)]
            # strictly convex quad iff the diagonals properly cross
            uu, vv = self.tv[t][(i + 1) % 3], self.tv[t][(i + 2) % 3]
            if self._orient(w1, w2, uu) * self._orient(w1, w2, vv) < 0:
                p, q = self.flip(t, i)
                stall = 0
                if (p not in (a, b) and q not in (a, b)) and self._orient(a, b, p) * self._orient(a, b, q) < 0:
                    crossing.append((p, q))
                else:
                    new_edges.append((p, q))
            else:
                crossing.append((u, v))
                stall += 1
                if stall > len(crossing):
                    raise ConstraintUnsatisfiable("could not recover segment (%d, %d)" % (a, b))
        constrained.add(frozenset((a, b)))
        # restore the Delaunay property on the new non-constraint edges
        changed = True
        while changed:
            changed = False
            for k, (u, v) in enumerate(new_edges):
                if frozenset((u, v)) in constrained:
                    continue
                hit = self._edge_of(u, v)
                if hit is None:
                    continue
                t, i = hit
                nt = self.tn[t][i]
                if nt < 0:
                    continue
                w2 = self.tv[nt][self.tn[nt].index(t)]
                if self._incircle(t, w2) > 0:
                    new_edges[k] = self.flip(t, i)
                    changed = True

    def legalize_all(self, constrained):
        """Lawson sweep over every unconstrained edge (cleanup safety net)."""
        changed = True
        while changed:
            changed = False
            for t in range(len(self.tv)):
                if not self.alive[t]:
                    continue
                for i in range(3):
                    nt = self.tn[t][i]
                    if nt < 0 or nt < t:
                        continue
                    u, v = self.tv[t][(i + 1) % 3], self.tv[t][(i + 2) % 3]
                    if frozenset((u, v)) in constrained:
                        continue
                    w2 = self.tv[nt][self.tn[nt].index(t)]
                    if self._incircle(t, w2) > 0:
                        w1 = self.tv[t][i]
                        if self._orient(w1, w2, u) * self._orient(w1, w2, v) < 0:
                            self.flip(t, i)
                            changed = True
                            break

    def triangles(self):
        return [tuple(v) for v, a in zip(self.tv, self.alive) if a]


def _opp(vs, u, v):
    for j in range(3):
        if vs[j] != u and vs[j] != v:
            return j
    raise AssertionError("degenerate triangle")


def _check_not_collinear(pts):
    if len(pts) < 3:
        raise DegenerateInput("need at least 3 points, got %d" % len(pts))
    a = pts[0]
    d = np.abs(pts - a).sum(axis=1)
    j = int(np.argmax(d))
    if d[j] == 0:
        raise DegenerateInput("all points coincide")
    b = pts[j]
    for c in pts:
        if orient(a[0], a[1], b[0], b[1], c[0], c[1]) != 0:
            return
    raise DegenerateInput("all points are collinear")


def convex_hull_edges(pts):
    """Hull edges (collinear hull points kept) by the monotone chain."""
    order = np.lexsort((pts[:, 1], pts[:, 0]))

    def chain(idx):
        h = []
        for i in idx:
            while len(h) >= 2 and orient(*pts[h[-2]], *pts[h[-1]], *pts[i]) < 0:
                h.pop()
            h.append(int(i))
        return h

    lower = chain(order)
    upper = chain(order[::-1])
    ring = lower[:-1] + upper[:-1]
    return [(ring[k], ring[(k + 1) % len(ring)]) for k in range(len(ring))]


def triangulate(points, segments=(), keep=None):
    """Return an ``(m, 3)`` array of counterclockwise triangles.

    ``segments`` are index pairs that must appear as edges. ``keep`` is an
    optional predicate on triangle centroids (array ``(m, 2)`` -> bool mask);
    without it, every triangle of the convex hull is kept.
    """
    pts = np.asarray(points, dtype=float)
    _check_not_collinear(pts)
    b = _Builder(pts)
    for p in hilbert_order(pts):
        b.insert(int(p))
    constrained = set()
    segs = [tuple(sg) for sg in np.asarray(segments, dtype=int).reshape(-1, 2)]
    if keep is None:
        segs = convex_hull_edges(pts) + segs
    for a, c in segs:
        b.insert_segment(int(a), int(c), constrained)
    n = b.n
    tris = np.array([t for t in b.triangles() if max(t) < n], dtype=np.int64).reshape(-1, 3)
    if keep is not None and len(tris):
        cent = pts[tris].mean(axis=1)
        tris = tris[np.asarray(keep(cent), dtype=bool)]
    # canonical order: rotate so the smallest index leads, then sort rows
    if len(tris):
        r = np.argmin(tris, axis=1)
        idx = (r[:, None] + np.arange(3)[None, :]) % 3
        tris = np.take_along_axis(tris, idx, axis=1)
        tris = tris[np.lexsort((tris[:, 2], tris[:, 1], tris[:, 0]))]
    return tris, constrained
