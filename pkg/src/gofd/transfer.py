"""Transfer matrices from a point cloud to the overlay grid.

Two constructions: a moving least squares fit of a linear polynomial over the
``n`` nearest cloud points (inverse-distance weights), and piecewise linear
interpolation on a constrained Delaunay triangulation of the cloud.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from . import _cdt
from ._validation import check_int, check_point, check_points, check_vector
from .exceptions import ConstraintUnsatisfiable, DegenerateNeighborhood, KTooLarge
from .geometry import boundary_segments

__all__ = [
    "Triangulation",
    "TransferMatrix",
    "build_cdt",
    "linear_interp_weights",
    "mls_weights",
    "build_transfer",
    "save_triangulation",
]

_LOG = logging.getLogger(__name__)

SNAP_FACTOR = 1e-12
COND_LIMIT = 1e12
MLS_GROW_STEPS = 3
BARY_TOL = 1e-12


# ---------------------------------------------------------------------------
# triangulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Triangulation:
    """Triangles over ``vertices`` (counterclockwise index triples)."""

    vertices: np.ndarray
    triangles: np.ndarray
    constrained_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __post_init__(self):
        v = check_points(self.vertices, "vertices").copy()
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3).copy()
        e = np.asarray(self.constrained_edges, dtype=np.int64).reshape(-1, 2).copy()
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle indices out of range")
        for a in (v, t, e):
            a.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "constrained_edges", e)
        object.__setattr__(self, "_neighbors", None)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self):
        return float(self.signed_areas().sum())

    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def edges(self):
        """Unique undirected edges as sorted pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def neighbors(self):
        """``neighbors[t, i]``: triangle across the edge opposite vertex i, or -1."""
        if self._neighbors is None:
            t = self.triangles
            n = len(self.vertices)
            T = len(t)
            u = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
            v = np.concatenate([t[:, 2], t[:, 0], t[:, 1]])
            key = u * n + v
            rev = v * n + u
            order = np.argsort(key)
            pos = np.searchsorted(key[order], rev)
            pos = np.minimum(pos, len(key) - 1)
            hit = key[order][pos] == rev
            owner = np.where(hit, order[pos] % T if T else 0, -1)
            nb = owner.reshape(3, T).T.copy()
            nb.setflags(write=False)
            object.__setattr__(self, "_neighbors", nb)
        return self._neighbors

    def barycentric(self, tri_index, points):
        """Barycentric coordinates of ``points`` in triangles ``tri_index``."""
        p = self.vertices[self.triangles[tri_index]]
        q = np.asarray(points, dtype=float)
        a, b, c = p[..., 0, :], p[..., 1, :], p[..., 2, :]

        def cross(o, r, s):
            return (r[..., 0] - o[..., 0]) * (s[..., 1] - o[..., 1]) - (r[..., 1] - o[..., 1]) * (s[..., 0] - o[..., 0])

        area = cross(a, b, c)
        lam = np.stack([cross(q, b, c), cross(a, q, c), cross(a, b, q)], axis=-1)
        return lam / area[..., None]

    def _walk(self, p, start):
        tv = self.triangles
        nb = self.neighbors
        V = self.vertices
        t = start
        for _ in range(4 * int(np.sqrt(len(tv))) + 64):
            a, b, c = V[tv[t]]
            moved = False
            for i, (e0, e1) in enumerate(((b, c), (c, a), (a, b))):
                o = (e1[0] - e0[0]) * (p[1] - e0[1]) - (e1[1] - e0[1]) * (p[0] - e0[0])
                scale = abs(e1[0] - e0[0]) + abs(e1[1] - e0[1])
                if o < -BARY_TOL * scale * scale:
                    t = nb[t, i]
                    moved = True
                    break
            if not moved:
                return t
            if t < 0:
                return -1
        return -1

    def _brute(self, p):
        lam = self.barycentric(np.arange(self.n_triangles), np.broadcast_to(p, (self.n_triangles, 2)))
        worst = lam.min(axis=1)
        k = int(np.argmax(worst))
        return k if worst[k] >= -BARY_TOL else -1

    def locate(self, points, hint=0):
        """Containing triangle for each point (-1 if none); walk with brute-force fallback."""
        pts = check_points(points, "points", min_points=0)
        out = np.full(len(pts), -1, dtype=np.int64)
        if self.n_triangles == 0:
            return out
        t = int(hint) if 0 <= hint < self.n_triangles else 0
        for k in _cdt.hilbert_order(pts) if len(pts) > 1 else range(len(pts)):
            p = pts[k]
            found = self._walk(p, t)
            if found < 0:
                found = self._brute(p)
            out[k] = found
            if found >= 0:
                t = found
        return out

    def interpolate(self, values, points):
        """Piecewise linear interpolant of nodal ``values`` at ``points`` (NaN outside)."""
        vals = check_vector(values, len(self.vertices), "values")
        pts = check_points(points, "points", min_points=0)
        tri = self.locate(pts)
        out = np.full(len(pts), np.nan)
        ok = tri >= 0
        lam = _clip_weights(self.barycentric(tri[ok], pts[ok]))
        out[ok] = np.einsum("ij,ij->i", lam, vals[self.triangles[tri[ok]]])
        return out


def _clip_weights(lam):
    lam = np.clip(lam, 0.0, 1.0)
    return lam / lam.sum(axis=-1, keepdims=True)


def build_cdt(cloud, boundary=None):
    """Constrained Delaunay triangulation of ``cloud``.

    ``boundary`` is an ``(m, 2)`` array of cloud-index pairs that must become
    edges; by default the cloud's boundary points are chained along the
    domain boundary. Triangles whose centroid is outside the domain are
    dropped. Without a domain the convex hull is triangulated.
    """
    pts = cloud.points
    domain = cloud.domain
    if boundary is None:
        if domain is not None and cloud.n_boundary >= 2:
            boundary = boundary_segments(domain, cloud.boundary, np.arange(cloud.n_interior, cloud.n_points))
        else:
            boundary = np.zeros((0, 2), dtype=np.int64)
    segs = np.asarray(boundary, dtype=np.int64).reshape(-1, 2)
    if segs.size and (segs.min() < 0 or segs.max() >= len(pts)):
        raise ValueError("segment endpoints must be cloud indices")
    _check_segments_clear(pts, segs, SNAP_FACTOR * cloud.h_bar)
    keep = None if domain is None else domain.contains
    tris, _ = _cdt.triangulate(pts, segs, keep=keep)
    return Triangulation(pts, tris, segs)


def _check_segments_clear(pts, segs, tol):
    if not len(segs):
        return
    tree = cKDTree(pts)
    a = pts[segs[:, 0]]
    b = pts[segs[:, 1]]
    mid = 0.5 * (a + b)
    half = 0.5 * np.hypot(*(b - a).T)
    for k, cand in enumerate(tree.query_ball_point(mid, half + tol)):
        cand = np.asarray(cand, dtype=np.int64)
        cand = cand[(cand != segs[k, 0]) & (cand != segs[k, 1])]
        if not cand.size:
            continue
        d = b[k] - a[k]
        L2 = float(d @ d)
        rel = pts[cand] - a[k]
        tpar = np.clip(rel @ d / L2, 0.0, 1.0)
        dist = np.hypot(*(rel - tpar[:, None] * d).T)
        close = dist <= tol
        if np.any(close):
            raise ConstraintUnsatisfiable(
                "segment (%d, %d) passes within %.3g of point %d"
                % (segs[k, 0], segs[k, 1], tol, int(cand[close][0]))
            )


def save_triangulation(tri, path):
    """Write ``tri <N_v> <N_tri>``, vertex lines, then 1-based triangle lines."""
    with open(path, "w") as fh:
        fh.write("tri %d %d\n" % (len(tri.vertices), tri.n_triangles))
        for x, y in tri.vertices:
            fh.write("%r %r\n" % (float(x), float(y)))
        for a, b, c in tri.triangles + 1:
            fh.write("%d %d %d\n" % (a, b, c))


# ---------------------------------------------------------------------------
# rows
# ---------------------------------------------------------------------------

def linear_interp_weights(tri, grid_point):
    """Barycentric row ``(indices, weights)`` for one point; empty if uncovered."""
    p = np.array(check_point(grid_point))
    k = int(tri.locate(p[None, :])[0])
    if k < 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    lam = _clip_weights(tri.barycentric(np.array([k]), p[None, :]))[0]
    return tri.triangles[k].copy(), lam


def _mls_solve(points, queries, idx, dist):
    """Batched weighted linear fits; returns (rows, condition estimates)."""
    r = dist[:, -1:]
    rel = (points[idx] - queries[:, None, :]) / r[..., None]
    w = 1.0 / dist
    basis = np.concatenate([np.ones(idx.shape + (1,)), rel], axis=-1)  # (m, n, 3)
    A = np.einsum("mj,mja,mjb->mab", w, basis, basis)
    cond = np.linalg.cond(A)
    good = np.isfinite(cond) & (cond <= COND_LIMIT)
    rows = np.zeros(idx.shape)
    if np.any(good):
        e0 = np.zeros((int(good.sum()), 3, 1))
        e0[:, 0, 0] = 1.0
        z = np.linalg.solve(A[good], e0)[..., 0]
        rows[good] = w[good] * np.einsum("mja,ma->mj", basis[good], z)
    return rows, cond, good


def _mls_rows(cloud, queries, n):
    """Rows for many query points; returns list of (indices, weights)."""
    n_pts = cloud.n_points
    if n > n_pts:
        raise KTooLarge("n=%d exceeds the cloud size %d" % (n, n_pts))
    snap = SNAP_FACTOR * cloud.h_bar
    idx, dist = cloud.index.query_many(queries, n)
    dist = dist.reshape(len(queries), n)
    idx = idx.reshape(len(queries), n)
    out_idx = [None] * len(queries)
    out_w = [None] * len(queries)
    coincide = dist[:, 0] < snap
    for k in np.flatnonzero(coincide):
        out_idx[k] = idx[k, :1].copy()
        out_w[k] = np.ones(1)
    todo = np.flatnonzero(~coincide)
    nn = n
    for step in range(MLS_GROW_STEPS + 1):
        if not todo.size:
            break
        if nn != n:
            i2, d2 = cloud.index.query_many(queries[todo], nn)
            d_t, i_t = d2.reshape(len(todo), nn), i2.reshape(len(todo), nn)
        else:
            d_t, i_t = dist[todo], idx[todo]
        rows, cond, good = _mls_solve(cloud.points, queries[todo], i_t, d_t)
        for j in np.flatnonzero(good):
            k = todo[j]
            out_idx[k] = i_t[j].copy()
            out_w[k] = rows[j]
        todo = todo[~good]
        if not todo.size:
            break
        if step == MLS_GROW_STEPS or nn >= n_pts:
            k = todo[0]
            raise DegenerateNeighborhood(
                "MLS normal matrix at point (%r, %r) has condition %.3g with %d neighbours"
                % (queries[k, 0], queries[k, 1], cond[~good][0], nn)
            )
        nn = min(nn + 2, n_pts)
    return out_idx, out_w


def mls_weights(cloud, grid_point, n=5):
    """MLS row ``(indices, weights)``: value of the fitted linear polynomial at ``grid_point``."""
    n = check_int(n, "n", minimum=3)
    p = np.array(check_point(grid_point))
    idx, w = _mls_rows(cloud, p[None, :], n)
    return idx[0], w[0]


# ---------------------------------------------------------------------------
# assembled matrix
# ---------------------------------------------------------------------------

class TransferMatrix:
    """Sparse ``N_grid x N_cols`` transfer with cached column sums."""

    def __init__(self, matrix, method, columns=None, n_uncovered=0, grid=None):
        m = sp.csr_matrix(matrix, dtype=float)
        m.sum_duplicates()
        m.sort_indices()
        for a in (m.data, m.indices, m.indptr):
            a.setflags(write=False)
        self.matrix = m
        self.method = method
        self.grid = grid
        self.columns = np.arange(m.shape[1]) if columns is None else np.asarray(columns)
        self.n_uncovered = int(n_uncovered)
        cs = np.asarray(m.sum(axis=0)).ravel()
        cs.setflags(write=False)
        self.column_sums = cs
        self._t = m.T.tocsr()

    def __repr__(self):
        return "TransferMatrix(shape=%s, method=%r, nnz=%d)" % (self.shape, self.method, self.matrix.nnz)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def nnz(self):
        return self.matrix.nnz

    def apply(self, u):
        """Cloud values -> grid values."""
        return self.matrix @ check_vector(u, self.shape[1], "cloud vector")

    def apply_transpose(self, g):
        """Grid values -> cloud values (gather)."""
        return self._t @ check_vector(g, self.shape[0], "grid vector")

    def toarray(self):
        return self.matrix.toarray()

    def nonzero_rows(self):
        return np.flatnonzero(np.diff(self.matrix.indptr) > 0)

    def zero_sum_columns(self):
        return np.flatnonzero(self.column_sums <= 0)

    def restrict_columns(self, cols):
        cols = np.asarray(cols, dtype=np.int64)
        return TransferMatrix(self.matrix[:, cols], self.method, self.columns[cols], self.n_uncovered, self.grid)


def _delaunay_rows(tri, grid, node_ids):
    """Locate grid nodes by rasterizing each triangle over its bounding box."""
    h = grid.spacing
    N = grid.n
    size = grid.size
    wanted = np.zeros(grid.n_nodes, dtype=bool)
    wanted[node_ids] = True
    V = tri.vertices[tri.triangles]
    lo = np.ceil(V.min(axis=1) / h - 1e-9).astype(np.int64)
    hi = np.floor(V.max(axis=1) / h + 1e-9).astype(np.int64)
    lo = np.maximum(lo, -N)
    hi = np.minimum(hi, N)
    nx = np.maximum(hi[:, 0] - lo[:, 0] + 1, 0)
    ny = np.maximum(hi[:, 1] - lo[:, 1] + 1, 0)
    counts = nx * ny
    best_tri = np.full(grid.n_nodes, -1, dtype=np.int64)
    best_val = np.full(grid.n_nodes, -np.inf)
    # process triangles in chunks to bound memory
    chunk_target = 2_000_000
    start = 0
    T = tri.n_triangles
    csum = np.cumsum(counts)
    while start < T:
        base = csum[start - 1] if start else 0
        stop = int(np.searchsorted(csum, base + chunk_target, side="right"))
        stop = max(stop, start + 1)
        sel = np.arange(start, min(stop, T))
        c = counts[sel]
        tri_id = np.repeat(sel, c)
        off = np.arange(int(c.sum())) - np.repeat(np.cumsum(c) - c, c)
        nyr = np.repeat(ny[sel], c)
        j = np.repeat(lo[sel, 0], c) + off // np.maximum(nyr, 1)
        k = np.repeat(lo[sel, 1], c) + off % np.maximum(nyr, 1)
        node = (j + N) * size + (k + N)
        keep = wanted[node]
        tri_id, node, j, k = tri_id[keep], node[keep], j[keep], k[keep]
        pts = np.column_stack([j * h, k * h])
        lam = tri.barycentric(tri_id, pts)
        worst = lam.min(axis=1)
        inside = worst >= -BARY_TOL
        tri_id, node, worst = tri_id[inside], node[inside], worst[inside]
        # keep, per node, the triangle with the largest minimum coordinate (lowest index on ties)
        order = np.lexsort((tri_id, -worst))
        tri_id, node, worst = tri_id[order], node[order], worst[order]
        first = np.unique(node, return_index=True)[1]
        tri_id, node, worst = tri_id[first], node[first], worst[first]
        upd = (worst > best_val[node]) | ((worst == best_val[node]) & (tri_id < best_tri[node]))
        best_tri[node[upd]] = tri_id[upd]
        best_val[node[upd]] = worst[upd]
        start = int(sel[-1]) + 1
    found = best_tri[node_ids]
    ok = found >= 0
    rows = node_ids[ok]
    pts = grid.nodes()[rows]
    lam = _clip_weights(tri.barycentric(found[ok], pts))
    cols = tri.triangles[found[ok]]
    return rows, cols, lam, int((~ok).sum())


def build_transfer(cloud, grid, method="mls", domain=None, n=5, triangulation=None):
    """Assemble the transfer matrix from ``cloud`` values to ``grid`` nodes.

    Only grid nodes strictly inside the domain get nonzero rows. ``method`` is
    ``"mls"`` (``n`` nearest neighbours) or ``"delaunay"``.
    """
    domain = cloud.domain if domain is None else domain
    if domain is None:
        raise ValueError("a domain is needed to decide which grid nodes are interior")
    nodes = grid.nodes()
    node_ids = np.flatnonzero(domain.contains(nodes))
    n_pts = cloud.n_points
    if method == "mls":
        n = check_int(n, "n", minimum=3)
        idx, w = _mls_rows(cloud, nodes[node_ids], n)
        lengths = np.array([len(i) for i in idx], dtype=np.int64)
        rows = np.repeat(node_ids, lengths)
        cols = np.concatenate(idx) if idx else np.zeros(0, dtype=np.int64)
        vals = np.concatenate(w) if w else np.zeros(0)
        n_unc = 0
    elif method == "delaunay":
        tri = build_cdt(cloud) if triangulation is None else triangulation
        r, c, lam, n_unc = _delaunay_rows(tri, grid, node_ids)
        rows = np.repeat(r, 3)
        cols = c.ravel()
        vals = lam.ravel()
        if n_unc:
            _LOG.info("%d interior grid node(s) fall outside the triangulation; rows left zero", n_unc)
    else:
        raise ValueError("unknown transfer method %r (expected 'mls' or 'delaunay')" % (method,))
    M = sp.coo_matrix((vals, (rows, cols)), shape=(grid.n_nodes, n_pts))
    T = TransferMatrix(M, method, n_uncovered=n_unc, grid=grid)
    n_zero = int(np.sum(T.column_sums[: cloud.n_interior] <= 0))
    if n_zero:
        _LOG.warning("%d interior column(s) of the transfer have zero sum", n_zero)
    T.n_zero_interior_columns = n_zero
    return T
