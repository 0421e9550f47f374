"""Point clouds on the closed domain: generators, file I/O, perturbation, neighbor queries."""

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._validation import check_int, check_order, check_point, check_points, check_positive
from .exceptions import DuplicatePoints, EmptyCloud, KTooLarge, ParseError, PerturbationStuck, TagError
from .geometry import Disk, unit_disk

__all__ = [
    "PointCloud",
    "NeighborIndex",
    "cloud_rings",
    "cloud_from_mesh_file",
    "cloud_grid_interior",
    "cloud_graded",
    "cloud_quasi_uniform",
    "perturb",
    "knn",
    "min_distance",
    "load_cloud",
    "save_cloud",
]


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Points on the closed domain, interior points first.

    ``points[:n_interior]`` are strictly inside the domain; the rest lie on
    its boundary (within ``1e-12 R``).
    """

    points: np.ndarray
    n_interior: int
    domain: object = field(default=None, repr=False)

    def __post_init__(self):
        pts = check_points(self.points, "cloud points").copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        n_int = check_int(self.n_interior, "n_interior", minimum=0)
        if n_int > len(pts):
            raise ValueError("n_interior=%d exceeds the number of points %d" % (n_int, len(pts)))
        object.__setattr__(self, "n_interior", n_int)

    @classmethod
    def from_points(cls, points, domain, check=True):
        """Tag ``points`` by membership in ``domain`` and reorder interior-first (stable)."""
        pts = check_points(points, "cloud points")
        inside = domain.contains(pts)
        on_bnd = domain.on_boundary(pts)
        bad = np.flatnonzero(~inside & ~on_bnd)
        if bad.size:
            raise TagError(
                "%d point(s) are neither interior nor on the boundary, first at index %d: %r"
                % (bad.size, bad[0], tuple(pts[bad[0]]))
            )
        order = np.concatenate([np.flatnonzero(inside), np.flatnonzero(~inside)])
        cloud = cls(pts[order], int(inside.sum()), domain)
        if check:
            cloud.validate()
        return cloud

    def validate(self):
        if self.n_points >= 2 and self.min_pairwise_distance <= 0.0:
            raise DuplicatePoints("cloud contains duplicate points (minimum pairwise distance is 0)")
        return self

    @property
    def n_points(self):
        return len(self.points)

    @property
    def n_boundary(self):
        return self.n_points - self.n_interior

    @property
    def interior(self):
        return self.points[: self.n_interior]

    @property
    def boundary(self):
        return self.points[self.n_interior:]

    @property
    def tags(self):
        t = np.full(self.n_points, "boundary", dtype=object)
        t[: self.n_interior] = "interior"
        return t

    @property
    def h_bar(self):
        return 1.0 / math.sqrt(self.n_points)

    @functools.cached_property
    def min_pairwise_distance(self):
        return min_distance(self)

    @functools.cached_property
    def index(self):
        return NeighborIndex(self.points)

    def __len__(self):
        return self.n_points


class NeighborIndex:
    """k-nearest-neighbor queries with ties broken by lower point index.

    Backed by a k-d tree; candidate sets are widened until every point tied
    with the k-th distance is present, then re-sorted by (distance, index).
    """

    def __init__(self, points):
        self.points = check_points(points, "indexed points")
        self._tree = cKDTree(self.points)

    def __len__(self):
        return len(self.points)

    def query(self, p, k):
        """Return the ``k`` nearest points as a list of ``(index, distance)``."""
        idx, dist = self.query_many(np.array([check_point(p)]), k)
        return [(int(i), float(d)) for i, d in zip(idx[0], dist[0])]

    def query_many(self, queries, k):
        """Vectorized :meth:`query`; returns ``(indices, distances)`` of shape ``(m, k)``."""
        queries = check_points(queries, "query points")
        n = len(self.points)
        k = check_int(k, "k", minimum=1)
        if k > n:
            raise KTooLarge("k=%d exceeds the number of indexed points %d" % (k, n))
        m = len(queries)
        out_i = np.empty((m, k), dtype=np.intp)
        out_d = np.empty((m, k))
        todo = np.arange(m)
        kk = min(n, k + 2)
        while todo.size:
            _, cand = self._tree.query(queries[todo], k=kk)
            cand = np.asarray(cand).reshape(len(todo), kk)
            diff = self.points[cand] - queries[todo][:, None, :]
            dist = np.hypot(diff[..., 0], diff[..., 1])
            order = _row_lexsort(dist, cand)
            cand = np.take_along_axis(cand, order, axis=1)
            dist = np.take_along_axis(dist, order, axis=1)
            # rows whose farthest candidate may still tie the k-th distance need a wider search
            kth = dist[:, k - 1]
            widen = (dist[:, -1] <= kth * (1.0 + 1e-12)) & (kk < n)
            done = ~widen
            out_i[todo[done]] = cand[done, :k]
            out_d[todo[done]] = dist[done, :k]
            todo = todo[widen]
            kk = min(n, 2 * kk)
        return out_i, out_d


def _row_lexsort(dist, idx):
    order = np.argsort(idx, axis=1, kind="stable")
    d_sorted = np.take_along_axis(dist, order, axis=1)
    order2 = np.argsort(d_sorted, axis=1, kind="stable")
    return np.take_along_axis(order, order2, axis=1)


def knn(index, p, k):
    return index.query(p, k)


def min_distance(cloud):
    """Exact minimum pairwise distance by a grid-bucket sweep.

    Buckets of side ``delta`` are compared with their neighbors; whenever the
    minimum found is at most ``delta`` it is exact (every closer pair shares or
    neighbors a bucket). Otherwise ``delta`` is doubled and the sweep repeated.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else check_points(cloud)
    n = len(pts)
    if n < 2:
        raise ValueError("minimum distance needs at least 2 points")
    lo = pts.min(axis=0)
    extent = pts.max(axis=0) - lo
    area = max(extent[0] * extent[1], max(extent.max(), 1e-300) ** 2 / n)
    delta = math.sqrt(area / n)
    if delta == 0.0:
        return 0.0
    while True:
        best = _bucket_min(pts, lo, delta)
        if best <= delta:
            return best
        delta *= 2.0


def _bucket_min(pts, lo, delta):
    cell = np.floor((pts - lo) / delta).astype(np.int64)
    ny = int(cell[:, 1].max()) + 3
    key = (cell[:, 0] + 1) * ny + (cell[:, 1] + 1)
    order = np.argsort(key, kind="stable")
    skey = key[order]
    spts = pts[order]
    best = math.inf
    n = len(pts)
    pos = np.arange(n)
    for dx, dy in ((0, 0), (1, -1), (1, 0), (1, 1), (0, 1)):
        target = skey + dx * ny + dy
        lo_i = np.searchsorted(skey, target, side="left")
        hi_i = np.searchsorted(skey, target, side="right")
        if dx == 0 and dy == 0:
            lo_i = np.maximum(lo_i, pos + 1)
        counts = np.maximum(hi_i - lo_i, 0)
        total = int(counts.sum())
        if total == 0:
            continue
        a = np.repeat(pos, counts)
        offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        b = np.repeat(lo_i, counts) + offs
        d = np.hypot(spts[a, 0] - spts[b, 0], spts[a, 1] - spts[b, 1])
        best = min(best, float(d.min()))
    return best


def cloud_rings(J, domain=None):
    """Concentric rings on the unit disk.

    Ring ``j = 0..J-1`` has radius ``j / (J - 1)`` and ``floor(j pi) + 1``
    equally spaced points starting at angle 0. The outer ring is the boundary.
    """
    J = check_int(J, "J", minimum=2)
    domain = unit_disk() if domain is None else domain
    if not (isinstance(domain, Disk) and domain.center == (0.0, 0.0) and domain.radius == 1.0):
        raise ValueError("ring clouds are defined on the unit disk only")
    interior, boundary = [], None
    for j in range(J):
        n = int(math.floor(j * math.pi)) + 1
        theta = 2.0 * math.pi * np.arange(n) / n
        r = j / (J - 1)
        ring = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        if j == J - 1:
            boundary = ring
        else:
            interior.append(ring)
    interior = np.concatenate(interior)
    pts = np.concatenate([interior, boundary])
    return PointCloud(pts, len(interior), domain).validate()


def cloud_grid_interior(domain, h_bar_target):
    """Boundary points at spacing ``h`` plus lattice nodes at least ``0.5 h`` inside."""
    h = check_positive(h_bar_target, "h_bar_target")
    xmin, ymin, xmax, ymax = domain.bounds()
    i0, i1 = math.floor(xmin / h), math.ceil(xmax / h)
    j0, j1 = math.floor(ymin / h), math.ceil(ymax / h)
    X, Y = np.meshgrid(np.arange(i0, i1 + 1) * h, np.arange(j0, j1 + 1) * h, indexing="ij")
    lattice = np.column_stack([X.ravel(), Y.ravel()])
    keep = domain.contains(lattice) & (domain.distance_to_boundary(lattice) >= 0.5 * h)
    lattice = lattice[keep]
    if not len(lattice):
        raise EmptyCloud("no lattice point of spacing %g lies 0.5h inside the domain" % h)
    bnd = domain.boundary_points(h)
    return PointCloud(np.concatenate([lattice, bnd]), len(lattice), domain).validate()


def _bounding_box(domain):
    return np.array(domain.bounds(), dtype=float)


def _rejection_candidates(domain, n, density, rng):
    """Draw ``n`` points inside ``domain`` with probability proportional to ``density``."""
    xmin, ymin, xmax, ymax = _bounding_box(domain)
    out = []
    have = 0
    peak = None
    while have < n:
        m = max(1024, 2 * (n - have))
        p = np.column_stack([rng.uniform(xmin, xmax, m), rng.uniform(ymin, ymax, m)])
        u = rng.uniform(0.0, 1.0, m)
        inside = domain.contains(p)
        p, u = p[inside], u[inside]
        if peak is None:
            peak = density.peak
        p = p[u * peak < density(p)]
        out.append(p)
        have += len(p)
    return np.concatenate(out)[:n]


class _GradedDensity:
    """Density shape ``(max(d, h) + delta) ** exponent`` with ``d`` the boundary distance."""

    def __init__(self, domain, exponent, cap_distance, delta=0.0):
        self.domain = domain
        self.exponent = exponent
        self.cap = cap_distance
        self.delta = delta
        if exponent <= 0:
            self.peak = (cap_distance + delta) ** exponent
        else:
            self.peak = (domain.half_width + delta) ** exponent

    def at_distance(self, d):
        return (np.maximum(d, self.cap) + self.delta) ** self.exponent

    def __call__(self, pts):
        return self.at_distance(self.domain.distance_to_boundary(pts))


def _poisson_thin(candidates, radius, fixed, margin_ok):
    """Greedy dart throwing: accept candidates in order unless within ``radius`` of an accepted point."""
    accepted = [fixed]
    tree_pts = fixed
    tree = cKDTree(tree_pts) if len(tree_pts) else None
    out = []
    batch = max(1024, len(candidates) // 256)
    for i in range(0, len(candidates), batch):
        c = candidates[i:i + batch]
        r = radius[i:i + batch]
        ok = margin_ok[i:i + batch].copy()
        if tree is not None:
            near = tree.query_ball_point(c, r * (1.0 - 1e-12), return_length=True)
            ok &= near == 0
        idx = np.flatnonzero(ok)
        if idx.size:
            sub = c[idx]
            sub_r = r[idx]
            local = cKDTree(sub)
            pairs = local.query_pairs(float(sub_r.max()), output_type="ndarray")
            take = np.ones(len(idx), dtype=bool)
            if len(pairs):
                d = np.hypot(*(sub[pairs[:, 0]] - sub[pairs[:, 1]]).T)
                # pair (a, b) with a < b conflicts when b lies within b's own radius of a
                hit = d < sub_r[pairs[:, 1]] * (1.0 - 1e-12)
                pairs = pairs[hit]
                if len(pairs):
                    later = {}
                    for a, b in pairs:
                        later.setdefault(int(b), []).append(int(a))
                    for b in sorted(later):
                        if any(take[a] for a in later[b]):
                            take[b] = False
            chosen = sub[take]
            if len(chosen):
                out.append(chosen)
                accepted.append(chosen)
                tree_pts = np.concatenate(accepted)
                tree = cKDTree(tree_pts)
    return np.concatenate(out) if out else np.empty((0, 2))


def cloud_graded(domain, n_target, s=None, seed=0, exponent=None, delta=0.0, oversample=30, max_iter=40,
                 cap_distance=None):
    """Cloud graded toward the boundary by rejection sampling plus a spacing filter.

    Candidates are drawn with density proportional to
    ``(max(d, h) + delta) ** exponent`` (``d`` = distance to the boundary,
    ``h = 1/sqrt(n_target)``; the cap keeps the minimum spacing bounded
    below). They are thinned greedily so that no two points are closer than
    the local spacing ``c * density ** -0.5``; the scale ``c`` is calibrated
    by bisection so the total count lands within 10% of ``n_target``.
    Boundary points use the spacing the density implies at the boundary.

    ``exponent`` defaults to ``s - 2``; ``exponent=0`` gives a quasi-uniform
    cloud. ``cap_distance`` overrides the cap ``h``.
    """
    n_target = check_int(n_target, "N_target", minimum=16)
    if exponent is None:
        if s is None:
            raise ValueError("either s or exponent is required")
        exponent = check_order(s) - 2.0
    exponent = float(exponent)
    rng = np.random.default_rng(seed)
    h_bar = 1.0 / math.sqrt(n_target)
    h_cap = h_bar if cap_distance is None else check_positive(cap_distance, "cap_distance")
    density = _GradedDensity(domain, exponent, h_cap, delta)
    candidates = _rejection_candidates(domain, oversample * n_target, density, rng)
    cand_d = domain.distance_to_boundary(candidates)
    spacing_unit = density.at_distance(cand_d) ** -0.5
    boundary_unit = float(density.at_distance(np.array([0.0]))[0] ** -0.5)

    def build(c):
        bnd = domain.boundary_points(c * boundary_unit)
        radius = c * spacing_unit
        inner = _poisson_thin(candidates, radius, bnd, cand_d >= 0.5 * radius)
        return inner, bnd

    # a packing of spacing r holds about 0.7 / r^2 points per unit area, and the
    # candidates sample g, so the area integral of g is area / mean(1 / g)
    g = density.at_distance(cand_d)
    c = math.sqrt(0.7 * domain.area() / (float(np.mean(1.0 / g)) * n_target))
    lo = hi = None
    best = None
    for _ in range(max_iter):
        inner, bnd = build(c)
        total = len(inner) + len(bnd)
        err = abs(total - n_target) / n_target
        if best is None or err < best[0]:
            best = (err, inner, bnd)
        if err <= 0.02:
            break
        if total > n_target:
            lo = c if lo is None else max(lo, c)
        else:
            hi = c if hi is None else min(hi, c)
        # the count scales like 1 / c^2; fall back to bisection once bracketed
        c_new = c * math.sqrt(total / n_target) if total else c / 2.0
        if lo is not None and hi is not None and not lo < c_new < hi:
            c_new = 0.5 * (lo + hi)
        c = c_new
    _, inner, bnd = best
    if not len(inner):
        raise EmptyCloud("graded generator produced no interior points")
    pts = np.concatenate([inner, bnd])
    return PointCloud(pts, len(inner), domain).validate()


def cloud_quasi_uniform(domain, n_target, seed=0):
    """Mesh-like quasi-uniform cloud (the graded generator with a flat density)."""
    return cloud_graded(domain, n_target, exponent=0.0, seed=seed)


def perturb(cloud, level, seed=0, max_redraws=100):
    """Move each interior point by an independent uniform draw from ``[-level, level]^2``.

    Draws landing outside the domain are redrawn (up to ``max_redraws`` times).
    Boundary points are untouched. Uses numpy's PCG64 generator seeded with ``seed``.
    """
    level = check_positive(level, "level", strict=False)
    if cloud.domain is None:
        raise ValueError("perturbation needs the cloud's domain")
    if level == 0.0:
        return PointCloud(cloud.points, cloud.n_interior, cloud.domain)
    rng = np.random.Generator(np.random.PCG64(seed))
    base = np.array(cloud.interior)
    moved = base.copy()
    todo = np.arange(len(base))
    for _ in range(max_redraws):
        if not todo.size:
            break
        trial = base[todo] + rng.uniform(-level, level, size=(len(todo), 2))
        ok = cloud.domain.contains(trial)
        moved[todo[ok]] = trial[ok]
        todo = todo[~ok]
    if todo.size:
        raise PerturbationStuck(
            "%d interior point(s) stayed outside the domain after %d redraws" % (todo.size, max_redraws)
        )
    pts = np.concatenate([moved, cloud.boundary])
    return PointCloud(pts, cloud.n_interior, cloud.domain).validate()


def _read_lines(path):
    try:
        with open(path) as fh:
            raw = fh.readlines()
    except OSError as exc:
        raise ParseError("cannot read file: %s" % exc.strerror, None, path) from None
    return [(i + 1, ln.split()) for i, ln in enumerate(raw) if ln.strip() and not ln.lstrip().startswith("#")]


def _parse_xy(lines, start, count, path):
    pts = np.empty((count, 2))
    for k in range(count):
        if start + k >= len(lines):
            raise ParseError("expected %d coordinate lines, file ended after %d" % (count, k), None, path)
        lineno, toks = lines[start + k]
        if len(toks) != 2:
            raise ParseError("expected 'x y'", lineno, path)
        try:
            pts[k] = float(toks[0]), float(toks[1])
        except ValueError:
            raise ParseError("expected 'x y'", lineno, path) from None
    return pts


def cloud_from_mesh_file(path, domain):
    """Load mesh vertices (``mesh`` or ``tri`` header), discard triangles, tag by geometry."""
    lines = _read_lines(path)
    if not lines:
        raise ParseError("empty file", None, path)
    lineno, head = lines[0]
    if len(head) != 3 or head[0] not in ("mesh", "tri"):
        raise ParseError("expected header 'mesh <N_v> <N_tri>'", lineno, path)
    try:
        n_v, n_t = int(head[1]), int(head[2])
    except ValueError:
        raise ParseError("bad counts in header", lineno, path) from None
    if n_v < 1 or n_t < 0:
        raise ParseError("bad counts in header", lineno, path)
    pts = _parse_xy(lines, 1, n_v, path)
    for k in range(n_t):
        pos = 1 + n_v + k
        if pos >= len(lines):
            raise ParseError("expected %d triangle lines, file ended after %d" % (n_t, k), None, path)
        ln, toks = lines[pos]
        try:
            tri = [int(t) for t in toks]
        except ValueError:
            raise ParseError("expected 'i j k'", ln, path) from None
        if len(tri) != 3 or min(tri) < 1 or max(tri) > n_v:
            raise ParseError("triangle indices must be three integers in 1..%d" % n_v, ln, path)
    return PointCloud.from_points(pts, domain)


def load_cloud(path, domain=None):
    """Read a ``cloud <N_v> <N_vi>`` file (interior points first)."""
    lines = _read_lines(path)
    if not lines:
        raise ParseError("empty file", None, path)
    lineno, head = lines[0]
    if len(head) != 3 or head[0] != "cloud":
        raise ParseError("expected header 'cloud <N_v> <N_vi>'", lineno, path)
    try:
        n_v, n_vi = int(head[1]), int(head[2])
    except ValueError:
        raise ParseError("bad counts in header", lineno, path) from None
    if n_v < 1 or not 0 <= n_vi <= n_v:
        raise ParseError("bad counts in header", lineno, path)
    pts = _parse_xy(lines, 1, n_v, path)
    cloud = PointCloud(pts, n_vi, domain)
    if domain is not None:
        if not np.all(domain.contains(cloud.interior)):
            raise TagError("%s: a listed interior point is not inside the domain" % path)
        if not np.all(domain.on_boundary(cloud.boundary)):
            raise TagError("%s: a listed boundary point is off the boundary" % path)
    return cloud.validate()


def save_cloud(cloud, path):
    with open(path, "w") as fh:
        fh.write("cloud %d %d\n" % (cloud.n_points, cloud.n_interior))
        for x, y in cloud.points:
            fh.write("%r %r\n" % (float(x), float(y)))
