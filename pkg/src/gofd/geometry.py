"""Bounded 2D domains: disks and polygons with holes."""

import math

import numpy as np

from ._validation import check_points, check_positive

__all__ = [
    "Disk",
    "PolygonDomain",
    "unit_disk",
    "l_shape",
    "unit_square",
    "wavy_domain",
    "load_domain",
    "save_domain",
    "contains",
    "fd_box",
    "boundary_points",
    "distance_to_boundary",
    "boundary_segments",
]

BOUNDARY_RTOL = 1e-12
FD_BOX_FACTOR = 1.2
CORNER_ANGLE = math.radians(30.0)
_CHUNK = 1 << 14


def _signed_area(ring):
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


class _Domain:
    """Shared vectorized behaviour; subclasses provide the geometry."""

    def contains(self, points):
        """True for points strictly inside (boundary points excluded)."""
        pts, scalar = _as_points(points)
        out = self._inside(pts) & (self.distance_to_boundary(pts) > self.tolerance)
        return bool(out[0]) if scalar else out

    def fd_box(self, factor=FD_BOX_FACTOR):
        """Half width of the overlay box, ``1.2 R`` by default."""
        return factor * self.half_width

    @property
    def tolerance(self):
        return BOUNDARY_RTOL * self.half_width

    def on_boundary(self, points):
        return self.distance_to_boundary(points) <= self.tolerance


class Disk(_Domain):
    kind = "disk"

    def __init__(self, center=(0.0, 0.0), radius=1.0):
        self.center = (float(center[0]), float(center[1]))
        self.radius = check_positive(radius, "radius")
        cx, cy = self.center
        self.half_width = max(abs(cx), abs(cy)) + self.radius

    def __repr__(self):
        return "Disk(center=%r, radius=%r)" % (self.center, self.radius)

    def __eq__(self, other):
        return isinstance(other, Disk) and self.center == other.center and self.radius == other.radius

    def __hash__(self):
        return hash((self.center, self.radius))

    def _radial(self, pts):
        return np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])

    def _inside(self, pts):
        return self._radial(pts) < self.radius

    def distance_to_boundary(self, points):
        pts, scalar = _as_points(points)
        d = np.abs(self.radius - self._radial(pts))
        return float(d[0]) if scalar else d

    def boundary_points(self, spacing):
        spacing = check_positive(spacing, "target_spacing")
        n = max(3, int(round(2.0 * math.pi * self.radius / spacing)))
        theta = 2.0 * math.pi * np.arange(n) / n
        return np.column_stack(
            [self.center[0] + self.radius * np.cos(theta), self.center[1] + self.radius * np.sin(theta)]
        )

    def ring_parameter(self, points):
        pts, _ = _as_points(points)
        theta = np.arctan2(pts[:, 1] - self.center[1], pts[:, 0] - self.center[0])
        return np.zeros(len(pts), dtype=int), np.mod(theta, 2.0 * math.pi) * self.radius

    def area(self):
        return math.pi * self.radius ** 2

    def bounds(self):
        cx, cy = self.center
        r = self.radius
        return (cx - r, cy - r, cx + r, cy + r)


class PolygonDomain(_Domain):
    """Polygon with optional holes. Outer ring is made counterclockwise, holes clockwise."""

    kind = "polygon"

    def __init__(self, outer, holes=()):
        rings = [check_points(outer, "outer ring", min_points=3)]
        rings += [check_points(h, "hole ring", min_points=3) for h in holes]
        fixed = []
        for i, ring in enumerate(rings):
            if np.allclose(ring[0], ring[-1]) and len(ring) > 3:
                ring = ring[:-1]
            area = _signed_area(ring)
            if area == 0.0:
                raise ValueError("ring %d is degenerate (zero area)" % i)
            if (i == 0) != (area > 0):
                ring = ring[::-1]
            fixed.append(np.ascontiguousarray(ring))
        self.rings = fixed
        self.half_width = float(max(np.abs(r).max() for r in fixed))
        starts = np.concatenate([r for r in fixed])
        ends = np.concatenate([np.roll(r, -1, axis=0) for r in fixed])
        self._a = starts
        self._b = ends
        self._ring_of_edge = np.concatenate([np.full(len(r), i) for i, r in enumerate(fixed)])
        lengths = np.hypot(*(ends - starts).T)
        self._edge_len = lengths
        self._edge_offset = np.concatenate(
            [np.concatenate([[0.0], np.cumsum(lengths[self._ring_of_edge == i])[:-1]]) for i in range(len(fixed))]
        )

    @property
    def outer(self):
        return self.rings[0]

    @property
    def holes(self):
        return self.rings[1:]

    def __repr__(self):
        return "PolygonDomain(%d outer vertices, %d holes)" % (len(self.outer), len(self.holes))

    def __eq__(self, other):
        return (
            isinstance(other, PolygonDomain)
            and len(self.rings) == len(other.rings)
            and all(np.array_equal(a, b) for a, b in zip(self.rings, other.rings))
        )

    def __hash__(self):
        return hash(tuple(r.tobytes() for r in self.rings))

    def _inside(self, pts):
        out = np.zeros(len(pts), dtype=bool)
        ax, ay = self._a[:, 0], self._a[:, 1]
        bx, by = self._b[:, 0], self._b[:, 1]
        dy = by - ay
        slope = np.divide(bx - ax, dy, out=np.zeros_like(dy), where=dy != 0)
        for i in range(0, len(pts), _CHUNK):
            px = pts[i:i + _CHUNK, 0:1]
            py = pts[i:i + _CHUNK, 1:2]
            straddle = (ay > py) != (by > py)
            xcross = ax + (py - ay) * slope
            out[i:i + _CHUNK] = np.logical_xor.reduce(straddle & (px < xcross), axis=1)
        return out

    def _nearest_edge(self, pts):
        dist = np.empty(len(pts))
        edge = np.empty(len(pts), dtype=int)
        t_best = np.empty(len(pts))
        d = self._b - self._a
        dd = np.maximum(np.einsum("ij,ij->i", d, d), np.finfo(float).tiny)
        for i in range(0, len(pts), _CHUNK):
            p = pts[i:i + _CHUNK]
            rx = p[:, 0:1] - self._a[:, 0]
            ry = p[:, 1:2] - self._a[:, 1]
            t = np.clip((rx * d[:, 0] + ry * d[:, 1]) / dd, 0.0, 1.0)
            ex = rx - t * d[:, 0]
            ey = ry - t * d[:, 1]
            dist2 = ex * ex + ey * ey
            j = np.argmin(dist2, axis=1)
            rows = np.arange(len(p))
            dist[i:i + _CHUNK] = np.sqrt(dist2[rows, j])
            edge[i:i + _CHUNK] = j
            t_best[i:i + _CHUNK] = t[rows, j]
        return dist, edge, t_best

    def distance_to_boundary(self, points):
        pts, scalar = _as_points(points)
        d = self._nearest_edge(pts)[0]
        return float(d[0]) if scalar else d

    def ring_parameter(self, points):
        """Ring index and arc-length position of the nearest boundary point."""
        pts, _ = _as_points(points)
        _, edge, t = self._nearest_edge(pts)
        ring = self._ring_of_edge[edge]
        arc = self._edge_offset[edge] + t * self._edge_len[edge]
        return ring, arc

    def _corners(self, ring):
        prev = ring - np.roll(ring, 1, axis=0)
        nxt = np.roll(ring, -1, axis=0) - ring
        turn = np.abs(
            np.arctan2(prev[:, 0] * nxt[:, 1] - prev[:, 1] * nxt[:, 0], np.einsum("ij,ij->i", prev, nxt))
        )
        idx = np.flatnonzero(turn > CORNER_ANGLE)
        return idx if idx.size else np.array([0])

    def boundary_points(self, spacing):
        """Points along each ring; corners are kept and the arcs between them split evenly."""
        spacing = check_positive(spacing, "target_spacing")
        out = []
        for ring in self.rings:
            n = len(ring)
            corners = self._corners(ring)
            for c_i, start in enumerate(corners):
                stop = corners[(c_i + 1) % len(corners)]
                span = (stop - start) % n or n
                chain = ring[(start + np.arange(span + 1)) % n]
                seg = np.hypot(*np.diff(chain, axis=0).T)
                cum = np.concatenate([[0.0], np.cumsum(seg)])
                pieces = max(1, int(round(cum[-1] / spacing)))
                targets = cum[-1] * np.arange(pieces) / pieces
                j = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(seg) - 1)
                frac = (targets - cum[j]) / np.where(seg[j] > 0, seg[j], 1.0)
                pts = chain[j] + frac[:, None] * (chain[j + 1] - chain[j])
                pts[0] = chain[0]
                out.append(pts)
        return np.concatenate(out)

    def area(self):
        return _signed_area(self.outer) + sum(_signed_area(h) for h in self.holes)

    def bounds(self):
        o = self.outer
        return (o[:, 0].min(), o[:, 1].min(), o[:, 0].max(), o[:, 1].max())


def _as_points(points):
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        return check_points(arr), True
    return check_points(arr), False


def unit_disk():
    return Disk((0.0, 0.0), 1.0)


def l_shape():
    """(-1, 1)^2 with the quadrant [0, 1] x [-1, 0] removed."""
    return PolygonDomain([(-1, -1), (0, -1), (0, 0), (1, 0), (1, 1), (-1, 1)])


def unit_square():
    return PolygonDomain([(0, 0), (1, 0), (1, 1), (0, 1)])


def wavy_domain(n_outer=256, n_hole=64):
    """Outer ring r = 1 + 0.2 sin(6 theta) with two circular holes of radius 0.15 at (+-0.4, 0)."""
    t = 2.0 * math.pi * np.arange(n_outer) / n_outer
    r = 1.0 + 0.2 * np.sin(6.0 * t)
    outer = np.column_stack([r * np.cos(t), r * np.sin(t)])
    u = 2.0 * math.pi * np.arange(n_hole) / n_hole
    holes = [np.column_stack([cx + 0.15 * np.cos(u), 0.15 * np.sin(u)]) for cx in (-0.4, 0.4)]
    return PolygonDomain(outer, holes)


def load_domain(path):
    """Read a polygon domain: blocks of ``ring <n>`` followed by n ``x y`` lines."""
    from .exceptions import ParseError

    rings = []
    with open(path) as fh:
        lines = [(i + 1, ln.split()) for i, ln in enumerate(fh)]
    lines = [(i, toks) for i, toks in lines if toks and not toks[0].startswith("#")]
    pos = 0
    while pos < len(lines):
        lineno, toks = lines[pos]
        if len(toks) != 2 or toks[0] != "ring":
            raise ParseError("expected 'ring <n_vertices>'", lineno, path)
        try:
            n = int(toks[1])
        except ValueError:
            raise ParseError("bad vertex count %r" % toks[1], lineno, path) from None
        if n < 3:
            raise ParseError("a ring needs at least 3 vertices", lineno, path)
        ring = []
        for k in range(n):
            if pos + 1 + k >= len(lines):
                raise ParseError("unexpected end of file inside ring", lineno, path)
            ln, vt = lines[pos + 1 + k]
            try:
                x, y = (float(v) for v in vt)
            except ValueError:
                raise ParseError("expected 'x y'", ln, path) from None
            ring.append((x, y))
        rings.append(ring)
        pos += n + 1
    if not rings:
        raise ParseError("no rings found", None, path)
    return PolygonDomain(rings[0], rings[1:])


def save_domain(domain, path):
    with open(path, "w") as fh:
        for ring in domain.rings:
            fh.write("ring %d\n" % len(ring))
            for x, y in ring:
                fh.write("%r %r\n" % (float(x), float(y)))


def contains(domain, p):
    return domain.contains(p)


def fd_box(domain):
    return domain.fd_box()


def boundary_points(domain, target_spacing):
    return domain.boundary_points(target_spacing)


def distance_to_boundary(domain, p):
    return domain.distance_to_boundary(p)


def boundary_segments(domain, points, indices=None):
    """Chain boundary points into closed rings of segments.

    ``points`` are points lying on the boundary; ``indices`` gives their ids in
    the enclosing cloud (defaults to ``0..len(points)-1``). Points are ordered
    along each ring by arc length and consecutive ones joined, returning an
    ``(m, 2)`` array of index pairs.
    """
    pts = check_points(points, "boundary points")
    if indices is None:
        indices = np.arange(len(pts))
    indices = np.asarray(indices)
    ring, arc = domain.ring_parameter(pts)
    segments = []
    for r in np.unique(ring):
        sel = np.flatnonzero(ring == r)
        if sel.size < 2:
            continue
        order = sel[np.lexsort((indices[sel], arc[sel]))]
        ids = indices[order]
        if ids.size == 2:
            segments.append((ids[0], ids[1]))
            continue
        segments.extend(zip(ids, np.roll(ids, -1)))
    return np.array(segments, dtype=int).reshape(-1, 2)
