from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gofd import _cdt
from gofd.exceptions import DegenerateInput
from gofd.geometry import l_shape, unit_disk, wavy_domain
from gofd.point_cloud import PointCloud, cloud_quasi_uniform, cloud_rings
from gofd.predicates import incircle, orient
from gofd.transfer import Triangulation, build_cdt, save_triangulation

coord = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def exact_orient(a, b, c):
    a, b, c = [(Fraction(x), Fraction(y)) for x, y in (a, b, c)]
    d = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return (d > 0) - (d < 0)


def delaunay_violations(tri):
    """Unconstrained interior edges whose opposite vertex lies inside the other circumcircle."""
    V = tri.vertices
    cons = {tuple(sorted(e)) for e in tri.constrained_edges.tolist()}
    bad = 0
    for t, row in enumerate(tri.triangles):
        for i in range(3):
            u = tri.neighbors[t, i]
            if u < 0 or u < t:
                continue
            e = tuple(sorted((row[(i + 1) % 3], row[(i + 2) % 3])))
            if e in cons:
                continue
            opp = [v for v in tri.triangles[u] if v not in e][0]
            a, b, c = V[row]
            if incircle(*a, *b, *c, *V[opp]) > 0:
                bad += 1
    return bad


class TestPredicates:
    @given(coord, coord, coord, coord, coord, coord)
    def test_orient_sign_exact(self, ax, ay, bx, by, cx, cy):
        assert np.sign(orient(ax, ay, bx, by, cx, cy)) == exact_orient((ax, ay), (bx, by), (cx, cy))

    def test_orient_near_degenerate(self):
        # nearly collinear points where naive evaluation is unreliable
        a, b = (0.5, 0.5), (12.0, 12.0)
        for k in range(-5, 6):
            c = (24.0 + k * 2.0 ** -48, 24.0)
            assert np.sign(orient(*a, *b, *c)) == exact_orient(a, b, c)

    def test_incircle_cocircular(self):
        assert incircle(1, 0, 0, 1, -1, 0, 0, -1) == 0.0
        assert incircle(1, 0, 0, 1, -1, 0, 0, 0) > 0
        assert incircle(1, 0, 0, 1, -1, 0, 0, -1.0000001) < 0


class TestTriangulate:
    def test_square(self):
        sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        tris, _ = _cdt.triangulate(sq)
        assert len(tris) == 2
        tri = Triangulation(sq, tris)
        assert np.all(tri.signed_areas() > 0)
        assert tri.area() == pytest.approx(1.0)

    def test_collinear_rejected(self):
        with pytest.raises(DegenerateInput):
            _cdt.triangulate(np.array([[0, 0], [1, 1], [2, 2]], dtype=float))

    def test_duplicate_rejected(self):
        with pytest.raises(DegenerateInput):
            _cdt.triangulate(np.array([[0, 0], [1, 0], [0, 1], [1, 0]], dtype=float))

    def test_lattice_cocircular(self):
        X, Y = np.meshgrid(np.arange(11.0), np.arange(11.0))
        pts = np.column_stack([X.ravel(), Y.ravel()])
        tris, _ = _cdt.triangulate(pts)
        assert len(tris) == 200
        assert Triangulation(pts, tris).area() == pytest.approx(100.0)

    def test_deterministic(self):
        pts = cloud_quasi_uniform(unit_disk(), 200, seed=1).points
        a, _ = _cdt.triangulate(pts)
        b, _ = _cdt.triangulate(pts)
        np.testing.assert_array_equal(a, b)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 31), st.integers(4, 80))
    def test_random_delaunay(self, seed, n):
        pts = np.random.default_rng(seed).uniform(-1, 1, (n, 2))
        tris, cons = _cdt.triangulate(pts)
        tri = Triangulation(pts, tris, np.array(sorted(tuple(sorted(e)) for e in cons), dtype=np.int64).reshape(-1, 2))
        assert np.all(tri.signed_areas() > 0)
        assert delaunay_violations(tri) == 0
        # Euler: the triangles tile the convex hull
        from scipy.spatial import ConvexHull

        assert tri.area() == pytest.approx(ConvexHull(pts).volume, rel=1e-12)


class TestBuildCdt:
    @pytest.mark.parametrize("J", [10, 20])
    def test_rings_delaunay(self, J):
        c = cloud_rings(J)
        tri = build_cdt(c)
        assert np.all(tri.signed_areas() > 0)
        assert delaunay_violations(tri) == 0
        assert sorted(np.unique(tri.triangles)) == list(range(c.n_points))

    def test_lshape_removed_quadrant(self):
        c = cloud_quasi_uniform(l_shape(), 600, seed=4)
        tri = build_cdt(c)
        cen = tri.centroids()
        assert not np.any((cen[:, 0] > 0) & (cen[:, 1] < 0))
        assert tri.area() == pytest.approx(3.0, rel=1e-12)
        assert delaunay_violations(tri) == 0

    def test_constraints_present(self):
        c = cloud_quasi_uniform(l_shape(), 400, seed=5)
        tri = build_cdt(c)
        edges = {tuple(e) for e in tri.edges().tolist()}
        for e in tri.constrained_edges.tolist():
            assert tuple(sorted(e)) in edges

    def test_holes(self):
        c = cloud_quasi_uniform(wavy_domain(), 800, seed=2)
        tri = build_cdt(c)
        # the cloud's boundary chords cut the curved rings, so only approximately the domain area
        assert tri.area() == pytest.approx(wavy_domain().area(), rel=1e-2)
        assert np.all(wavy_domain().contains(tri.centroids()))
        assert not np.any(np.hypot(*(tri.centroids() - [0.4, 0]).T) < 0.14)

    def test_save(self, tmp_path):
        c = cloud_rings(4)
        tri = build_cdt(c)
        p = tmp_path / "t.tri"
        save_triangulation(tri, p)
        lines = p.read_text().split("\n")
        assert lines[0] == "tri %d %d" % (c.n_points, tri.n_triangles)
        assert min(int(v) for ln in lines[1 + c.n_points:] if ln for v in ln.split()) == 1


class TestLocate:
    def test_locate_and_interpolate(self, disk_cloud_300, rng):
        tri = build_cdt(disk_cloud_300)
        q = rng.uniform(-0.6, 0.6, (200, 2))
        k = tri.locate(q)
        assert np.all(k >= 0)
        lam = tri.barycentric(k, q)
        assert np.all(lam.min(axis=1) >= -1e-12)
        f = 2 * disk_cloud_300.points[:, 0] - disk_cloud_300.points[:, 1] + 0.5
        np.testing.assert_allclose(tri.interpolate(f, q), 2 * q[:, 0] - q[:, 1] + 0.5, atol=1e-12)

    def test_outside_nan(self, disk_cloud_300):
        tri = build_cdt(disk_cloud_300)
        assert np.isnan(tri.interpolate(np.zeros(disk_cloud_300.n_points), np.array([[2.0, 2.0]])))[0]
