import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gofd import CloudToGridTransformer, GoFDSolver, cloud_rings, exact_disk_solution, unit_disk
from gofd.exceptions import SingularD


class TestGoFDSolver:
    def test_params_round_trip(self):
        est = GoFDSolver(s=0.3, method="delaunay", n_neighbors=7)
        c = clone(est)
        assert c.get_params() == est.get_params()
        assert c.set_params(tol=1e-8).tol == 1e-8

    @pytest.mark.parametrize("method", ["mls", "delaunay"])
    def test_fit_predict(self, method):
        cloud = cloud_rings(16)
        est = GoFDSolver(s=0.5, method=method).fit(cloud)
        assert est.n_iter_ > 0 and est.n_fd_ > 0
        q = np.array([[0.0, 0.0], [0.3, 0.2], [2.0, 0.0]])
        u = est.predict(q)
        assert u[0] == pytest.approx(2 / math.pi, rel=0.05)
        assert u[2] == 0.0
        assert est.score(cloud.interior, exact_disk_solution(0.5, cloud.interior)) > 0.9

    def test_raw_points_need_domain(self):
        pts = cloud_rings(8).points
        with pytest.raises(ValueError):
            GoFDSolver().fit(pts)
        est = GoFDSolver().fit(pts, domain=unit_disk())
        assert est.cloud_.n_interior == cloud_rings(8).n_interior

    def test_source_values(self):
        cloud = cloud_rings(8)
        a = GoFDSolver(tol=1e-12).fit(cloud)
        b = GoFDSolver(tol=1e-12).fit(cloud, 2.0 * np.ones(cloud.n_points))
        np.testing.assert_allclose(b.solution_, 2 * a.solution_, rtol=1e-9)

    def test_source_length_checked(self):
        with pytest.raises(ValueError):
            GoFDSolver().fit(cloud_rings(8), np.ones(3))

    @pytest.mark.parametrize("kw", [dict(method="fem"), dict(s=1.5), dict(n_neighbors=2)])
    def test_bad_params(self, kw):
        with pytest.raises(ValueError):
            GoFDSolver(**kw).fit(cloud_rings(6))

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            GoFDSolver().predict(np.zeros((1, 2)))


class TestCloudToGrid:
    def test_transform_shapes(self):
        cloud = cloud_rings(8)
        tr = CloudToGridTransformer(method="delaunay").fit(cloud)
        one = tr.transform(np.ones(cloud.n_points))
        assert one.shape == (tr.grid_.n_nodes,)
        many = tr.transform(np.ones((3, cloud.n_points)))
        assert many.shape == (3, tr.grid_.n_nodes)
        rows = tr.transfer_.nonzero_rows()
        np.testing.assert_allclose(one[rows], 1.0)

    def test_adjoint(self, rng):
        cloud = cloud_rings(8)
        tr = CloudToGridTransformer().fit(cloud)
        u = rng.standard_normal(cloud.n_points)
        g = rng.standard_normal(tr.grid_.n_nodes)
        assert g @ tr.transform(u) == pytest.approx((tr.inverse_gather(g) @ u)[0], rel=1e-12)

    def test_wrong_width(self):
        tr = CloudToGridTransformer().fit(cloud_rings(6))
        with pytest.raises(ValueError):
            tr.transform(np.ones(4))
