import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gofd.exceptions import CgStalled, GridTooLarge, SingularD
from gofd.fd_operator import UniformGrid
from gofd.geometry import l_shape, unit_disk
from gofd.point_cloud import PointCloud, cloud_quasi_uniform, cloud_rings
from gofd.solver import (
    FractionalProblem,
    SolveReport,
    assemble,
    check_solvability,
    gofd_apply,
    save_solution,
    size_grid,
    solve,
)
from gofd.transfer import build_transfer


def two_point_cloud(d):
    return PointCloud(np.array([[0.0, 0.0], [d, 0.0]]), 2)


class TestSizeGrid:
    @pytest.mark.parametrize("d, R, h, N", [(0.2, 1.2, 0.1, 13), (2.4, 1.2, 1.2, 2)])
    def test_examples(self, d, R, h, N):
        g = size_grid(two_point_cloud(d), R)
        assert g.n == N
        assert g.spacing <= h * (1 + 1e-12)

    @given(st.floats(1e-2, 1.0), st.floats(0.5, 3.0))
    def test_spacing_bound(self, d, R):
        g = size_grid(two_point_cloud(d), R)
        assert g.spacing <= 0.5 * d * (1 + 1e-12)

    def test_cap(self):
        with pytest.raises(GridTooLarge):
            size_grid(two_point_cloud(1e-4), 1.2, max_nodes=10 ** 6)


class TestSolvability:
    @pytest.mark.parametrize("factor, status", [(0.2, "sufficient"), (1.0, "heuristic"), (2.0, "unverified")])
    def test_classes(self, factor, status):
        c = two_point_cloud(1.0)
        N = max(1, round(1.0 / factor))
        grid = UniformGrid(factor * N, N)
        assert check_solvability(c, grid, a_h=1.0) == status


@pytest.fixture(scope="module")
def small_system():
    cloud = cloud_rings(6)
    problem = FractionalProblem(unit_disk(), 0.5)
    return cloud, assemble(problem, cloud, "mls")


class TestApply:
    def test_zero(self, small_system):
        _, sys_ = small_system
        assert not np.any(gofd_apply(sys_, np.zeros(sys_.n_unknowns)))

    def test_symmetric(self, small_system, rng):
        _, sys_ = small_system
        v, w = rng.standard_normal((2, sys_.n_unknowns))
        assert v @ gofd_apply(sys_, w) == pytest.approx(w @ gofd_apply(sys_, v), rel=1e-11)

    def test_dense_oracle(self, small_system, rng):
        _, sys_ = small_system
        M = sys_.to_dense()
        for _ in range(3):
            v = rng.standard_normal(sys_.n_unknowns)
            ref = M @ v
            assert np.max(np.abs(gofd_apply(sys_, v) - ref)) / np.max(np.abs(ref)) < 1e-12

    def test_rhs_scaling(self, small_system):
        _, sys_ = small_system
        np.testing.assert_allclose(sys_.rhs, sys_.grid.spacing * sys_.D)

    def test_singular_d(self):
        # a grid so coarse that some interior cloud point receives no weight
        cloud = cloud_rings(12)
        problem = FractionalProblem(unit_disk(), 0.5)
        grid = UniformGrid(1.2, 2)
        with pytest.raises(SingularD) as exc:
            assemble(problem, cloud, "delaunay", grid=grid)
        assert len(exc.value.indices) > 0


class TestSolve:
    def test_zero_source(self):
        rep = solve(FractionalProblem(unit_disk(), 0.5, 0.0), cloud_rings(8))
        assert not np.any(rep.solution)
        assert rep.iterations <= 1

    @pytest.mark.parametrize("method", ["mls", "delaunay"])
    def test_residual_and_positivity(self, method):
        cloud = cloud_rings(12)
        rep = solve(FractionalProblem(unit_disk(), 0.5), cloud, method)
        assert rep.final_relative_residual <= 1e-10
        assert np.all(rep.solution > 0)
        # the value at the origin approaches 2/pi
        assert rep.solution[0] == pytest.approx(2 / math.pi, rel=0.1)

    def test_callable_source_linear(self):
        cloud = cloud_rings(8)
        a = solve(FractionalProblem(unit_disk(), 0.3, 1.0), cloud, tol=1e-12)
        b = solve(FractionalProblem(unit_disk(), 0.3, lambda p: 3.0 * np.ones(len(p))), cloud, tol=1e-12)
        np.testing.assert_allclose(b.solution, 3 * a.solution, rtol=1e-9)

    def test_stall(self):
        with pytest.raises(CgStalled) as exc:
            solve(FractionalProblem(unit_disk(), 0.5), cloud_rings(10), max_iter=2)
        assert exc.value.iterations == 2

    def test_polygon_domain(self):
        cloud = cloud_quasi_uniform(l_shape(), 300, seed=1)
        rep = solve(FractionalProblem(l_shape(), 0.5), cloud, "delaunay")
        assert np.all(rep.solution > 0)

    def test_report_round_trip(self, tmp_path):
        cloud = cloud_rings(6)
        rep = solve(FractionalProblem(unit_disk(), 0.5), cloud)
        path = tmp_path / "r.json"
        rep.to_json(path)
        back = SolveReport.from_dict(json.loads(path.read_text()))
        np.testing.assert_array_equal(back.solution, rep.solution)
        assert back.N_FD == rep.N_FD
        save_solution(rep, cloud, tmp_path / "u.txt")
        rows = np.loadtxt(tmp_path / "u.txt")
        assert rows.shape == (cloud.n_points, 3)
        assert not np.any(rows[cloud.n_interior:, 2])


@settings(max_examples=8, deadline=None)
@given(st.sampled_from([0.25, 0.5, 0.75]), st.integers(0, 100))
def test_solution_positive_on_perturbed_rings(s, seed):
    from gofd.point_cloud import perturb

    cloud = perturb(cloud_rings(8), 0.4 * cloud_rings(8).h_bar, seed=seed)
    rep = solve(FractionalProblem(unit_disk(), s), cloud, "delaunay")
    assert np.all(rep.solution > 0)
