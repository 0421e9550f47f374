"""scikit-learn style wrappers over the functional API.

``GoFDSolver`` solves (-Delta)^s u = f on a point cloud and predicts the
piecewise linear interpolant of the solution; ``CloudToGridTransformer``
maps cloud value vectors to the overlay grid.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int, check_order, check_points, check_positive
from .point_cloud import PointCloud
from .solver import DEFAULT_MAX_GRID_NODES, DEFAULT_TOL, FractionalProblem, assemble, size_grid, solve
from .transfer import build_cdt, build_transfer

__all__ = ["GoFDSolver", "CloudToGridTransformer"]

_METHODS = ("mls", "delaunay")


def _as_cloud(X, domain):
    if isinstance(X, PointCloud):
        if domain is not None and X.domain is None:
            return PointCloud(X.points, X.n_interior, domain)
        if X.domain is None:
            raise ValueError("the point cloud has no domain; pass domain=...")
        return X
    if domain is None:
        raise ValueError("raw point arrays need a domain to tag interior and boundary points")
    pts = check_points(X, "X", min_points=3)
    return PointCloud.from_points(pts, domain)


def _check_method(method):
    if method not in _METHODS:
        raise ValueError("method must be one of %s, got %r" % (_METHODS, method))
    return method


class GoFDSolver(RegressorMixin, BaseEstimator):
    """Meshfree grid-overlay solver for the fractional Laplacian.

    Parameters
    ----------
    s : float
        Order in (0, 1).
    method : {"mls", "delaunay"}
        Cloud-to-grid transfer.
    n_neighbors : int
        Neighbours per MLS fit.
    tol : float
        CG relative-residual tolerance.
    fd_box_factor : float
        Overlay box half width relative to the domain half width.
    max_iter : int or None
        CG iteration cap (default 10 x number of unknowns).
    max_grid_nodes : int
        Refuse grids larger than this.

    ``fit(X, y=None, domain=None)`` takes the cloud (a ``PointCloud`` or an
    ``(n, 2)`` array plus ``domain``) and the source values ``y`` at its
    points; ``y=None`` means f = 1.
    """

    def __init__(self, s=0.5, method="mls", n_neighbors=5, tol=DEFAULT_TOL, fd_box_factor=1.2, max_iter=None,
                 max_grid_nodes=DEFAULT_MAX_GRID_NODES):
        self.s = s
        self.method = method
        self.n_neighbors = n_neighbors
        self.tol = tol
        self.fd_box_factor = fd_box_factor
        self.max_iter = max_iter
        self.max_grid_nodes = max_grid_nodes

    def _problem(self, cloud, y):
        s = check_order(self.s)
        if y is None:
            f = 1.0
        else:
            vals = np.asarray(y, dtype=float).reshape(-1)
            if vals.size != cloud.n_points:
                raise ValueError("y has %d values, the cloud has %d points" % (vals.size, cloud.n_points))
            lookup = {tuple(p): v for p, v in zip(cloud.points, vals)}

            def f(pts):
                return np.array([lookup[tuple(p)] for p in pts])

        return FractionalProblem(cloud.domain, s, f, check_positive(self.fd_box_factor, "fd_box_factor"))

    def fit(self, X, y=None, domain=None):
        _check_method(self.method)
        check_int(self.n_neighbors, "n_neighbors", minimum=3)
        cloud = _as_cloud(X, domain)
        problem = self._problem(cloud, y)
        tri = build_cdt(cloud)
        report = solve(problem, cloud, self.method, n=self.n_neighbors, tol=self.tol, max_iter=self.max_iter,
                       max_grid_nodes=self.max_grid_nodes, triangulation=tri if self.method == "delaunay" else None)
        self.cloud_ = cloud
        self.triangulation_ = tri
        self.report_ = report
        self.solution_ = report.full_solution(cloud)
        self.n_iter_ = report.iterations
        self.h_fd_ = report.h_FD
        self.n_fd_ = report.N_FD
        return self

    def predict(self, X):
        """Piecewise linear interpolant of the solution; zero outside the triangulated region."""
        check_is_fitted(self, "solution_")
        pts = check_points(X, "X")
        out = self.triangulation_.interpolate(self.solution_, pts)
        return np.nan_to_num(out, nan=0.0)

    def score(self, X, y, sample_weight=None):
        return super().score(X, y, sample_weight=sample_weight)


class CloudToGridTransformer(TransformerMixin, BaseEstimator):
    """Map cloud value vectors to overlay-grid vectors with the transfer matrix.

    ``fit`` takes the cloud; ``transform`` takes an array of shape
    ``(n_samples, N_v)`` (or a single vector) and returns grid vectors.
    """

    def __init__(self, method="mls", n_neighbors=5, fd_box_factor=1.2, domain=None,
                 max_grid_nodes=DEFAULT_MAX_GRID_NODES):
        self.method = method
        self.n_neighbors = n_neighbors
        self.fd_box_factor = fd_box_factor
        self.domain = domain
        self.max_grid_nodes = max_grid_nodes

    def fit(self, X, y=None):
        _check_method(self.method)
        cloud = _as_cloud(X, self.domain)
        R = cloud.domain.fd_box(check_positive(self.fd_box_factor, "fd_box_factor"))
        grid = size_grid(cloud, R, self.max_grid_nodes)
        self.cloud_ = cloud
        self.grid_ = grid
        self.transfer_ = build_transfer(cloud, grid, self.method, cloud.domain,
                                        n=check_int(self.n_neighbors, "n_neighbors", minimum=3))
        self.n_features_in_ = cloud.n_points
        return self

    def transform(self, X):
        check_is_fitted(self, "transfer_")
        U = np.asarray(X, dtype=float)
        single = U.ndim == 1
        U = np.atleast_2d(U)
        if U.shape[1] != self.n_features_in_:
            raise ValueError("expected %d cloud values per sample, got %d" % (self.n_features_in_, U.shape[1]))
        G = (self.transfer_.matrix @ U.T).T
        return G[0] if single else G

    def inverse_gather(self, G):
        """Apply the transpose (grid -> cloud gather)."""
        check_is_fitted(self, "transfer_")
        G = np.atleast_2d(np.asarray(G, dtype=float))
        return (self.transfer_.matrix.T @ G.T).T
