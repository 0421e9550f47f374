"""Assembly and matrix-free solution of the GoFD system.

With the transfer ``I`` (grid x interior cloud points), the overlay operator
``A`` (stencil, unscaled) and ``D = diag(column sums of I)``, the cloud values
``u`` solve

    I^T A I u = h^(2s) D f.
"""

import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from ._validation import check_int, check_order, check_positive, check_vector
from .exceptions import CgStalled, GridTooLarge, SingularD
from .fd_operator import UniformGrid, build_operator
from .transfer import build_transfer

__all__ = [
    "FractionalProblem",
    "GofdSystem",
    "SolveReport",
    "size_grid",
    "check_solvability",
    "assemble",
    "gofd_apply",
    "solve",
    "save_solution",
]

_LOG = logging.getLogger(__name__)

DEFAULT_MAX_GRID_NODES = 2 ** 26
DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class FractionalProblem:
    """(-Delta)^s u = f in the domain, u = 0 outside.

    ``f`` is a constant or a callable taking an ``(m, 2)`` array of points.
    """

    domain: object
    s: float
    f: object = 1.0
    fd_box_factor: float = 1.2

    def __post_init__(self):
        object.__setattr__(self, "s", check_order(self.s))

    def rhs_values(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if callable(self.f):
            vals = np.asarray(self.f(pts), dtype=float)
            return np.broadcast_to(vals, (len(pts),)).astype(float)
        return np.full(len(pts), float(self.f))

    @property
    def fd_half_width(self):
        return self.domain.fd_box(self.fd_box_factor)


def size_grid(cloud, R_FD, max_nodes=DEFAULT_MAX_GRID_NODES):
    """Grid on ``[-R_FD, R_FD]^2`` with spacing at most half the cloud's minimum distance."""
    R_FD = check_positive(R_FD, "R_FD")
    if cloud.n_points < 2:
        raise ValueError("sizing the grid needs at least 2 cloud points")
    h = 0.5 * cloud.min_pairwise_distance
    # absorb round-off in R/h (1.2 / 0.1 = 11.999...); a larger N only refines the grid
    N = int(math.floor(R_FD / h * (1.0 + 1e-12))) + 1
    nodes = (2 * N + 1) ** 2
    if nodes > max_nodes:
        raise GridTooLarge("grid would have %d nodes (N_FD=%d), cap is %d" % (nodes, N, max_nodes))
    return UniformGrid(R_FD, N)


def check_solvability(cloud, grid, a_h=None):
    """Classify the grid spacing against the full-column-rank condition.

    ``a_h`` is the minimum element height when a mesh exists; the cloud's
    minimum pairwise distance stands in otherwise.
    """
    a_h = cloud.min_pairwise_distance if a_h is None else check_positive(a_h, "a_h")
    h = grid.spacing
    if h <= a_h / (3.0 * math.sqrt(2.0)):
        return "sufficient"
    if h <= a_h:
        return "heuristic"
    return "unverified"


@dataclass(eq=False)
class GofdSystem:
    s: float
    grid: UniformGrid
    op: object
    transfer: object  # restricted to interior columns
    D: np.ndarray
    rhs: np.ndarray

    @property
    def n_unknowns(self):
        return len(self.D)

    def apply(self, v):
        return gofd_apply(self, v)

    def as_linear_operator(self):
        n = self.n_unknowns
        return spla.LinearOperator((n, n), matvec=self.apply, dtype=float)

    def to_dense(self):
        """Dense I^T A I (small grids only)."""
        I = self.transfer.toarray()
        return I.T @ self.op.to_dense() @ I


def gofd_apply(system, v):
    """``I^T (A (I v))``: sparse scatter, FFT convolution, sparse gather."""
    v = check_vector(v, system.n_unknowns, "interior vector")
    g = system.transfer.apply(v)
    return system.transfer.apply_transpose(system.op.apply(g))


def assemble(problem, cloud, method="mls", n=5, grid=None, transfer=None, max_grid_nodes=DEFAULT_MAX_GRID_NODES,
             stencil_kwargs=None, triangulation=None):
    """Build the symmetric GoFD system for ``problem`` on ``cloud``."""
    if grid is None:
        grid = size_grid(cloud, problem.fd_half_width, max_grid_nodes)
    if transfer is None:
        transfer = build_transfer(cloud, grid, method, problem.domain, n=n, triangulation=triangulation)
    interior = np.arange(cloud.n_interior)
    It = transfer.restrict_columns(interior)
    D = np.array(It.column_sums, dtype=float)
    bad = np.flatnonzero(D <= 0)
    if bad.size:
        raise SingularD(
            "%d interior column sum(s) are not positive (first cloud indices: %s)"
            % (bad.size, ", ".join(str(int(i)) for i in bad[:10])),
            indices=bad,
        )
    op = build_operator(grid, problem.s, **(stencil_kwargs or {}))
    f = problem.rhs_values(cloud.interior)
    rhs = grid.spacing ** (2.0 * problem.s) * D * f
    return GofdSystem(problem.s, grid, op, It, D, rhs)


@dataclass(eq=False)
class SolveReport:
    solution: np.ndarray
    iterations: int
    final_relative_residual: float
    h_FD: float
    N_FD: int
    wall_time: float
    warnings: list = field(default_factory=list)

    FIELDS = ("solution", "iterations", "final_relative_residual", "h_FD", "N_FD", "wall_time", "warnings")

    def to_dict(self):
        return {
            "solution": [float(v) for v in self.solution],
            "iterations": int(self.iterations),
            "final_relative_residual": float(self.final_relative_residual),
            "h_FD": float(self.h_FD),
            "N_FD": int(self.N_FD),
            "wall_time": float(self.wall_time),
            "warnings": list(self.warnings),
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["solution"], dtype=float), d["iterations"], d["final_relative_residual"],
                   d["h_FD"], d["N_FD"], d["wall_time"], list(d.get("warnings", [])))

    def full_solution(self, cloud):
        """Values on every cloud point (boundary entries zero)."""
        u = np.zeros(cloud.n_points)
        u[: cloud.n_interior] = self.solution
        return u


def _cg(system, tol, max_iter):
    b = system.rhs
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.cg(system.as_linear_operator(), b, x0=np.zeros_like(b), rtol=tol, atol=0.0,
                      maxiter=max_iter, callback=cb)
    res = float(np.linalg.norm(b - system.apply(x)) / bnorm)
    if info != 0 or res > tol * (1.0 + 1e-6):
        raise CgStalled(
            "CG stopped after %d iterations at relative residual %.3e (tolerance %.1e)" % (count[0], res, tol),
            iterations=count[0],
            relative_residual=res,
        )
    return x, count[0], res


def solve(problem, cloud, method="mls", n=5, tol=DEFAULT_TOL, max_iter=None, max_grid_nodes=DEFAULT_MAX_GRID_NODES,
          stencil_kwargs=None, triangulation=None):
    """Solve ``problem`` on ``cloud``; returns a :class:`SolveReport`."""
    t0 = time.perf_counter()
    tol = check_positive(tol, "tol")
    system = assemble(problem, cloud, method, n=n, max_grid_nodes=max_grid_nodes, stencil_kwargs=stencil_kwargs,
                      triangulation=triangulation)
    warnings = []
    status = check_solvability(cloud, system.grid)
    if status != "sufficient":
        warnings.append("solvability condition is %s for h_FD=%.4g" % (status, system.grid.spacing))
    if system.transfer.n_uncovered:
        warnings.append("%d interior grid node(s) not covered by the triangulation" % system.transfer.n_uncovered)
    if max_iter is None:
        max_iter = 10 * max(1, system.n_unknowns)
    max_iter = check_int(max_iter, "max_iter", minimum=1)
    u, its, res = _cg(system, tol, max_iter)
    f = problem.rhs_values(cloud.interior)
    if np.all(f >= 0) and np.any(u < 0):
        warnings.append("%d solution value(s) are negative for a nonnegative source" % int(np.sum(u < 0)))
    for w in warnings:
        _LOG.info(w)
    return SolveReport(u, its, res, system.grid.spacing, system.grid.n, time.perf_counter() - t0, warnings)


def save_solution(report, cloud, path):
    """Write ``x y u`` lines: interior points, then boundary points with u = 0."""
    u = report.full_solution(cloud)
    with open(path, "w") as fh:
        for (x, y), v in zip(cloud.points, u):
            fh.write("%r %r %r\n" % (float(x), float(y), float(v)))
