"""Meshfree grid-overlay finite differences (GoFD) for the fractional Laplacian.

Solves (-Delta)^s u = f on a bounded 2D domain with u = 0 outside, given
only a point cloud: cloud values are transferred to an overlaid uniform grid
(moving least squares or constrained Delaunay interpolation), where the
fractional operator acts as an FFT convolution.
"""

from .error_metrics import ConvergenceReport, exact_disk_solution, fit_order, l2_error, reference_error
from .estimators import CloudToGridTransformer, GoFDSolver
from .exceptions import GofdError
from .fd_operator import FdOperator, GridVector, UniformGrid, build_operator
from .geometry import Disk, PolygonDomain, l_shape, unit_disk, unit_square, wavy_domain
from .point_cloud import (
    NeighborIndex,
    PointCloud,
    cloud_from_mesh_file,
    cloud_graded,
    cloud_grid_interior,
    cloud_quasi_uniform,
    cloud_rings,
    min_distance,
    perturb,
)
from .solver import FractionalProblem, SolveReport, assemble, check_solvability, gofd_apply, size_grid, solve
from .spectral_kernel import FractionalOrder, StencilTable, compute_stencil, symbol
from .transfer import TransferMatrix, Triangulation, build_cdt, build_transfer, linear_interp_weights, mls_weights

__version__ = "0.1.0"
