"""Matrix-free uniform-grid operator A_FD for the fractional Laplacian.

``A[(j,k),(m,n)] = T[j-m, k-n]`` on the nodes ``(j, k)`` of
``[-N, N]^2``, i.e. a block-Toeplitz matrix with Toeplitz blocks. The
product with a grid vector is a linear convolution with the stencil, done
here by zero-padded FFT. The ``1 / h**(2s)`` scaling is left to callers.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft

from ._validation import check_int, check_positive
from .exceptions import GridMismatch, TooLargeForOracle
from .spectral_kernel import compute_stencil

__all__ = ["UniformGrid", "GridVector", "FdOperator", "build_operator", "apply", "apply_dense_oracle"]

ORACLE_MAX_N = 32


@dataclass(frozen=True)
class UniformGrid:
    """Square grid with ``2N+1`` nodes per axis and spacing ``half_width / N``.

    Node ``(j, k)`` sits at ``(j h, k h)``; flattened vectors are row-major
    with ``j`` outer and ``k`` inner.
    """

    half_width: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "half_width", check_positive(self.half_width, "half_width"))
        object.__setattr__(self, "n", check_int(self.n, "n", minimum=1))

    @property
    def spacing(self):
        return self.half_width / self.n

    @property
    def size(self):
        return 2 * self.n + 1

    @property
    def n_nodes(self):
        return self.size ** 2

    def axis(self):
        return np.arange(-self.n, self.n + 1) * self.spacing

    def nodes(self):
        """Coordinates of all nodes, shape ``(n_nodes, 2)``, in vector order."""
        x = self.axis()
        X, Y = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def flat_index(self, j, k):
        return (np.asarray(j) + self.n) * self.size + (np.asarray(k) + self.n)


@dataclass(frozen=True, eq=False)
class GridVector:
    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.size != self.grid.n_nodes:
            raise GridMismatch(
                "grid vector has %d values, grid has %d nodes" % (values.size, self.grid.n_nodes)
            )
        object.__setattr__(self, "values", values)

    def as_array(self):
        return self.values.reshape(self.grid.size, self.grid.size)


class FdOperator:
    """A_FD on ``grid`` with a cached frequency-domain image of the stencil.

    Immutable after construction; :meth:`apply` allocates its own buffers, so
    concurrent calls are safe.
    """

    def __init__(self, grid, stencil):
        if stencil.half_extent < 2 * grid.n:
            raise ValueError(
                "stencil half extent %d is below 2N = %d" % (stencil.half_extent, 2 * grid.n)
            )
        self.grid = grid
        self.stencil = stencil.truncated(2 * grid.n) if stencil.half_extent > 2 * grid.n else stencil
        self.s = stencil.s
        N = grid.n
        # offsets d in [-2N, 2N] stay distinct modulo L for any L >= 4N + 1
        self.padded_size = scipy.fft.next_fast_len(4 * N + 2, real=True)
        L = self.padded_size
        kernel = np.zeros((L, L))
        idx = np.arange(-2 * N, 2 * N + 1) % L
        kernel[np.ix_(idx, idx)] = self.stencil.values
        image = scipy.fft.rfft2(kernel)
        # the kernel is even, so its transform is real up to rounding
        self.padded_symbol_fft = np.ascontiguousarray(image.real)
        self.padded_symbol_fft.setflags(write=False)

    def __repr__(self):
        return "FdOperator(N=%d, s=%r, padded_size=%d)" % (self.grid.n, self.s, self.padded_size)

    @property
    def shape(self):
        return (self.grid.n_nodes, self.grid.n_nodes)

    def _values(self, u):
        if isinstance(u, GridVector):
            if u.grid != self.grid:
                raise GridMismatch("grid vector lives on %r, operator on %r" % (u.grid, self.grid))
            return u.values
        arr = np.asarray(u, dtype=float)
        if arr.shape not in ((self.grid.n_nodes,), (self.grid.size, self.grid.size)):
            raise GridMismatch(
                "expected %d grid values, got array of shape %s" % (self.grid.n_nodes, arr.shape)
            )
        return arr.reshape(-1)

    def _wrap(self, u, out):
        if isinstance(u, GridVector):
            return GridVector(self.grid, out)
        return out.reshape(np.shape(u))

    def apply(self, u):
        """Return ``A_FD u`` by zero-padded FFT convolution."""
        vals = self._values(u)
        n, L = self.grid.size, self.padded_size
        spec = scipy.fft.rfft2(vals.reshape(n, n), s=(L, L))
        spec *= self.padded_symbol_fft
        out = scipy.fft.irfft2(spec, s=(L, L))[:n, :n]
        return self._wrap(u, np.ascontiguousarray(out).reshape(-1))

    def matvec(self, u):
        return self.apply(u)

    def apply_dense_oracle(self, u):
        """Direct double sum over the grid, for testing. Limited to ``N <= 32``."""
        N = self.grid.n
        if N > ORACLE_MAX_N:
            raise TooLargeForOracle("dense oracle is limited to N <= %d, got %d" % (ORACLE_MAX_N, N))
        vals = self._values(u).reshape(2 * N + 1, 2 * N + 1)
        T = self.stencil.values  # T[j-m, k-n] at [j - m + 2N, k - n + 2N]
        out = np.zeros((2 * N + 1, 2 * N + 1))
        for m in range(-N, N + 1):
            for n in range(-N, N + 1):
                out += vals[m + N, n + N] * T[N - m:3 * N - m + 1, N - n:3 * N - n + 1]
        return self._wrap(u, out.reshape(-1))

    def to_dense(self):
        """Materialize A_FD (only sensible for small grids)."""
        N = self.grid.n
        j = np.arange(-N, N + 1)
        J, K = np.meshgrid(j, j, indexing="ij")
        J, K = J.ravel(), K.ravel()
        P = 2 * N
        return self.stencil.values[J[:, None] - J[None, :] + P, K[:, None] - K[None, :] + P].copy()


def build_operator(grid, s, **stencil_kwargs):
    """Build A_FD on ``grid`` for order ``s`` (stencil half extent ``2N``)."""
    stencil = compute_stencil(s, 2 * grid.n, **stencil_kwargs)
    return FdOperator(grid, stencil)


def apply(op, u):
    return op.apply(u)


def apply_dense_oracle(op, u):
    return op.apply_dense_oracle(u)
