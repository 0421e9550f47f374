"""Fourier-coefficient stencil of the fractional discrete Laplacian.

The uniform-grid approximation of (-Delta)^s has the Fourier multiplier

    S(xi, eta) = (4 sin^2(xi / 2) + 4 sin^2(eta / 2)) ** s

on [-pi, pi]^2 (grid spacing scaled to one). Its Fourier-series coefficients
``T[p, q]`` form the convolution stencil of the operator. They are computed
here with a rectangle rule on a half-cell shifted M x M grid, evaluated by FFT.
"""

import functools
import logging
import os
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from ._validation import check_int, check_order
from .exceptions import QuadratureNotConverged, ResolutionTooLow

__all__ = [
    "FractionalOrder",
    "StencilTable",
    "symbol",
    "compute_stencil",
    "default_resolution",
    "save_stencil",
    "load_stencil",
]

_LOG = logging.getLogger(__name__)

CACHE_MAGIC = b"GOFDSTN1"
CONVERGENCE_RTOL = 1e-10
IMAG_RTOL = 1e-10
_ROW_BLOCK = 256


@dataclass(frozen=True)
class FractionalOrder:
    """Order ``s`` of the fractional Laplacian, restricted to 0 < s < 1."""

    s: float
    is_limit: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "s", check_order(self.s, allow_limits=self.is_limit))

    @classmethod
    def limit(cls, s):
        """Test-only constructor that also admits the limit values 0 and 1."""
        return cls(s, is_limit=True)

    def __float__(self):
        return self.s


def _as_order(s):
    if isinstance(s, FractionalOrder):
        return s.s
    return check_order(s)


def symbol(s, xi, eta):
    """Evaluate the discrete multiplier ``(4 sin^2(xi/2) + 4 sin^2(eta/2))**s``.

    Works elementwise on arrays. Zero only at the origin.
    """
    s = _as_order(s)
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    base = 4.0 * np.sin(0.5 * xi) ** 2 + 4.0 * np.sin(0.5 * eta) ** 2
    out = np.power(base, s)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class StencilTable:
    """Stencil coefficients ``T[p, q]`` for ``p, q`` in ``[-P, P]``.

    ``values[p + P, q + P]`` holds ``T[p, q]``; index with ``table[p, q]``.
    """

    s: float
    half_extent: int
    values: np.ndarray
    quadrature_resolution: int

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        n = 2 * self.half_extent + 1
        if values.shape != (n, n):
            raise ValueError("stencil values must have shape (%d, %d), got %s" % (n, n, values.shape))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __getitem__(self, pq):
        p, q = pq
        P = self.half_extent
        if abs(p) > P or abs(q) > P:
            raise IndexError("(%d, %d) outside stencil half extent %d" % (p, q, P))
        return float(self.values[p + P, q + P])

    @property
    def center(self):
        return self[0, 0]

    def truncated(self, half_extent):
        """Return the sub-table covering ``[-half_extent, half_extent]^2``."""
        P = self.half_extent
        if half_extent > P:
            raise ValueError("cannot extend a stencil from %d to %d" % (P, half_extent))
        sl = slice(P - half_extent, P + half_extent + 1)
        return StencilTable(self.s, half_extent, self.values[sl, sl], self.quadrature_resolution)

    def total(self):
        """Sum of all stored coefficients; tends to zero as the extent grows."""
        return float(self.values.sum())

    def __eq__(self, other):
        if not isinstance(other, StencilTable):
            return NotImplemented
        return (
            self.s == other.s
            and self.half_extent == other.half_extent
            and self.quadrature_resolution == other.quadrature_resolution
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def _next_pow2(n):
    return 1 << max(0, int(n - 1).bit_length())


def default_resolution(half_extent):
    """Starting quadrature resolution: max(4096, next power of two >= 8(2P+1))."""
    return max(4096, _next_pow2(8 * (2 * half_extent + 1)))


def _half_axis(M):
    # nodes pi (k + 1/2) / K on (0, pi), K = M / 2; the full shifted grid is their mirror image
    K = M // 2
    x = np.pi * (np.arange(K) + 0.5) / K
    return 4.0 * np.sin(0.5 * x) ** 2


def _center_coefficient(s, M):
    """Rectangle-rule value of T[0, 0] at resolution M (symbol mean over the grid)."""
    a = _half_axis(M)
    total = 0.0
    for i in range(0, a.size, 1024):
        total += np.power(a[i:i + 1024, None] + a[None, :], s).sum()
    return 4.0 * total / float(M) ** 2


def _fft_stencil(s, P, M):
    """Rectangle rule for T[p, q] on the shifted M x M grid, via 2D FFT.

    Grid nodes xi_k = -pi + 2 pi (k + 1/2) / M, so that
    exp(i p xi_k) = phase_p * exp(2 pi i p k / M), phase_p = exp(i p (pi/M - pi)).
    """
    k = np.arange(M)
    xi = -np.pi + 2.0 * np.pi * (k + 0.5) / M
    a = 4.0 * np.sin(0.5 * xi) ** 2
    q = np.arange(P + 1)
    phase_q = np.exp(1j * q * (np.pi / M - np.pi))

    # stage 1: sum over eta for q in [0, P]; B is real so the +i transform is conj(rfft)
    W = np.empty((M, P + 1), dtype=complex)
    for i in range(0, M, _ROW_BLOCK):
        block = np.power(a[i:i + _ROW_BLOCK, None] + a[None, :], s)
        R = scipy.fft.rfft(block, axis=1)
        W[i:i + _ROW_BLOCK] = np.conj(R[:, : P + 1]) * phase_q
    # stage 2: sum over xi for p in [-P, P]
    p = np.arange(-P, P + 1)
    phase_p = np.exp(1j * p * (np.pi / M - np.pi))
    W = scipy.fft.ifft(W, axis=0, overwrite_x=True)
    half = W[p % M] * phase_p[:, None] / M  # ifft carries 1/M, the rule needs 1/M^2
    del W

    full = np.empty((2 * P + 1, 2 * P + 1), dtype=complex)
    full[:, P:] = half
    # T[p, -q] = conj(T[-p, q])
    full[:, :P] = np.conj(half[::-1, :0:-1])
    return full


_MIN_CACHED_EXTENT = 32


def _compute(s, P, M_start, max_doublings):
    # the FFT stage yields every coefficient at once, so small tables are slices of one cached table
    P_eff = max(P, min(_MIN_CACHED_EXTENT, (M_start // 2 - 1) // 2))
    table = _compute_table(s, P_eff, M_start, max_doublings)
    return table if P_eff == P else table.truncated(P)


@functools.lru_cache(maxsize=64)
def _compute_table(s, P, M_start, max_doublings):
    M = M_start
    t_prev = _center_coefficient(s, M)
    # a zero budget still compares M against 2M once
    for _ in range(max(1, max_doublings)):
        t_next = _center_coefficient(s, 2 * M)
        scale = max(abs(t_next), np.finfo(float).tiny)
        if abs(t_next - t_prev) <= CONVERGENCE_RTOL * scale:
            break
        M *= 2
        t_prev = t_next
    else:
        raise QuadratureNotConverged(
            "T[0,0] still changes by %.3e (relative) after %d doublings from M=%d (s=%r)"
            % (abs(t_next - t_prev) / scale, max_doublings, M_start, s)
        )

    raw = _fft_stencil(s, P, M)
    center = abs(raw[P, P].real)
    imag = float(np.max(np.abs(raw.imag)))
    if imag > IMAG_RTOL * max(center, np.finfo(float).tiny):
        raise RuntimeError(
            "stencil FFT left an imaginary residue of %.3e (T[0,0]=%.6g); "
            "the quadrature grid layout is inconsistent" % (imag, center)
        )
    T = raw.real
    # enforce T[p,q] = T[-p,q] = T[p,-q] = T[q,p] bit-exactly
    T = T + T[::-1, :]
    T = T + T[:, ::-1]
    T *= 0.25
    T = 0.5 * (T + T.T)

    off = T.copy()
    off[P, P] = -np.inf
    if P > 0 and np.any(off > 0):
        _LOG.debug("stencil for s=%r has %d positive off-center entries", s, int(np.sum(off > 0)))
    return StencilTable(s, P, T, M)


def _cache_path(cache_dir, s, P, M_start):
    return os.path.join(cache_dir, "stencil_%s_P%d_M%d.bin" % (float(s).hex(), P, M_start))


def compute_stencil(s, half_extent, resolution=None, max_doublings=3, cache_dir=None):
    """Compute the stencil table ``T[p, q]``, ``|p|, |q| <= half_extent``.

    Parameters
    ----------
    s : float or FractionalOrder
        Fractional order. Plain floats must lie in (0, 1); use
        ``FractionalOrder.limit`` for the closed-interval limits.
    half_extent : int
        Half extent P of the table.
    resolution : int, optional
        Starting quadrature resolution M (a power of two, at least 2(2P+1)).
        Defaults to :func:`default_resolution`. M is doubled until T[0, 0]
        changes by less than 1e-10 relative between M and 2M.
    max_doublings : int
        Doubling budget before :class:`QuadratureNotConverged` is raised.
    cache_dir : str, optional
        Directory for the binary stencil cache.
    """
    s = _as_order(s)
    P = check_int(half_extent, "half_extent", minimum=0)
    if resolution is None:
        M = default_resolution(P)
    else:
        M = check_int(resolution, "resolution", minimum=1)
        if M & (M - 1):
            raise ValueError("resolution must be a power of two, got %d" % M)
        if M < 2 * (2 * P + 1):
            raise ResolutionTooLow(
                "resolution %d is below 2(2P+1) = %d for P=%d" % (M, 2 * (2 * P + 1), P)
            )
    max_doublings = check_int(max_doublings, "max_doublings", minimum=0)

    path = None
    if cache_dir is not None:
        path = _cache_path(cache_dir, s, P, M)
        if os.path.exists(path):
            table = load_stencil(path)
            if table.s == s and table.half_extent == P:
                return table
    table = _compute(s, P, M, max_doublings)
    if path is not None:
        os.makedirs(cache_dir, exist_ok=True)
        tmp = path + ".tmp%d" % os.getpid()
        save_stencil(table, tmp)
        os.replace(tmp, path)
    return table


def save_stencil(table, path):
    """Write ``table`` in the little-endian ``GOFDSTN1`` binary layout."""
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<dqq", table.s, table.half_extent, table.quadrature_resolution))
        fh.write(np.ascontiguousarray(table.values, dtype="<f8").tobytes())


def load_stencil(path):
    with open(path, "rb") as fh:
        data = fh.read()
    head = len(CACHE_MAGIC) + struct.calcsize("<dqq")
    if len(data) < head or data[: len(CACHE_MAGIC)] != CACHE_MAGIC:
        raise ValueError("%s is not a stencil cache file" % path)
    s, P, M = struct.unpack("<dqq", data[len(CACHE_MAGIC):head])
    n = 2 * P + 1
    if len(data) != head + 8 * n * n:
        raise ValueError("%s: truncated stencil cache (P=%d)" % (path, P))
    values = np.frombuffer(data, dtype="<f8", offset=head).reshape(n, n).astype(float)
    return StencilTable(float(s), int(P), values, int(M))


def symbol_limit_stencil(s, half_extent):
    """Closed-form limit stencils (s = 0: identity, s = 1: five-point Laplacian)."""
    P = half_extent
    T = np.zeros((2 * P + 1, 2 * P + 1))
    if s == 0:
        T[P, P] = 1.0
    elif s == 1:
        T[P, P] = 4.0
        if P >= 1:
            T[P - 1, P] = T[P + 1, P] = T[P, P - 1] = T[P, P + 1] = -1.0
    else:
        raise ValueError("closed-form stencils exist only for s in {0, 1}")
    return StencilTable(float(s), P, T, 0)

