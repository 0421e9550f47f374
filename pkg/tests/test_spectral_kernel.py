import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from gofd.exceptions import QuadratureNotConverged, ResolutionTooLow
from gofd.spectral_kernel import (
    FractionalOrder,
    StencilTable,
    compute_stencil,
    load_stencil,
    save_stencil,
    symbol,
    symbol_limit_stencil,
)


def t00_oracle(s):
    # scalar adaptive quadrature of the symbol over the quarter square, times 4 / (2 pi)^2
    f = lambda y, x: (4 * math.sin(x / 2) ** 2 + 4 * math.sin(y / 2) ** 2) ** s
    val, _ = integrate.dblquad(f, 0.0, math.pi, 0.0, math.pi, epsabs=1e-14, epsrel=1e-13)
    return 4.0 * val / (4.0 * math.pi ** 2)


class TestSymbol:
    def test_zero_at_origin(self):
        assert symbol(0.5, 0.0, 0.0) == 0.0

    def test_corner(self):
        assert symbol(0.5, math.pi, math.pi) == pytest.approx(math.sqrt(8.0), rel=1e-14)

    def test_laplacian_limit(self):
        assert symbol(FractionalOrder.limit(1.0), math.pi, 0.0) == pytest.approx(4.0)

    def test_vectorized(self):
        xi = np.linspace(-math.pi, math.pi, 7)
        out = symbol(0.3, xi, xi[::-1])
        assert out.shape == (7,)
        assert np.all(out >= 0)

    @pytest.mark.parametrize("s", [0.0, 1.0, -0.2, 1.5, float("nan")])
    def test_rejects_bad_order(self, s):
        with pytest.raises(ValueError):
            symbol(s, 1.0, 1.0)

    @given(st.floats(0.01, 0.99), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
    def test_even_and_bounded(self, s, a, b):
        v = symbol(s, a, b)
        assert v == pytest.approx(symbol(s, -a, b))
        assert v == pytest.approx(symbol(s, b, a))
        assert 0.0 <= v <= 8.0 ** s * (1 + 1e-12)


class TestComputeStencil:
    @pytest.mark.parametrize("s, center, nbr", [(1.0, 4.0, -1.0), (0.0, 1.0, 0.0)])
    def test_limits(self, s, center, nbr):
        T = compute_stencil(FractionalOrder.limit(s), 2, resolution=1024)
        ref = symbol_limit_stencil(s, 2).values
        assert T.center == pytest.approx(center, abs=1e-10)
        assert T[1, 0] == pytest.approx(nbr, abs=1e-10)
        np.testing.assert_allclose(T.values, ref, atol=1e-10)

    def test_symmetries_exact(self):
        T = compute_stencil(0.5, 8, resolution=4096)
        assert T[1, 2] == T[-1, 2] == T[1, -2] == T[2, 1]
        np.testing.assert_array_equal(T.values, T.values.T)
        np.testing.assert_array_equal(T.values, T.values[::-1, :])

    def test_center_matches_scalar_quadrature(self):
        T = compute_stencil(0.5, 8, resolution=4096)
        assert T.center == pytest.approx(t00_oracle(0.5), rel=1e-8)

    @pytest.mark.parametrize("s", [0.25, 0.75])
    def test_center_oracle_other_orders(self, s):
        assert compute_stencil(s, 4).center == pytest.approx(t00_oracle(s), rel=1e-8)

    @pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
    def test_off_center_negative_and_sums_small(self, s):
        # diagnostic sign pattern plus decay of the total toward the symbol at 0
        T = compute_stencil(s, 16)
        off = T.values.copy()
        off[16, 16] = 0
        assert np.all(off <= 0)
        assert abs(T.total()) < T.center

    @pytest.mark.parametrize("s, tol", [(0.999, 5e-2), (0.001, 5e-2)])
    def test_near_limit_drift(self, s, tol):
        T = compute_stencil(s, 3)
        ref = symbol_limit_stencil(round(s), 3).values
        assert np.max(np.abs(T.values - ref)) < tol

    def test_resolution_too_low(self):
        with pytest.raises(ResolutionTooLow):
            compute_stencil(0.5, 8, resolution=32)

    def test_resolution_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            compute_stencil(0.5, 2, resolution=1000)

    def test_not_converged(self):
        with pytest.raises(QuadratureNotConverged):
            compute_stencil(0.5, 2, resolution=16, max_doublings=0)

    def test_truncated(self):
        T = compute_stencil(0.5, 6)
        t = T.truncated(2)
        assert t.half_extent == 2
        assert t[2, -1] == T[2, -1]
        with pytest.raises(IndexError):
            t[3, 0]

    def test_values_read_only(self):
        T = compute_stencil(0.5, 2)
        with pytest.raises(ValueError):
            T.values[0, 0] = 1.0


class TestCache:
    def test_round_trip_bit_identical(self, tmp_path):
        T = compute_stencil(0.4, 5)
        p = tmp_path / "t.bin"
        save_stencil(T, p)
        assert load_stencil(p) == T

    def test_cache_dir_reuse(self, tmp_path):
        a = compute_stencil(0.6, 3, cache_dir=str(tmp_path))
        assert len(list(tmp_path.iterdir())) == 1
        b = compute_stencil(0.6, 3, cache_dir=str(tmp_path))
        assert a == b

    def test_bad_file(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"not a stencil")
        with pytest.raises(ValueError):
            load_stencil(p)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            StencilTable(0.5, 2, np.zeros((3, 3)), 64)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([0.2, 0.5, 0.8]), st.integers(0, 6))
def test_truncation_consistent_across_extents(s, P):
    # coefficients do not depend on the table extent beyond quadrature error
    big = compute_stencil(s, 8)
    small = compute_stencil(s, P)
    np.testing.assert_allclose(small.values, big.truncated(P).values, rtol=1e-8, atol=1e-11)
