import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ieldtm.burgers import (FieldBoundary, HomogeneousBoundary, PolynomialBoundary, TaylorCoeffs,
                            assemble, coefficient_tangents, dt_recurrence, initial_field, rhs,
                            rhs_blocks, taylor_coefficients)
from ieldtm.cheb import collocation_points
from ieldtm.oracle import logistic_series, traveling_wave


def grid(N, a=0.0, b=1.0):
    return collocation_points(a, b, N)


def system_1d(N=10, eps=1.0, bc=None, advection=True):
    return assemble(1, [grid(N)], eps, bc, advection=advection)


def poly_bc_2d(rng, degree):
    """Random polynomial-in-time data; corner values are not needed by interior rows."""
    coeffs = {}
    for side in ("left", "right", "bottom", "top"):
        cs = []
        for _ in range(degree + 1):
            p = rng.normal(size=3)
            cs.append(lambda c, p=p: p[0] + p[1] * np.asarray(c) + p[2] * np.asarray(c) ** 2)
        coeffs[side] = cs
    return PolynomialBoundary(coeffs)


class TestAssemble:
    def test_zero_field_homogeneous(self):
        s = system_1d()
        assert np.all(rhs(s, np.zeros(9), 0.3) == 0.0)

    def test_linear_field_1d(self):
        g = grid(10)
        s = assemble(1, [g], 0.37, FieldBoundary(lambda x, t: x, [g]))
        np.testing.assert_allclose(rhs(s, g.interior, 0.0), -g.interior, atol=1e-12)

    def test_linear_field_2d(self):
        gx, gy = grid(8), grid(6, -1.0, 2.0)
        bc = FieldBoundary(lambda x, y, t: x + y, [gx, gy])
        s = assemble(2, [gx, gy], 0.2, bc)
        X, Y = np.meshgrid(gx.interior, gy.interior, indexing="ij")
        np.testing.assert_allclose(rhs(s, X + Y, 0.0), -2 * (X + Y), atol=1e-11)

    def test_interior_blocks_are_submatrices(self):
        g = grid(9)
        s = system_1d(9)
        A = s.mats[0].A
        np.testing.assert_array_equal(s.A_int[0], A[1:-1, 1:-1])
        np.testing.assert_array_equal(s.B_int[0], s.mats[0].B[1:-1, 1:-1])
        assert s.interior_shape == (g.N - 1,)

    @pytest.mark.parametrize("eps", [0.0, -1.0])
    def test_rejects_nonpositive_viscosity(self, eps):
        with pytest.raises(ValueError):
            system_1d(eps=eps)

    def test_corner_mismatch_warns(self):
        gx = grid(4)
        bc = PolynomialBoundary({"left": [lambda c: 0 * c], "right": [lambda c: 0 * c],
                                 "bottom": [lambda c: 1 + 0 * c], "top": [lambda c: 0 * c]})
        with pytest.warns(UserWarning):
            assemble(2, [gx, gx], 1.0, bc)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rhs(system_1d(10), np.zeros(10), 0.0)


class TestInitialField:
    def test_zero(self):
        s = system_1d(7)
        assert np.all(initial_field(s, lambda x: 0.0 * x) == 0)

    def test_sine(self):
        g = grid(10)
        s = assemble(1, [g], 1.0)
        np.testing.assert_array_equal(initial_field(s, lambda x: np.sin(np.pi * x)),
                                      np.sin(np.pi * g.interior))

    def test_logistic(self):
        tw = traveling_wave(0.1)
        g = grid(12)
        bc = FieldBoundary(tw, [g, g])
        s = assemble(2, [g, g], 0.1, bc)
        X, Y = np.meshgrid(g.interior, g.interior, indexing="ij")
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            beta = initial_field(s, lambda x, y: tw(x, y, 0.0))
        np.testing.assert_array_equal(beta, tw(X, Y, 0.0))

    def test_mismatch_warns(self):
        with pytest.warns(UserWarning):
            initial_field(system_1d(6), lambda x: 1.0 + 0 * x)


class TestRhs:
    def test_sine_profile(self):
        g = grid(40)
        s = assemble(1, [g], 0.1)
        x = g.interior
        u = np.sin(np.pi * x)
        exact = -0.1 * np.pi**2 * u - np.pi * u * np.cos(np.pi * x)
        assert np.max(np.abs(rhs(s, u, 0.0) - exact)) <= 1e-8

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 3), st.floats(-1.0, 1.0))
    def test_block_form_matches_extended_form_2d(self, seed, degree, t):
        rng = np.random.default_rng(seed)
        gx, gy = grid(9), grid(7)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            s = assemble(2, [gx, gy], 0.3, poly_bc_2d(rng, degree))
        beta = rng.normal(size=s.interior_shape)
        a, b = rhs(s, beta, t), rhs_blocks(s, beta, t)
        assert np.max(np.abs(a - b)) <= 1e-13 * (1 + np.max(np.abs(a)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-1.0, 1.0))
    def test_block_form_matches_extended_form_1d(self, seed, t):
        rng = np.random.default_rng(seed)
        p = rng.normal(size=(2, 3))
        bc = PolynomialBoundary({side: [lambda c, v=v: v for v in p[i]]
                                 for i, side in enumerate(("left", "right"))})
        s = system_1d(12, 0.7, bc)
        beta = rng.normal(size=11)
        a, b = rhs(s, beta, t), rhs_blocks(s, beta, t)
        assert np.max(np.abs(a - b)) <= 1e-13 * (1 + np.max(np.abs(a)))

    def test_viscosity_scaling_without_advection(self):
        rng = np.random.default_rng(4)
        g = grid(14)
        beta = rng.normal(size=(13, 13))
        s1 = assemble(2, [g, g], 0.25, advection=False)
        s2 = assemble(2, [g, g], 0.5, advection=False)
        np.testing.assert_array_equal(rhs(s2, beta, 0.0), 2 * rhs(s1, beta, 0.0))


class TestBoundaryProviders:
    def test_zero_order_is_value(self):
        g = grid(6)
        tw = traveling_wave(0.5)
        bc = FieldBoundary(tw, [g, g], series=lambda x, y, t, o: logistic_series(tw, x, y, t, o))
        for side in ("left", "right", "bottom", "top"):
            np.testing.assert_allclose(bc.taylor(side, g.nodes, 0.2, 0), bc.value(side, g.nodes, 0.2),
                                       rtol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-3, 3), min_size=1, max_size=5), st.floats(-2, 2))
    def test_polynomial_coefficients_vanish_beyond_degree(self, c, t):
        bc = PolynomialBoundary({"left": [lambda _, v=v: v for v in c]})
        series = bc.taylor_series("left", None, t, len(c) + 2)
        assert np.all(series[len(c):] == 0)
        assert series[0] == pytest.approx(np.polyval(c[::-1], t), abs=1e-12)

    def test_finite_difference_fallback(self):
        # exact logistic coefficients against the central-difference fallback
        g = grid(8)
        tw = traveling_wave(0.5)
        exact = FieldBoundary(tw, [g, g], series=lambda x, y, t, o: logistic_series(tw, x, y, t, o))
        approx = FieldBoundary(tw, [g, g])
        a = approx.taylor_series("left", g.nodes, 0.3, 3)
        e = exact.taylor_series("left", g.nodes, 0.3, 3)
        np.testing.assert_allclose(a, e, rtol=0, atol=1e-5)

    def test_homogeneous(self):
        assert np.all(HomogeneousBoundary().taylor_series("top", np.ones(3), 1.0, 4) == 0)


class TestRecurrence:
    def test_first_level_is_rhs(self):
        rng = np.random.default_rng(0)
        g = grid(11)
        bc = FieldBoundary(lambda x, t: np.cos(x + t), [g])
        s = assemble(1, [g], 0.4, bc)
        beta = rng.normal(size=10)
        tc = TaylorCoeffs(t=0.7, coeffs=beta[None])
        np.testing.assert_array_equal(dt_recurrence(s, tc, 0), rhs(s, beta, 0.7))

    def test_zero_state(self):
        s = system_1d(9)
        tc = taylor_coefficients(s, np.zeros(8), 0.0, 5)
        assert np.all(tc.coeffs == 0)
        assert np.all(dt_recurrence(s, tc, 3) == 0)

    def test_missing_levels(self):
        s = system_1d(9)
        with pytest.raises(ValueError):
            dt_recurrence(s, TaylorCoeffs(t=0.0, coeffs=np.zeros((2, 8))), 3)

    def test_stationary_constant_field(self):
        # each level applies eps*B once more, so rounding noise grows by ||eps B|| per level
        g = grid(10)
        bc = PolynomialBoundary({"left": [lambda _: 0.6], "right": [lambda _: 0.6]})
        s = assemble(1, [g], 0.2, bc)
        tc = taylor_coefficients(s, np.full(9, 0.6), 0.0, 6)
        growth = 1 + 0.2 * np.max(np.sum(np.abs(s.mats[0].B), axis=1))
        for k in range(6):
            bound = 1e-13 * growth ** (k + 1)
            assert np.max(np.abs(tc.coeffs[k + 1])) <= bound
            assert np.max(np.abs(dt_recurrence(s, tc, k))) <= bound

    @pytest.mark.parametrize("dim", [1, 2])
    def test_heat_equation_powers(self, dim):
        # without advection the coefficients are (eps B)^k beta / k!
        rng = np.random.default_rng(dim)
        g = grid(9)
        s = assemble(dim, [g] * dim, 0.3, advection=False)
        beta = rng.normal(size=s.interior_shape)
        tc = taylor_coefficients(s, beta, 0.0, 5)
        Bi = s.mats[0].B[1:-1, 1:-1]
        if dim == 1:
            L = 0.3 * Bi
        else:
            eye = np.eye(8)
            L = 0.3 * (np.kron(Bi, eye) + np.kron(eye, Bi))
        v = beta.ravel()
        for k in range(1, 6):
            v = L @ v / k
            np.testing.assert_allclose(tc.coeffs[k].ravel(), v, rtol=1e-10,
                                       atol=1e-12 * np.max(np.abs(v)))

    def test_matches_exact_time_series(self):
        # the traveling wave's own time coefficients agree up to spatial error
        eps = 1.0
        tw = traveling_wave(eps)
        g = grid(14)
        series = lambda x, y, t, o: logistic_series(tw, x, y, t, o)
        s = assemble(2, [g, g], eps, FieldBoundary(tw, [g, g], series=series))
        X, Y = np.meshgrid(g.interior, g.interior, indexing="ij")
        tc = taylor_coefficients(s, tw(X, Y, 0.2), 0.2, 2)
        np.testing.assert_allclose(tc.coeffs, logistic_series(tw, X, Y, 0.2, 2), rtol=0, atol=1e-8)

    @pytest.mark.parametrize("dim,N", [(1, 12), (2, 6)])
    def test_tangents_match_finite_differences(self, dim, N):
        rng = np.random.default_rng(7)
        g = grid(N)
        tw = traveling_wave(0.3)
        if dim == 1:
            bc = FieldBoundary(lambda x, t: np.sin(2 * x + t), [g])
        else:
            bc = FieldBoundary(tw, [g, g])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            s = assemble(dim, [g] * dim, 0.3, bc)
        beta = rng.uniform(0.2, 0.8, size=s.interior_shape)
        K = 4
        tc = taylor_coefficients(s, beta, 0.1, K)
        J = coefficient_tangents(s, tc, K)
        h = 1e-6
        for j in rng.choice(s.size, size=4, replace=False):
            e = np.zeros(s.size)
            e[j] = h
            plus = taylor_coefficients(s, beta + e.reshape(s.interior_shape), 0.1, K).coeffs
            minus = taylor_coefficients(s, beta - e.reshape(s.interior_shape), 0.1, K).coeffs
            fd = ((plus - minus) / (2 * h)).reshape(K + 1, -1)
            for k in range(K + 1):
                scale = 1 + np.max(np.abs(fd[k]))
                assert np.max(np.abs(J[k][:, j] - fd[k])) <= 1e-6 * scale
