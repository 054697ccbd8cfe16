import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chordmink.chord import (
    ball_chord_integral,
    chord_integral,
    chord_integral_reference,
    chord_measure,
    chord_terms,
    default_scheme,
    dual_quermassintegral,
    lp_chord_measure,
)
from chordmink.polytope import PolytopeError, scale, translate, wulff_shape
from chordmink.quadrature import QuadratureScheme, segment_rule, sphere_nodes, triangle_rule

import oracles
from conftest import AXES_2D, SQRT3, random_polytope, rel

seeds = st.integers(0, 5000)


class TestScheme:
    @pytest.mark.parametrize("dim, area", [(2, 2 * math.pi), (3, 4 * math.pi)])
    def test_weights_sum_to_sphere_area(self, dim, area):
        U, w = default_scheme(dim).nodes
        assert w.sum() == pytest.approx(area, rel=1e-13)
        np.testing.assert_allclose(np.linalg.norm(U, axis=1), 1.0, atol=1e-14)

    def test_default_budgets(self):
        assert default_scheme(2).n_directions == 4096
        assert default_scheme(3).n_directions == 2048

    def test_fibonacci_first_moment(self):
        # the spiral is not antipodal, so odd moments decay like 1/M
        U, w = sphere_nodes(3, 2048)
        assert np.abs(w @ U).max() < 4 * math.pi / 2048

    @pytest.mark.parametrize("kw", [{"n_directions": 8}, {"mode": "sobol"},
                                    {"section_budget": 0}, {"n_jobs": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            QuadratureScheme(2, **kw)

    @pytest.mark.parametrize("order", [1, 2, 3, 5, 7, 9])
    def test_segment_rule_exact(self, order):
        x, w = segment_rule(order)
        for k in range(order + 1):
            assert w @ x**k == pytest.approx(1 / (k + 1), rel=1e-13)

    @pytest.mark.parametrize("order", [1, 2, 5, 6, 8])
    def test_triangle_rule_exact(self, order):
        b, w = triangle_rule(order)
        # int over the unit simplex of s^i t^j is i! j! / (i + j + 2)!
        s, t = b[:, 1], b[:, 2]
        for i in range(order + 1):
            for j in range(order + 1 - i):
                ref = 2 * math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
                assert w @ (s**i * t**j) == pytest.approx(ref, rel=1e-12, abs=1e-15)


class TestChordIntegral:
    @pytest.mark.parametrize("q, ref", [(0, 8 / math.pi), (1, 4.0), (3, 48 / math.pi)])
    def test_square(self, sq, q, ref):
        assert chord_integral_reference(sq, q) == pytest.approx(ref, rel=1e-14)
        assert rel(chord_integral(sq, q), ref) <= 1e-6

    @pytest.mark.parametrize("q, ref", [(0, 6 * SQRT3 / math.pi), (1, 3 * SQRT3),
                                        (3, 81 / math.pi)])
    def test_triangle(self, tri, q, ref):
        assert chord_integral_reference(tri, q) == pytest.approx(ref, rel=1e-13)
        assert rel(chord_integral(tri, q), ref) <= 1e-6

    def test_triangle_grid_oracle(self, tri, oracle_values):
        vals = chord_integral(tri, [2.0, 0.5])
        assert rel(vals[0], oracle_values["triangle_I2"]) <= 1e-5
        assert rel(vals[1], oracle_values["triangle_I_half"]) <= 1e-5

    def test_cube(self, cb):
        refs = {0: 6.0, 1: 8.0, 4: 192 / math.pi}
        vals = chord_integral(cb, list(refs))
        for (q, ref), val in zip(refs.items(), vals):
            assert chord_integral_reference(cb, q) == pytest.approx(ref, rel=1e-13)
            assert rel(val, ref) <= 1e-3

    def test_no_closed_form(self, sq):
        with pytest.raises(ValueError):
            chord_integral_reference(sq, 2)

    def test_negative_q(self, sq):
        with pytest.raises(ValueError):
            chord_integral(sq, -0.5)

    def test_error_estimate(self, tri):
        val, err = chord_integral(tri, 2.5, return_error=True)
        assert 0 < err < 1e-4 * val
        val3, err3 = chord_integral(tri, [1.0, 2.5], return_error=True)
        assert val3[1] == pytest.approx(val, rel=1e-14)

    def test_monte_carlo(self, sq):
        s = QuadratureScheme(2, n_directions=4096, mode="monte-carlo", seed=3)
        assert rel(chord_integral(sq, 3, s), 48 / math.pi) <= 0.03
        assert chord_integral(sq, 3, s) == chord_integral(sq, 3, s)

    @given(seeds, st.floats(0.0, 4.0), st.floats(0.3, 3.0))
    def test_homogeneity(self, seed, q, t):
        P = random_polytope(2, 6, seed)
        s = QuadratureScheme(2, n_directions=256)
        assert rel(chord_integral(scale(P, t), q, s), t ** (q + 1) * chord_integral(P, q, s)) <= 1e-10

    @given(seeds, st.floats(0.0, 4.0))
    def test_translation_invariance(self, seed, q):
        P = random_polytope(2, 5, seed)
        s = QuadratureScheme(2, n_directions=256)
        Q = translate(P, [0.7, -0.2])
        assert rel(chord_integral(Q, q, s), chord_integral(P, q, s)) <= 1e-10


class TestBall:
    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("q", ["0.5", "1", "2", "3"])
    def test_quadrature_oracle(self, oracle_values, n, q):
        # adaptive quadrature of the square-root endpoint is good to about 1e-11
        assert rel(ball_chord_integral(n, float(q)), oracle_values[f"ball_{n}d"][q]) <= 1e-9

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_volume_case(self, n):
        vol = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
        assert ball_chord_integral(n, 1) == pytest.approx(vol, rel=1e-14)

    def test_omega_ratio_form_differs(self):
        # 2^q w_n w_{n+q-1} / w_q gives pi^2 for the disc at q = 1, not its area
        assert oracles.omega_ratio_ball_constant(2, 1) == pytest.approx(math.pi**2, rel=1e-14)
        assert ball_chord_integral(2, 1) == pytest.approx(math.pi, rel=1e-14)

    def test_polygon_approximation(self):
        k = 256
        th = 2 * math.pi * np.arange(k) / k
        P = wulff_shape(np.column_stack([np.cos(th), np.sin(th)]), np.ones(k))
        # circumscribed 256-gon converges to the disc at rate 1/k^2
        assert rel(chord_integral(P, 2.0), ball_chord_integral(2, 2.0)) <= 1e-3


class TestChordMeasure:
    def test_square_q1_is_area(self, sq):
        F = chord_measure(sq, 1)
        np.testing.assert_allclose(F.values, 2.0, rtol=1e-12)

    @pytest.mark.parametrize("q", [2, 3])
    def test_square_grid_oracle(self, sq, oracle_values, q):
        F = chord_measure(sq, q)
        ref = oracle_values[f"square_F{q}_per_facet"]
        np.testing.assert_allclose(F.values, ref, rtol=1e-5)

    def test_cube_symmetry(self, cb):
        for q in (1, 2):
            _, _, F, _ = chord_terms(cb, q)
            I = chord_integral(cb, q)
            # the spiral nodes are not cube-symmetric
            np.testing.assert_allclose(F, F.mean(), rtol=1e-5)
            assert rel(6 * F.mean(), (q + 2) * I) <= 1e-10
        np.testing.assert_allclose(chord_measure(cb, 1).values, 4.0, rtol=1e-3)

    @given(seeds, st.sampled_from([1.0, 1.5, 2.0, 3.5]))
    def test_measure_identity(self, seed, q):
        P = random_polytope(2, 6, seed)
        s = QuadratureScheme(2, n_directions=512)
        I, _, F, _ = chord_terms(P, q, s)
        assert rel(P.support @ F, (q + 1) * I) <= 1e-11

    def test_measure_identity_3d(self):
        P = random_polytope(3, 7, 4)
        s = QuadratureScheme(3, n_directions=256)
        I, _, F, _ = chord_terms(P, 2.0, s)
        assert rel(P.support @ F, 4 * I) <= 1e-4

    @given(seeds, st.sampled_from([1.0, 2.0, 3.0]))
    def test_zero_first_moment(self, seed, q):
        P = random_polytope(2, 6, seed)
        F = chord_measure(P, q)
        assert np.linalg.norm(F.values @ P.normals) <= 1e-6 * F.values.sum()

    @given(seeds, st.floats(0.3, 3.0))
    def test_homogeneity(self, seed, t):
        P = random_polytope(2, 5, seed)
        s = QuadratureScheme(2, n_directions=256)
        F = chord_measure(P, 2.5, s).values
        Ft = chord_measure(scale(P, t), 2.5, s).values
        np.testing.assert_allclose(Ft, t**2.5 * F, rtol=1e-10)

    def test_translation_invariance(self):
        P = random_polytope(2, 7, 9)
        F = chord_measure(P, 2.0).values
        G = chord_measure(translate(P, [3.0, -1.0]), 2.0).values
        np.testing.assert_allclose(G, F, rtol=1e-10)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_facet_method_agrees(self, seed):
        P = random_polytope(2, 6, seed)
        a = chord_measure(P, 2.0).values
        b = chord_measure(P, 2.0, method="facet").values
        np.testing.assert_allclose(b, a, rtol=1e-3)

    def test_facet_method_agrees_3d(self):
        P = random_polytope(3, 6, 1)
        s = QuadratureScheme(3, n_directions=512)
        a = chord_measure(P, 2.0, s).values
        b = chord_measure(P, 2.0, s, method="facet").values
        np.testing.assert_allclose(b, a, rtol=5e-3)

    def test_inactive_facet_zero(self):
        s2 = 1 / math.sqrt(2)
        P = wulff_shape(np.vstack([AXES_2D, [[s2, s2]]]), [1, 1, 1, 1, 2.0])
        F = chord_measure(P, 2.0)
        assert F[4] == 0.0 and F.estimated_error[4] == 0.0
        assert len(F) == 5 and np.asarray(F).shape == (5,)

    def test_small_q_rejected(self, sq):
        with pytest.raises(ValueError, match="q >= 1"):
            chord_measure(sq, 0.5)

    def test_unknown_method(self, sq):
        with pytest.raises(ValueError):
            chord_measure(sq, 2, method="simplex")

    def test_parallel_bit_identical(self):
        P = random_polytope(3, 7, 2)
        a = chord_terms(P, 2.0, QuadratureScheme(3, n_directions=256))
        b = chord_terms(P, 2.0, QuadratureScheme(3, n_directions=256, n_jobs=3))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_stable_under_support_perturbation(self):
        P = random_polytope(2, 6, 3)
        F = chord_measure(P, 2.0).values
        for eps in (1e-4, 1e-6):
            G = chord_measure(wulff_shape(P.normals, P.support + eps), 2.0).values
            assert np.abs(G - F).max() <= 100 * eps * F.max()


class TestLpChordMeasure:
    def test_p_one_is_plain(self, tri):
        np.testing.assert_array_equal(lp_chord_measure(tri, 1.0, 2.0).values,
                                      chord_measure(tri, 2.0).values)

    def test_square(self, sq):
        F = lp_chord_measure(sq, -1.0, 1.0)
        np.testing.assert_allclose(F.values, 2.0, rtol=1e-12)
        assert F.p == -1.0

    def test_homogeneity(self, tri):
        p, q, t = -1.5, 2.0, 1.7
        a = lp_chord_measure(scale(tri, t), p, q).values
        b = lp_chord_measure(tri, p, q).values
        np.testing.assert_allclose(a, t ** (2 + q - p - 1) * b, rtol=1e-10)

    def test_origin_outside(self, sq):
        with pytest.raises(PolytopeError):
            lp_chord_measure(translate(sq, [2.0, 0.0]), -1.0, 1.0)


class TestDualQuermassintegral:
    def test_square_center(self, sq):
        assert dual_quermassintegral(sq, [0, 0], 2.0) == pytest.approx(4.0, rel=1e-5)
        assert dual_quermassintegral(scale(sq, 2.0), [0, 0], 2.0) == pytest.approx(16.0, rel=1e-5)

    def test_boundary_riesz_oracle(self, sq, oracle_values):
        val = dual_quermassintegral(sq, [1.0, 0.3], 1.0)
        assert rel(val, oracle_values["square_riesz_V1_at_(1,0.3)"]) <= 1e-3

    def test_outside(self, sq):
        with pytest.raises(PolytopeError):
            dual_quermassintegral(sq, [1.5, 0.0], 1.0)

    def test_nonpositive_q(self, sq):
        with pytest.raises(ValueError):
            dual_quermassintegral(sq, [0, 0], 0.0)


class TestIsotropicFrame:
    """Elongated boxes exercise the switch to the isotropic vertex frame."""

    @pytest.mark.parametrize("n, sides", [(2, (20.0, 0.5)), (3, (30.0, 1.0, 0.4))])
    def test_box_closed_forms(self, n, sides):
        axes = np.vstack([np.eye(n), -np.eye(n)])
        P = wulff_shape(axes, np.tile(np.asarray(sides) / 2, 2))
        V = float(np.prod(sides))
        S = 2 * sum(V / s for s in sides)
        wn, wn1 = (math.pi, 2.0) if n == 2 else (4 * math.pi / 3, math.pi)
        I0, I1, In1 = chord_integral(P, [0.0, 1.0, n + 1.0])
        assert rel(I1, V) <= 1e-12
        assert rel(I0, wn1 / (n * wn) * S) <= 1e-3
        assert rel(In1, (n + 1) / wn * V**2) <= 1e-3

    def test_continuous_across_switch(self):
        P = wulff_shape(np.vstack([np.eye(2), -np.eye(2)]), [10.0, 0.5, 10.0, 0.5])
        lo, mid, hi = chord_integral(P, [1.999, 2.0, 2.001])
        # I_q is smooth in q, so a frame mismatch would show as a jump in the
        # second difference across the switch at q = 2
        assert abs((hi - mid) - (mid - lo)) <= 1e-5 * mid
