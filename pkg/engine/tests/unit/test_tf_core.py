"""
Unit tests for rational transfer-function algebra, roots and discretization.
Run: pytest tests/unit/test_tf_core.py -v
"""
import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as P

from app.core.exceptions import (
    DelayMismatch,
    ImproperTransferFunction,
    NonInvertibleDelay,
    PoleOnAxis,
    ZeroNumerator,
)
from app.services.tf_core import (
    DiscreteFilterState,
    Stability,
    classify_stability,
    discretize_tustin,
    evaluate_at_frequency,
    find_roots,
    gain,
    pade,
    rational_arithmetic,
    tf,
)


class TestCanonicalForm:
    """Tests for construction and canonicalization."""

    def test_denominator_is_monic(self):
        """Test that construction scales to a monic denominator."""
        g = tf([2.0], [2.0, 4.0])

        assert g.den[-1] == 1.0
        assert g.dc_gain() == pytest.approx(1.0)

    def test_common_origin_factor_cancelled(self):
        """Test that a shared factor of s is removed."""
        g = tf([0.0, 3.0], [0.0, 1.0, 1.0])

        assert g.num_degree == 0
        assert g.den_degree == 1

    def test_small_leading_coefficient_kept(self):
        """Test that a leading coefficient far below the others is not trimmed."""
        g = tf([1e13, 1.0], [0.0, 1.0])

        assert g.num_degree == 1
        assert g.evaluate(1e15) == pytest.approx(1.0 - 0.01j, rel=1e-12)

    def test_zero_function_is_canonical(self):
        """Test that the zero function drops its delay and denominator."""
        g = tf([0.0], [1.0, 1.0], delay=0.1)

        assert g.is_zero
        assert g.delay == 0.0
        assert g.den_degree == 0

    def test_negative_delay_rejected(self):
        """Test that a negative delay raises NonInvertibleDelay."""
        with pytest.raises(NonInvertibleDelay):
            tf([1.0], [1.0, 1.0], delay=-0.001)


class TestArithmetic:
    """Tests for rational_arithmetic and the operator overloads."""

    def test_add_zero_returns_other_operand(self):
        """Test that adding the zero function ignores its delay."""
        a = tf([1.0], [1.0, 1.0], delay=0.01)

        assert (a + gain(0.0)).coefficients_close(a)

    def test_add_unequal_delays_raises(self):
        """Test that unequal delays cannot be added."""
        a = tf([1.0], [1.0, 1.0], delay=0.01)
        b = tf([1.0], [2.0, 1.0], delay=0.02)

        with pytest.raises(DelayMismatch):
            rational_arithmetic(a, b, "add")

    def test_multiplication_cancels_common_factor(self):
        """Test that (s+1)/(s+2) * (s+2)/(s+3) stays first order."""
        product = tf([1.0, 1.0], [2.0, 1.0]) * tf([2.0, 1.0], [3.0, 1.0])

        assert product.den_degree == 1
        assert product.coefficients_close(tf([1.0, 1.0], [3.0, 1.0]))

    def test_delays_add_under_multiplication(self):
        """Test that delays accumulate through a product."""
        product = tf([1.0], [1.0, 1.0], delay=0.001) * tf([2.0], [1.0], delay=0.002)

        assert product.delay == pytest.approx(0.003)

    def test_invert_delayed_raises(self):
        """Test that inverting a delayed function raises NonInvertibleDelay."""
        with pytest.raises(NonInvertibleDelay):
            tf([1.0], [1.0, 1.0], delay=0.002).inv()

    def test_invert_zero_raises(self):
        """Test that inverting the zero function raises ZeroNumerator."""
        with pytest.raises(ZeroNumerator):
            gain(0.0).inv()

    def test_division_to_negative_delay_raises(self):
        """Test that a division producing a negative delay raises."""
        with pytest.raises(NonInvertibleDelay):
            gain(1.0) / tf([1.0], [1.0, 1.0], delay=0.002)

    def test_division_of_equal_delays_is_delay_free(self):
        """Test that equal delays cancel in a quotient."""
        a = tf([1.0], [1.0, 1.0], delay=0.002)
        b = tf([1.0], [2.0, 1.0], delay=0.002)

        assert (a / b).delay == 0.0

    def test_scalar_operands(self):
        """Test that scalars mix with transfer functions on either side."""
        g = tf([1.0], [1.0, 1.0])

        assert (2.0 * g).dc_gain() == pytest.approx(2.0)
        assert (1.0 - g).dc_gain() == pytest.approx(0.0)
        assert (1.0 / g).dc_gain() == pytest.approx(1.0)

    @given(
        a=st.lists(st.floats(0.1, 10.0), min_size=2, max_size=4),
        b=st.lists(st.floats(0.1, 10.0), min_size=2, max_size=4),
        w=st.floats(0.01, 100.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_sum_matches_pointwise_sum(self, a, b, w):
        """Test that the rational sum evaluates to the sum of evaluations."""
        ga = tf([1.0], a)
        gb = tf([2.0, 1.0], b)

        va, vb = ga.evaluate(w), gb.evaluate(w)
        assert abs((ga + gb).evaluate(w) - (va + vb)) <= 1e-7 * (abs(va) + abs(vb) + 1.0)

    @given(
        big=st.floats(1.0, 1e16),
        small=st.floats(1e-6, 1.0),
        pole=st.floats(0.1, 100.0),
        w=st.floats(1e-3, 1e15),
    )
    @settings(max_examples=80, deadline=None)
    def test_sum_of_wide_range_operands(self, big, small, pole, w):
        """Test the pointwise sum when coefficients span many decades."""
        ga = tf([big, small], [1.0, 1.0])
        gb = tf([1.0], [pole, 1.0])

        total = ga + gb

        va, vb = ga.evaluate(w), gb.evaluate(w)
        assert total.num_degree == total.den_degree
        assert abs(total.evaluate(w) - (va + vb)) <= 1e-9 * (abs(va) + abs(vb))

    def test_exact_cancellation_gives_zero(self):
        """Test that g - g is the zero function."""
        g = tf([3.0, 1e-9], [2.0, 1.0])

        assert (g - g).is_zero


class TestEvaluation:
    """Tests for frequency evaluation."""

    def test_delay_phase_is_exact(self):
        """Test that a pure delay evaluates to exp(-j w T)."""
        g = tf([1.0], delay=0.1)

        assert abs(g.evaluate(10.0) - cmath.exp(-1j)) < 1e-12

    def test_pole_on_axis_raises(self):
        """Test that evaluating on an imaginary-axis pole raises PoleOnAxis."""
        with pytest.raises(PoleOnAxis):
            evaluate_at_frequency(tf([1.0], [1.0, 0.0, 1.0]), 1.0)

    def test_response_marks_pole_as_nan(self):
        """Test that the vectorized response returns NaN on a pole."""
        resp = tf([1.0], [0.0, 1.0]).response([0.0, 1.0])

        assert np.isnan(resp[0])
        assert resp[1] == pytest.approx(-1j)


class TestFindRoots:
    """Tests for the Aberth root finder."""

    def test_distinct_real_roots(self):
        """Test (s-1)(s-2)(s-3)."""
        roots = find_roots([-6.0, 11.0, -6.0, 1.0])

        assert [r.real for r in roots] == pytest.approx([1.0, 2.0, 3.0], abs=1e-9)
        assert all(r.imag == 0.0 for r in roots)

    def test_double_root(self):
        """Test that a double root converges."""
        roots = find_roots([1.0, 2.0, 1.0])

        assert len(roots) == 2
        assert all(abs(r + 1.0) < 1e-6 for r in roots)

    def test_roots_at_origin_are_exact(self):
        """Test that zero roots are stripped exactly."""
        roots = find_roots([0.0, 0.0, 2.0, 1.0])

        assert roots.count(0j) == 2
        assert roots[0] == pytest.approx(-2.0)

    def test_conjugate_pairs_are_exact(self):
        """Test that complex roots come back as exact conjugates."""
        roots = find_roots([5.0, 2.0, 1.0])

        assert roots[0] == roots[1].conjugate()
        assert abs(roots[1] - complex(-1.0, 2.0)) < 1e-10

    @given(
        real=st.lists(st.floats(-20.0, 20.0).filter(lambda x: abs(x) >= 0.01), min_size=0, max_size=4),
        pairs=st.lists(st.tuples(st.floats(-20.0, 20.0), st.floats(0.5, 20.0)), min_size=0, max_size=2),
    )
    @settings(max_examples=60, deadline=None)
    def test_residuals_at_rounding_level(self, real, pairs):
        """Test that every returned root has a rounding-level residual."""
        expected = list(real) + [complex(a, b) for a, b in pairs] + [complex(a, -b) for a, b in pairs]
        if not expected:
            expected = [1.0]
        coeffs = P.polyfromroots(expected).real

        roots = find_roots(coeffs)

        assert len(roots) == len(expected)
        abs_c = np.abs(coeffs)
        for r in roots:
            bound = P.polyval(abs(r), abs_c)
            assert abs(P.polyval(r, coeffs)) <= 1e-8 * bound


class TestClassifyStability:
    """Tests for classify_stability."""

    def test_stable(self):
        """Test a strictly left-half-plane pole."""
        assert classify_stability(tf([1.0], [1.0, 1.0])).verdict == Stability.STABLE

    def test_marginal_integrator(self):
        """Test that an integrator is marginal."""
        assert classify_stability(tf([1.0], [0.0, 1.0, 1.0])).verdict == Stability.MARGINAL

    def test_unstable(self):
        """Test a right-half-plane pole."""
        result = classify_stability(tf([1.0], [-1.0, 1.0]))

        assert result.verdict == Stability.UNSTABLE
        assert result.worst_pole_real_part == pytest.approx(1.0)

    def test_non_minimum_phase(self):
        """Test that a right-half-plane zero is reported."""
        result = classify_stability(tf([-1.0, 1.0], [1.0, 2.0, 1.0]))

        assert result.verdict == Stability.STABLE
        assert result.minimum_phase is False


class TestPade:
    """Tests for the Pade delay approximant."""

    def test_zero_delay_is_unity(self):
        """Test that a zero delay gives the unit gain."""
        assert pade(0.0, 4).coefficients_close(gain(1.0))

    def test_matches_delay_at_low_frequency(self):
        """Test that Pade(4) matches exp(-j w T) where w T is small."""
        assert abs(pade(0.01, 4).evaluate(10.0) - cmath.exp(-0.1j)) < 1e-10

    def test_all_pass(self):
        """Test that the approximant has unit magnitude."""
        assert abs(pade(0.002, 3).evaluate(3000.0)) == pytest.approx(1.0)


class TestDiscretizeTustin:
    """Tests for discretize_tustin and DiscreteFilterState."""

    def test_dc_gain_preserved(self):
        """Test that the bilinear map preserves the static gain."""
        d = discretize_tustin(tf([100.0], [100.0, 1.0]), 0.001)

        assert d.dc_gain() == pytest.approx(1.0, abs=1e-12)

    def test_improper_raises(self):
        """Test that an improper function cannot be discretized."""
        with pytest.raises(ImproperTransferFunction):
            discretize_tustin(tf([0.0, 1.0]), 0.001)

    def test_prewarp_matches_at_prewarp_frequency(self):
        """Test that prewarping makes the responses agree exactly at that frequency."""
        g = tf([50.0], [50.0, 1.0])

        d = discretize_tustin(g, 0.005, prewarp_omega=100.0)

        assert abs(d.evaluate(100.0) - g.evaluate(100.0)) < 1e-9

    def test_step_response_settles(self):
        """Test that the runner settles to the static gain."""
        runner = DiscreteFilterState(discretize_tustin(tf([100.0], [100.0, 1.0]), 0.001))

        y = [runner.step(1.0) for _ in range(2000)]

        assert y[-1] == pytest.approx(1.0, abs=1e-6)

    def test_delay_steps(self):
        """Test that a delay becomes whole samples in the runner."""
        d = discretize_tustin(tf([1.0], delay=0.003), 0.001)
        runner = d.runner()

        assert d.delay_steps == 3
        assert [runner.step(1.0) for _ in range(5)] == [0.0, 0.0, 0.0, 1.0, 1.0]

    def test_reset_clears_state(self):
        """Test that reset returns the runner to rest."""
        runner = DiscreteFilterState(discretize_tustin(tf([10.0], [10.0, 1.0]), 0.01))
        for _ in range(10):
            runner.step(1.0)

        runner.reset()

        assert runner.step(0.0) == 0.0

    def test_poles_inside_unit_circle(self):
        """Test that a stable continuous filter maps inside the unit circle."""
        d = discretize_tustin(tf([1.0], [400.0, 28.0, 1.0]), 0.001)

        assert all(abs(z) < 1.0 for z in d.poles())
        assert math.isfinite(d.dc_gain())
