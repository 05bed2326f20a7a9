"""
Unit tests for compliance-pair interconnections and the system chain.
Run: pytest tests/unit/test_interconnect.py -v
"""
import math

import numpy as np
import pytest

from app.core.config import settings
from app.core.exceptions import NonInvertibleDelay
from app.schemas.design import DesignSpec
from app.schemas.plant import PlantParams
from app.services.analysis import amplification_ratio
from app.services.interconnect import (
    CompliancePair,
    PointwiseCompliance,
    build_system_chain,
    motor_compliance,
    parallel_interconnect,
    series_interconnect,
    virtual_parallel,
    virtual_series,
)
from app.services.shaping import double_compliance_design
from app.services.tf_core import gain, pade, tf


def _direct_c5(p: PlantParams, g_theta, g_s, w: float) -> complex:
    """theta_j per unit cuff torque from the linear model equations, cuff feedback open."""
    s = 1j * w
    gt = g_theta.evaluate(w)
    gs = g_s.evaluate(w)
    # eliminate theta_m: the determinant below is the expanded, cancellation-free form
    motor = p.J_m * s * s + p.B_m * s - gt
    det = motor * (p.J_j * s * s + p.K_s) + (1.0 + gs) * p.K_s * p.J_j * s * s
    return complex((motor + (1.0 + gs) * p.K_s) / det)


def _direct_c7(p: PlantParams, g_theta, g_s, g_c, delay, w: float) -> complex:
    """Cuff compliance with every feedback passing through the delay model."""
    s = 1j * w
    d = delay.evaluate(w)
    gt = d * g_theta.evaluate(w)
    gs = d * g_s.evaluate(w)
    gc = d * g_c.evaluate(w)
    a = np.array(
        [
            [p.J_m * s * s + p.B_m * s - gt + (1.0 + gs) * p.K_s, -(1.0 + gs) * p.K_s],
            [-p.K_s, p.J_j * s * s + p.K_s],
        ],
        dtype=complex,
    )
    theta_j = np.linalg.solve(a, np.array([gc, 1.0], dtype=complex))[1]
    return complex(theta_j) + 1.0 / p.K_c


class TestInterconnectionRules:
    """Tests for the four interconnection rules."""

    def test_parallel_springs_add_stiffness(self):
        """Test that two springs in parallel have the summed stiffness."""
        pair = CompliancePair(gain(1.0 / 100.0), gain(1.0 / 100.0))

        combined = parallel_interconnect(pair, gain(1.0 / 300.0))

        assert combined.external.dc_gain() == pytest.approx(1.0 / 400.0)

    def test_series_springs_add_compliance(self):
        """Test that two springs in series have summed compliance."""
        pair = CompliancePair(gain(1.0 / 100.0), gain(1.0 / 100.0))

        combined = series_interconnect(pair, gain(1.0 / 300.0))

        assert combined.external.dc_gain() == pytest.approx(1.0 / 100.0 + 1.0 / 300.0)
        assert combined.motor.dc_gain() == pytest.approx(1.0 / 100.0)

    def test_virtual_parallel_of_position_gain(self):
        """Test that tau_m = -K theta acts as a parallel spring of stiffness K."""
        c = motor_compliance(1.0, 6.0)

        virtual = virtual_parallel(CompliancePair(c, c), gain(-25.0))

        assert virtual.dc_gain() == pytest.approx(1.0 / 25.0)

    def test_virtual_parallel_delayed_needs_analysis_flag(self):
        """Test that a delayed motor path cannot be inverted outside analysis."""
        c = motor_compliance(1.0, 6.0)
        pair = CompliancePair(c, c.with_delay(0.002))

        with pytest.raises(NonInvertibleDelay):
            virtual_parallel(pair, gain(-25.0))

        pointwise = virtual_parallel(pair, gain(-25.0), analysis_only=True)
        assert isinstance(pointwise, PointwiseCompliance)
        assert pointwise.delay == pytest.approx(-0.002)
        assert abs(pointwise.evaluate(10.0)) == pytest.approx(1.0 / 25.0)

    def test_virtual_series(self):
        """Test that torque feedback adds G * H1 in series."""
        c = motor_compliance(2.0, 4.0)

        assert virtual_series(CompliancePair(c, c), gain(3.0)).coefficients_close(3.0 * c)


class TestSystemChain:
    """Tests for build_system_chain."""

    def test_c5_matches_direct_solve(self):
        """Test chain C5 against the linear model equations for random plants."""
        rng = np.random.default_rng(7)
        omegas = np.logspace(-1, 3, 50)
        for _ in range(20):
            p = PlantParams(
                J_m=rng.uniform(0.2, 5.0),
                B_m=rng.uniform(0.5, 20.0),
                K_s=rng.uniform(100.0, 5000.0),
                J_j=rng.uniform(0.01, 0.5),
                K_c=rng.uniform(50.0, 2000.0),
            )
            spec = DesignSpec(J_hat=rng.uniform(1.0, 10.0), B_hat=rng.uniform(5.0, 50.0), alpha=rng.uniform(1.0, 10.0))
            bundle = double_compliance_design(spec, p)
            g_theta, g_s, _ = bundle.feedbacks("nominal")
            chain = bundle.chain("nominal")

            got = chain.c5.response(omegas)
            expected = np.array([_direct_c5(p, g_theta, g_s, w) for w in omegas])

            np.testing.assert_allclose(got, expected, rtol=1e-9)

    def test_realized_c7_matches_direct_solve(self, demo_bundle, demo_plant):
        """Test realized C7 against the delayed model equations up to 1e4 rad/s."""
        g_theta, g_s, g_c = demo_bundle.feedbacks("realized")
        delay = pade(demo_plant.T + 0.0005, settings.pade_order)
        omegas = np.logspace(-1, 4, 60)

        got = demo_bundle.chain("realized", dt_ctrl=0.001).c7.response(omegas)

        expected = np.array([_direct_c7(demo_plant, g_theta, g_s, g_c, delay, w) for w in omegas])
        np.testing.assert_allclose(got, expected, rtol=1e-3)

    def test_realized_c7_tends_to_cuff_compliance(self, demo_bundle, demo_plant):
        """Test that realized C7 keeps its full degree and approaches 1/K_c at high frequency."""
        c7 = demo_bundle.chain("realized", dt_ctrl=0.001).c7

        assert c7.num_degree == c7.den_degree
        assert c7.evaluate(1e6) == pytest.approx(1.0 / demo_plant.K_c, rel=1e-2)

    def test_ratio_independent_of_cuff_stiffness(self, demo_bundle, demo_plant):
        """Test that C6/C5 does not depend on K_c for fixed feedbacks."""
        g_theta, g_s, g_c = demo_bundle.feedbacks("nominal")
        omegas = np.logspace(-2, 3, 40)
        ratios = []
        for k_c in (300.0, 3000.0):
            p = demo_plant.model_copy(update={"K_c": k_c})
            chain = build_system_chain(p, g_theta, g_s, g_c, (2.0, 20.0))
            ratios.append(amplification_ratio(chain).response(omegas))

        np.testing.assert_allclose(ratios[0], ratios[1], rtol=1e-9)

    def test_c7_adds_cuff_compliance(self, demo_bundle, demo_plant):
        """Test that C7 - C6 is the cuff spring compliance."""
        chain = demo_bundle.chain("nominal")

        for w in (0.5, 5.0, 50.0):
            assert chain.c7.evaluate(w) - chain.c6.evaluate(w) == pytest.approx(1.0 / demo_plant.K_c)

    def test_zero_position_feedback_skips_stage(self, demo_plant):
        """Test that a zero G_theta leaves S2 equal to S1."""
        chain = build_system_chain(demo_plant, gain(0.0), gain(0.0), gain(0.0), (2.0, 20.0))

        assert chain.s2.external.coefficients_close(chain.s1.external)

    def test_realized_mode_carries_delay_in_motor_path(self, demo_bundle):
        """Test that the realized chain keeps the delay only on the motor path."""
        nominal = demo_bundle.chain("nominal")
        realized = demo_bundle.chain("realized", dt_ctrl=0.001)

        assert realized.s1.external.coefficients_close(nominal.s1.external)
        assert realized.s1.motor.den_degree > nominal.s1.motor.den_degree
        assert realized.mode == "realized"

    def test_realized_low_frequency_agrees_with_nominal(self, demo_bundle):
        """Test that the realized C6 converges to the nominal one at low frequency."""
        nominal = demo_bundle.chain("nominal").c6
        realized = demo_bundle.chain("realized", dt_ctrl=0.001).c6

        w = 0.05
        assert abs(realized.evaluate(w) / nominal.evaluate(w) - 1.0) < 0.01

    def test_virtual_target(self, demo_bundle):
        """Test the recorded virtual motor target."""
        chain = demo_bundle.chain("nominal")

        assert chain.s5_hat.external.coefficients_close(tf([1.0], [0.0, 20.0, 2.0]))
        assert math.isinf(chain.s5_hat.external.dc_gain())
