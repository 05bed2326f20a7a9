"""
Unit tests for the plant integrator, scenario runners and trace post-processing.
Run: pytest tests/unit/test_sim.py -v
"""
import math

import numpy as np
import pandas as pd
import pytest

from app.core.exceptions import ConfigValidationError, InstabilityDetected, NonFiniteState
from app.schemas.config import JacobianPoint
from app.schemas.dob import DobSettings, QFilter
from app.schemas.sim import FrictionModel, HumanModel, SimConfig
from app.services.dob import dob_stability_margin
from app.services.shaping import double_compliance_design, schedule_gains
from app.services.sim import (
    TRACE_COLUMNS,
    Boundary,
    PlantModel,
    PlantState,
    ShapingController,
    classify_growth,
    estimate_frequency_response,
    growth_rate,
    hysteresis_loop_area,
    run_coupled_human,
    run_free,
    run_locked_output,
    step_plant,
    steady_ratio,
    triangular_profile,
)


def _stored_energy(p, s: PlantState, human: HumanModel | None = None) -> float:
    energy = 0.5 * p.J_m * s.omega_m**2 + 0.5 * p.J_j * s.omega_j**2 + 0.5 * p.K_s * (s.theta_j - s.theta_m) ** 2
    if human is not None:
        energy += 0.5 * human.J_h * s.omega_h**2 + 0.5 * p.K_c * (s.theta_h - s.theta_j) ** 2
    return energy


class TestStepPlant:
    """Tests for step_plant and PlantModel."""

    def test_rest_stays_at_rest(self, demo_plant):
        """Test that an unforced plant does not move."""
        state = step_plant(PlantState(), 0.0, Boundary("free"), FrictionModel(), 0.001, demo_plant)

        assert state == PlantState()

    def test_motor_accelerates_under_torque(self, demo_plant):
        """Test the first step of a torque step on the locked motor."""
        state = step_plant(PlantState(), 1.0, Boundary("locked"), FrictionModel(), 0.001, demo_plant)

        assert state.omega_m == pytest.approx(0.001 / demo_plant.J_m, rel=0.01)
        assert state.theta_j == 0.0

    def test_locked_motor_settles_on_spring(self, demo_plant):
        """Test that a held motor torque balances the spring: K_s theta_m = tau_m."""
        state = PlantState()

        for _ in range(6000):
            state = step_plant(state, 10.0, Boundary("locked"), FrictionModel(), 0.001, demo_plant)

        assert state.theta_m == pytest.approx(10.0 / demo_plant.K_s, rel=1e-4)
        assert state.theta_j == 0.0

    @pytest.mark.parametrize("human", [None, HumanModel(kind="inertia", J_h=0.5)])
    def test_energy_balance(self, demo_plant, human):
        """Test that stored energy changes by motor work minus damping loss over one second."""
        boundary = Boundary("free") if human is None else Boundary("human", human)
        dt = 1e-4
        state = PlantState()
        energy = [0.0]
        work = 0.0

        for k in range(10000):
            t = k * dt
            tau_m = 5.0 * math.sin(2.0 * math.pi * 2.0 * t) + 2.0 * math.sin(2.0 * math.pi * 15.0 * t)
            after = step_plant(state, tau_m, boundary, FrictionModel(), dt, demo_plant, t=t)
            work += tau_m * (after.theta_m - state.theta_m)
            work -= demo_plant.B_m * 0.5 * (state.omega_m**2 + after.omega_m**2) * dt
            state = after
            energy.append(_stored_energy(demo_plant, state, human))

        assert abs(energy[-1] - work) <= 1e-3 * max(energy)

    def test_friction_opposes_motion(self, demo_plant):
        """Test the smoothed Coulomb torque."""
        model = PlantModel(demo_plant, FrictionModel(F_c=20.0), Boundary("free"))

        assert model.friction_torque(1.0) == pytest.approx(-20.0)
        assert model.friction_torque(-1.0) == pytest.approx(20.0)
        assert model.friction_torque(0.0) == 0.0

    def test_spring_human_is_quasi_static(self, demo_plant):
        """Test that a spring operator sits at the static balance of both springs."""
        human = HumanModel(kind="spring", K_h=3000.0)
        model = PlantModel(demo_plant, FrictionModel(), Boundary("human", human))
        x = PlantState(theta_j=0.1).as_tuple()

        theta_h = model.human_angle(x, 0.0, 0.0)

        assert theta_h == pytest.approx(300.0 * 0.1 / 3300.0)
        assert model.cuff_torque(x, 0.0, 0.0) == pytest.approx(300.0 * (theta_h - 0.1))

    def test_prescribed_motion_is_interpolated(self, demo_plant):
        """Test that a prescribed operator follows its samples."""
        human = HumanModel(kind="prescribed-motion", motion=[(0.0, 0.0), (1.0, 0.2)])
        model = PlantModel(demo_plant, FrictionModel(), Boundary("human", human))

        assert model.human_angle(PlantState().as_tuple(), 0.5, 0.0) == pytest.approx(0.1)

    def test_constraint_torque(self, demo_plant):
        """Test the fixture torque of a locked joint."""
        model = PlantModel(demo_plant, FrictionModel(), Boundary("locked"))
        x = PlantState(theta_m=0.01).as_tuple()

        assert model.constraint_torque(x, 2.0) == pytest.approx(-5.0 - 2.0)


class TestTraceMetrics:
    """Tests for post-processing helpers."""

    def test_steady_ratio(self):
        """Test the least-squares amplification slope."""
        frame = pd.DataFrame({"tau_c": [1.0, 2.0, -2.0], "tau_s": [-3.0, -6.0, 6.0]})

        assert steady_ratio(frame) == pytest.approx(3.0)

    def test_steady_ratio_without_input(self):
        """Test that an empty or zero-input trace has no ratio."""
        assert steady_ratio(pd.DataFrame(columns=["tau_c", "tau_s"])) is None
        assert steady_ratio(pd.DataFrame({"tau_c": [0.0, 0.0], "tau_s": [1.0, 2.0]})) is None

    def test_coulomb_loop_area(self):
        """Test that a Coulomb loop encloses 4 F_c A."""
        t = np.linspace(0.0, 1.0, 20001)
        theta = 0.5 * np.sin(2.0 * math.pi * t)
        torque = 20.0 * np.sign(np.cos(2.0 * math.pi * t))

        assert hysteresis_loop_area(theta, torque) == pytest.approx(40.0, rel=0.01)

    def test_loop_area_of_short_path(self):
        """Test that a single sample encloses nothing."""
        assert hysteresis_loop_area(np.array([1.0]), np.array([2.0])) == 0.0

    def test_triangular_profile(self):
        """Test the corners of the triangular cuff torque."""
        profile = triangular_profile(5.0, 4.0)

        assert profile(0.0) == pytest.approx(0.0)
        assert profile(1.0) == pytest.approx(5.0)
        assert profile(2.0) == pytest.approx(0.0)
        assert profile(3.0) == pytest.approx(-5.0)

    def test_frequency_response_fit(self):
        """Test the sine fit against a known gain and phase with offset and drift."""
        omega = 3.0
        t = np.linspace(0.0, 10.0, 2001)
        u = np.sin(omega * t)
        y = 2.0 * np.sin(omega * t - math.pi / 4.0) + 0.3 + 0.1 * t

        g = estimate_frequency_response(t, u, y, omega)

        assert abs(g) == pytest.approx(2.0, rel=1e-9)
        assert np.angle(g) == pytest.approx(-math.pi / 4.0, rel=1e-9)


class TestGrowthRate:
    """Tests for the envelope growth fit and its verdict."""

    @pytest.mark.parametrize("sigma", [-1.0, 0.5])
    def test_exponential_envelope(self, sigma):
        """Test that the fit recovers the envelope rate of a damped or growing sine."""
        t = np.linspace(0.0, 5.0, 5001)

        rate = growth_rate(np.exp(sigma * t) * np.sin(10.0 * t), t)

        assert rate == pytest.approx(sigma, rel=0.05)

    def test_sustained_oscillation(self):
        """Test that a pure sine has no growth."""
        t = np.linspace(0.0, 5.0, 5001)

        assert abs(growth_rate(np.sin(10.0 * t), t)) < 0.01

    def test_zero_signal(self):
        """Test that a silent trace has zero growth."""
        assert growth_rate(np.zeros(100), np.arange(100.0)) == 0.0

    def test_classification_band(self):
        """Test the stable / oscillatory / unstable band."""
        assert classify_growth(-1.0) == "stable"
        assert classify_growth(0.0) == "oscillatory"
        assert classify_growth(0.5) == "unstable"
        assert classify_growth(math.inf) == "unstable"


class TestLockedOutput:
    """Tests for run_locked_output."""

    def test_amplification_ratio(self, demo_bundle, demo_plant, fast_sim):
        """Test that the locked joint shows tau_s tracking (alpha - 1) tau_c."""
        trace = run_locked_output(demo_bundle, demo_plant, fast_sim)

        assert trace.metrics["tau_ratio_steady"] == pytest.approx(7.0, rel=0.05)
        assert (trace.frame["theta_j"] == 0.0).all()
        assert list(trace.frame.columns) == TRACE_COLUMNS

    def test_zero_duration(self, demo_bundle, demo_plant):
        """Test that a zero-length run gives an empty trace."""
        trace = run_locked_output(demo_bundle, demo_plant, SimConfig(duration=0.0))

        assert trace.frame.empty
        assert trace.metrics["tau_ratio_steady"] is None

    def test_deterministic_with_seed(self, demo_bundle, demo_plant):
        """Test that a seeded noisy run is reproducible."""
        cfg = SimConfig(duration=0.5, substeps=2, noise_std=0.1, seed=3)

        first = run_locked_output(demo_bundle, demo_plant, cfg)
        second = run_locked_output(demo_bundle, demo_plant, cfg)

        pd.testing.assert_frame_equal(first.frame, second.frame)

    def test_profile_samples(self, demo_bundle, demo_plant):
        """Test that a sampled cuff torque profile is interpolated."""
        cfg = SimConfig(duration=0.1, substeps=2)

        trace = run_locked_output(demo_bundle, demo_plant, cfg, human_torque_profile=[(0.0, 0.0), (1.0, 10.0)])

        assert trace.frame["tau_c"].iloc[50] == pytest.approx(0.5)

    def test_csv_round_trip(self, demo_bundle, demo_plant, tmp_path):
        """Test that the trace CSV keeps the fixed header."""
        trace = run_locked_output(demo_bundle, demo_plant, SimConfig(duration=0.05))
        path = tmp_path / "trace.csv"

        trace.to_csv(path)

        assert list(pd.read_csv(path).columns) == TRACE_COLUMNS

    @pytest.mark.slow
    def test_unit_alpha_gives_no_amplification(self, demo_spec, demo_plant, fast_sim):
        """Test that alpha = 1 leaves tau_s near zero against tau_c."""
        bundle = double_compliance_design(demo_spec.model_copy(update={"alpha": 1.0}), demo_plant)

        trace = run_locked_output(bundle, demo_plant, fast_sim)

        assert trace.metrics["tau_ratio_steady"] == pytest.approx(0.0, abs=0.1)

    def test_observer_is_neutral_without_friction(self, demo_bundle, demo_plant):
        """Test that the observer adds nothing when the motor model is exact."""
        cfg = SimConfig(duration=2.0, substeps=4)

        plain = run_locked_output(demo_bundle, demo_plant, cfg)
        observed = run_locked_output(demo_bundle, demo_plant, cfg, dob=DobSettings())

        scale = plain.frame["tau_s"].abs().max()
        assert observed.frame["delta_hat"].abs().max() <= 1e-3 * scale
        np.testing.assert_allclose(observed.frame["tau_s"], plain.frame["tau_s"], rtol=0.0, atol=1e-3 * scale)

    def test_nominal_delay_with_unaware_observer_runs(self, demo_bundle, demo_plant):
        """Test that the default cutoff tolerates the nominal delay when fed the raw command."""
        dob = DobSettings(delay_aware=False, saturation=1e12)
        cfg = SimConfig(duration=2.0, substeps=4, torque_limit=1e12)

        trace = run_locked_output(demo_bundle, demo_plant, cfg, dob=dob)

        assert np.isfinite(trace.frame["delta_hat"]).all()

    @pytest.mark.slow
    def test_doubled_critical_delay_diverges(self, demo_bundle, demo_plant):
        """Test that twice the observer's critical delay makes the run diverge."""
        q = QFilter()
        critical = dob_stability_margin(q, demo_plant.T).critical_omega_q
        critical_delay = demo_plant.T * critical / q.omega_q
        cfg = SimConfig(duration=4.0, substeps=4, torque_limit=1e12)
        cfg = cfg.model_copy(update={"delay_steps": 2 * math.ceil(critical_delay / cfg.dt_ctrl)})
        dob = DobSettings(delay_aware=False, saturation=1e12)

        with pytest.raises(InstabilityDetected):
            run_locked_output(demo_bundle, demo_plant, cfg, dob=dob)


class TestShapingController:
    """Tests for the discrete controller."""

    def test_quiet_inputs_give_zero_torque(self, demo_bundle):
        """Test that zero sensors command zero torque."""
        controller = ShapingController(demo_bundle, 0.001, 200.0)

        assert controller(0.0, 0.0, 0.0, 0.0) == 0.0


class TestCoupledHuman:
    """Tests for run_coupled_human."""

    def test_divergence_is_unstable_verdict(self, demo_bundle, demo_plant, mocker):
        """Test that a divergence inside the run becomes an unstable verdict."""
        mocker.patch(
            "app.services.sim._simulate",
            side_effect=InstabilityDetected("tau_c exceeded", time=0.25, signal="tau_c"),
        )

        trace = run_coupled_human(demo_bundle, demo_plant, HumanModel(kind="spring", K_h=3000.0), SimConfig())

        assert trace.verdict == "unstable"
        assert math.isinf(trace.metrics["growth_rate"])
        assert trace.metrics["diverged_at"] == 0.25

    def test_trace_records_human_angle(self, demo_bundle, demo_plant):
        """Test that a short coupled run records the operator angle."""
        cfg = SimConfig(duration=0.2, substeps=2)

        trace = run_coupled_human(demo_bundle, demo_plant, HumanModel(kind="spring", K_h=300.0), cfg)

        assert trace.verdict in ("stable", "oscillatory", "unstable")
        assert trace.frame["theta_h"].abs().max() > 0.0


class TestDivergence:
    """Tests for the divergence and resolution checks of the run loop."""

    def test_non_finite_command(self, demo_bundle, demo_plant, mocker):
        """Test that a NaN command stops the run at once."""
        mocker.patch.object(ShapingController, "__call__", return_value=math.nan)

        with pytest.raises(NonFiniteState) as exc_info:
            run_locked_output(demo_bundle, demo_plant, SimConfig(duration=0.1))

        assert exc_info.value.signal == "command"
        assert exc_info.value.time == 0.0

    def test_command_beyond_bound(self, demo_bundle, demo_plant, mocker):
        """Test that a command past the bound is reported even when the actuator could apply it."""
        mocker.patch.object(ShapingController, "__call__", return_value=1e9)

        with pytest.raises(InstabilityDetected) as exc_info:
            run_locked_output(demo_bundle, demo_plant, SimConfig(duration=0.1, torque_limit=1e12))

        assert exc_info.value.signal == "command"

    def test_runaway_angle(self, demo_bundle, demo_plant, mocker):
        """Test that a state past the bound is reported while every torque stays inside it."""
        mocker.patch.object(ShapingController, "__call__", return_value=1e6)
        undamped = demo_plant.model_copy(update={"B_m": 1e-6})
        cfg = SimConfig(duration=4.0, substeps=2, torque_limit=1e12)

        with pytest.raises(InstabilityDetected) as exc_info:
            run_free(demo_bundle, undamped, cfg)

        assert exc_info.value.signal in ("theta_m", "theta_j")
        assert exc_info.value.time > 1.0

    def test_coarse_step_rejected_for_stiff_cuff(self, demo_bundle, demo_plant):
        """Test that a run refuses an integration step that undersamples the cuff mode."""
        rigid = demo_plant.model_copy(update={"K_c": 3e6})

        with pytest.raises(ConfigValidationError, match="substeps"):
            run_free(demo_bundle, rigid, SimConfig(duration=0.1, substeps=1))


class TestGainScheduling:
    """Tests for rescheduling along a Jacobian table."""

    @pytest.mark.slow
    def test_free_joint_gains_vary_continuously(self, demo_bundle, demo_plant, mocker):
        """Test that a free-joint run reschedules smoothly without torque jumps."""
        table = [
            JacobianPoint(angle_rad=-0.1, scale=1.3),
            JacobianPoint(angle_rad=0.0, scale=1.0),
            JacobianPoint(angle_rad=0.1, scale=1.3),
        ]
        cfg = SimConfig(duration=1.0, substeps=2)
        scheduled = []

        def recording(spec, p, j):
            bundle = schedule_gains(spec, p, j)
            scheduled.append((j, bundle.sea.K1))
            return bundle

        mocker.patch("app.services.sim.schedule_gains", side_effect=recording)
        trace = run_free(demo_bundle, demo_plant, cfg, jacobian_table=table)
        heavy = schedule_gains(demo_bundle.spec, demo_plant, 1.3)
        fixed = [run_free(demo_bundle, demo_plant, cfg), run_free(heavy, heavy.plant, cfg)]

        scales = np.array([j for j, _ in scheduled])
        k1 = np.array([k for _, k in scheduled])
        assert scales.max() - scales.min() > 0.05
        assert np.max(np.abs(np.diff(scales))) < 0.005
        assert np.max(np.abs(np.diff(k1))) <= 0.01 * np.max(np.abs(k1))
        slew = np.max(np.abs(np.diff(trace.frame["tau_m"])))
        assert slew <= 2.0 * max(np.max(np.abs(np.diff(f.frame["tau_m"]))) for f in fixed)
