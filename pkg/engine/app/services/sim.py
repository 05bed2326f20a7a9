"""
Fixed-step nonlinear simulation of the single-joint exoskeleton.

Plant (reflected to the joint):

    J_m theta_m'' = tau_s + tau_m + delta_f - B_m theta_m'
    J_j theta_j'' = tau_c - tau_s
    tau_s = K_s (theta_j - theta_m),   delta_f = -F_c tanh(theta_m' / v_eps)

The controller runs every dt_ctrl on sampled sensors; its torque passes a
delay line of delay_steps samples and is held over the step while the plant
is integrated with RK4 at dt_ctrl / substeps. Order inside one control step:
sense, observer update with the torque applied over the previous interval,
control law, friction compensation, saturation and slew limit, delay line,
integrate.
"""
import math
from collections import deque
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import numpy.typing as npt
import pandas as pd

from app.core.exceptions import ConfigValidationError, InstabilityDetected, NonFiniteState
from app.core.logging import get_logger
from app.schemas.config import JacobianPoint
from app.schemas.dob import DobSettings, QFilter
from app.schemas.plant import PlantParams
from app.schemas.sim import FrictionModel, HumanModel, SimConfig
from app.services.dob import DobState
from app.services.shaping import ControllerBundle, derivative_filter, jacobian_scale_at, schedule_gains
from app.services.tf_core import DiscreteFilterState, discretize_tustin, tf


logger = get_logger(__name__)

TRACE_COLUMNS = ["t", "theta_m", "theta_j", "theta_h", "tau_s", "tau_c", "tau_m", "delta_f", "delta_hat"]

# Divergence bound relative to the scenario's input scale
DIVERGENCE_FACTOR = 1e6
# Envelope growth-rate band (1/s) for the coupled verdict
GROWTH_BAND = 0.05

Verdict = Literal["stable", "oscillatory", "unstable"]
State = tuple[float, float, float, float, float, float]
STATE_NAMES = ("theta_m", "omega_m", "theta_j", "omega_j", "theta_h", "omega_h")


@dataclass(frozen=True)
class PlantState:
    theta_m: float = 0.0
    omega_m: float = 0.0
    theta_j: float = 0.0
    omega_j: float = 0.0
    # human-side states, used by inertia and spring-damper operators
    theta_h: float = 0.0
    omega_h: float = 0.0

    def as_tuple(self) -> State:
        return (self.theta_m, self.omega_m, self.theta_j, self.omega_j, self.theta_h, self.omega_h)


@dataclass(frozen=True)
class Boundary:
    """
    Output-side termination.

    locked: joint held at zero, tau_c prescribed
    free: joint free, tau_c prescribed
    human: operator model behind the cuff spring, external torque pushes the human
    """

    kind: Literal["locked", "free", "human"]
    human: HumanModel | None = None


@dataclass
class SimTrace:
    """Uniformly sampled run record plus scenario metrics."""

    frame: pd.DataFrame
    scenario: str
    control: npt.NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    metrics: dict[str, float | None] = field(default_factory=dict)
    verdict: Verdict | None = None

    def to_csv(self, path) -> None:
        self.frame.to_csv(path, index=False, float_format="%.17g")


class PlantModel:
    """Right-hand side and RK4 step for one plant + boundary + friction."""

    def __init__(self, p: PlantParams, friction: FrictionModel, boundary: Boundary):
        self.boundary = boundary
        self.friction = friction
        self.K_c = p.K_c
        self.J_j = p.J_j
        self.set_motor(p.J_m, p.B_m, p.K_s)
        human = boundary.human
        self._motion_t: npt.NDArray[np.float64] | None = None
        self._motion_x: npt.NDArray[np.float64] | None = None
        if human is not None and human.kind == "prescribed-motion":
            self._motion_t = np.array([row[0] for row in human.motion])
            self._motion_x = np.array([row[1] for row in human.motion])

    def set_motor(self, J_m: float, B_m: float, K_s: float) -> None:
        self.J_m = J_m
        self.B_m = B_m
        self.K_s = K_s

    def friction_torque(self, omega_m: float) -> float:
        if self.friction.F_c == 0.0:
            return 0.0
        return -self.friction.F_c * math.tanh(omega_m / self.friction.v_eps)

    def spring_torque(self, x: State) -> float:
        return self.K_s * (x[2] - x[0])

    def human_angle(self, x: State, t: float, tau_ext: float) -> float:
        human = self.boundary.human
        if self.boundary.kind != "human" or human is None or human.kind == "none":
            return 0.0
        if human.kind == "spring" or (human.kind == "spring-damper" and human.B_h == 0.0):
            return (tau_ext + self.K_c * x[2]) / (human.K_h + self.K_c)
        if human.kind == "prescribed-motion":
            return float(np.interp(t, self._motion_t, self._motion_x))
        return x[4]

    def cuff_torque(self, x: State, t: float, tau_ext: float) -> float:
        kind = self.boundary.kind
        human = self.boundary.human
        if kind != "human" or human is None or human.kind == "none":
            return tau_ext
        return self.K_c * (self.human_angle(x, t, tau_ext) - x[2])

    def constraint_torque(self, x: State, tau_ext: float) -> float:
        """Torque the fixture applies to hold a locked joint."""
        return self.spring_torque(x) - tau_ext

    def derivatives(self, x: State, t: float, tau_m: float, tau_ext: float) -> State:
        theta_m, omega_m, theta_j, omega_j, theta_h, omega_h = x
        tau_s = self.K_s * (theta_j - theta_m)
        a_m = (tau_s + tau_m + self.friction_torque(omega_m) - self.B_m * omega_m) / self.J_m
        if self.boundary.kind == "locked":
            return (omega_m, a_m, 0.0, 0.0, 0.0, 0.0)

        tau_c = self.cuff_torque(x, t, tau_ext)
        a_j = (tau_c - tau_s) / self.J_j
        human = self.boundary.human
        d_h, a_h = 0.0, 0.0
        if self.boundary.kind == "human" and human is not None:
            if human.kind == "inertia":
                d_h, a_h = omega_h, (tau_ext - tau_c) / human.J_h
            elif human.kind == "spring-damper" and human.B_h > 0.0:
                d_h = (tau_ext - human.K_h * theta_h - tau_c) / human.B_h
        return (omega_m, a_m, omega_j, a_j, d_h, a_h)

    def rk4(self, x: State, t: float, tau_m: float, tau_ext: float, h: float) -> State:
        f = self.derivatives
        k1 = f(x, t, tau_m, tau_ext)
        x2 = tuple(xi + 0.5 * h * ki for xi, ki in zip(x, k1))
        k2 = f(x2, t + 0.5 * h, tau_m, tau_ext)
        x3 = tuple(xi + 0.5 * h * ki for xi, ki in zip(x, k2))
        k3 = f(x3, t + 0.5 * h, tau_m, tau_ext)
        x4 = tuple(xi + h * ki for xi, ki in zip(x, k3))
        k4 = f(x4, t + h, tau_m, tau_ext)
        return tuple(
            xi + h / 6.0 * (a + 2.0 * b + 2.0 * c + d) for xi, a, b, c, d in zip(x, k1, k2, k3, k4)
        )


def step_plant(
    state: PlantState,
    tau_m: float,
    boundary: Boundary,
    friction: FrictionModel,
    dt: float,
    plant: PlantParams,
    t: float = 0.0,
    tau_ext: float = 0.0,
) -> PlantState:
    """
    One RK4 step of the plant with the motor and external torques held.

    Raises:
        NonFiniteState: the step produced NaN or infinity
    """
    model = PlantModel(plant, friction, boundary)
    x = model.rk4(state.as_tuple(), t, tau_m, tau_ext, dt)
    if not all(math.isfinite(v) for v in x):
        raise NonFiniteState("plant state became non-finite", time=t + dt, signal="state")
    return PlantState(*x)


class ShapingController:
    """Discrete realization of the composite law tau_m = G_theta theta_m + G_s tau_s + G_c tau_c."""

    def __init__(self, bundle: ControllerBundle, dt: float, derivative_cutoff_hz: float):
        self.dt = dt
        self.cutoff = derivative_cutoff_hz
        self._filters = [DiscreteFilterState(d) for d in self._discretize(bundle)]

    def _discretize(self, bundle: ControllerBundle):
        return [discretize_tustin(g, self.dt) for g in bundle.feedbacks("realized", self.cutoff)]

    def retune(self, bundle: ControllerBundle) -> None:
        for runner, dtf in zip(self._filters, self._discretize(bundle)):
            runner.retune(dtf)

    def __call__(self, t: float, theta_m: float, tau_s: float, tau_c: float) -> float:
        f_theta, f_s, f_c = self._filters
        return f_theta.step(theta_m) + f_s.step(tau_s) + f_c.step(tau_c)


class PositionController:
    """PD on theta_m with a filtered derivative, tracking A sin(2 pi f t)."""

    def __init__(self, kp: float, kd: float, amplitude: float, freq_hz: float, dt: float, derivative_cutoff_hz: float):
        s = tf([0.0, 1.0]) * derivative_filter(2.0 * math.pi * derivative_cutoff_hz)
        self._pd = DiscreteFilterState(discretize_tustin(kp + kd * s, dt))
        self.amplitude = amplitude
        self.omega = 2.0 * math.pi * freq_hz

    def reference(self, t: float) -> float:
        return self.amplitude * math.sin(self.omega * t)

    def __call__(self, t: float, theta_m: float, tau_s: float, tau_c: float) -> float:
        return self._pd.step(self.reference(t) - theta_m)


Controller = Callable[[float, float, float, float], float]
External = Callable[[int, float], float]


def _observer(p: PlantParams, dob: DobSettings | None, cfg: SimConfig) -> DobState | None:
    if dob is None or not dob.enabled:
        return None
    saturation = dob.saturation if dob.saturation is not None else 2.0 * cfg.torque_limit
    return DobState(p.J_m, p.B_m, dob.q_filter(), cfg.dt_ctrl, saturation)


def _check_divergence(signals: dict[str, float], bound: float, t: float) -> None:
    """
    Raises:
        NonFiniteState: a state, torque or command is NaN or infinite
        InstabilityDetected: one exceeds the divergence bound
    """
    for name, value in signals.items():
        if not math.isfinite(value):
            raise NonFiniteState(f"{name} became non-finite at t={t:.4f}s", time=t, signal=name)
    for name, value in signals.items():
        if abs(value) > bound:
            logger.warning("sim.instability", time=t, signal=name, bound=bound)
            raise InstabilityDetected(f"{name} exceeded {bound:g} at t={t:.4f}s", time=t, signal=name)


def _simulate(
    p: PlantParams,
    cfg: SimConfig,
    boundary: Boundary,
    controller: Controller,
    external: External,
    input_scale: float,
    dob: DobSettings | None = None,
    friction: FrictionModel | None = None,
    schedule: Callable[[float], tuple[PlantParams, ControllerBundle | None]] | None = None,
    on_schedule: Callable[[ControllerBundle], None] | None = None,
    duration: float | None = None,
) -> tuple[pd.DataFrame, npt.NDArray[np.float64]]:
    try:
        cfg.check_resolution(p, boundary.human)
    except ValueError as exc:
        raise ConfigValidationError(str(exc)) from exc
    friction = cfg.friction if friction is None else friction
    duration = cfg.duration if duration is None else duration
    dt = cfg.dt_ctrl
    h = dt / cfg.substeps
    n_steps = int(round(duration / dt))
    delay_steps = cfg.resolved_delay_steps(p.T)

    model = PlantModel(p, friction, boundary)
    observer = _observer(p, dob, cfg)
    delay_aware = True if dob is None else dob.delay_aware
    rng = np.random.default_rng(cfg.seed)
    line: deque[float] = deque([0.0] * delay_steps)
    bound = DIVERGENCE_FACTOR * max(input_scale, 1.0)

    x: State = PlantState().as_tuple()
    rows = np.empty((n_steps, len(TRACE_COLUMNS)))
    control = np.empty(n_steps)
    applied_prev = 0.0
    command_prev = 0.0
    saturated_prev = False
    scale_prev = None

    for k in range(n_steps):
        t = k * dt
        tau_ext = external(k, t)

        if schedule is not None:
            j_params, j_bundle = schedule(x[2])
            if j_params is not scale_prev:
                model.set_motor(j_params.J_m, j_params.B_m, j_params.K_s)
                if observer is not None:
                    observer.retune(j_params.J_m, j_params.B_m)
                if j_bundle is not None and on_schedule is not None:
                    on_schedule(j_bundle)
                scale_prev = j_params

        theta_m = x[0]
        tau_s = model.spring_torque(x)
        tau_c = model.cuff_torque(x, t, tau_ext)
        tau_s_meas = tau_s
        tau_c_meas = tau_c + cfg.tau_c_bias
        if cfg.noise_std > 0.0:
            tau_s_meas += cfg.noise_std * rng.standard_normal()
            tau_c_meas += cfg.noise_std * rng.standard_normal()

        delta_hat = 0.0
        if observer is not None:
            fed = applied_prev if delay_aware else command_prev
            delta_hat = observer.update(theta_m, tau_s_meas, fed, freeze=saturated_prev)

        u = controller(t, theta_m, tau_s_meas, tau_c_meas)
        command = u - delta_hat
        if cfg.max_torque_rate is not None:
            step = cfg.max_torque_rate * dt
            command = min(max(command, command_prev - step), command_prev + step)
        limited = min(max(command, -cfg.torque_limit), cfg.torque_limit)
        saturated_prev = limited != command
        command = limited

        if delay_steps:
            line.append(command)
            applied = line.popleft()
        else:
            applied = command

        delta_f = model.friction_torque(x[1])
        rows[k] = (
            t,
            x[0],
            x[2],
            model.human_angle(x, t, tau_ext),
            tau_s,
            tau_c,
            applied,
            delta_f,
            delta_hat,
        )
        control[k] = u

        _check_divergence(
            dict(zip(STATE_NAMES, x), tau_s=tau_s, tau_c=tau_c, command=u, tau_m=applied, delta_hat=delta_hat),
            bound,
            t,
        )

        for i in range(cfg.substeps):
            x = model.rk4(x, t + i * h, applied, tau_ext, h)
        if not all(math.isfinite(v) for v in x):
            raise NonFiniteState("plant state became non-finite", time=t + dt, signal="state")

        applied_prev = applied
        command_prev = command

    return pd.DataFrame(rows, columns=TRACE_COLUMNS), control


def _scheduler(bundle: ControllerBundle, table: list[JacobianPoint] | None):
    if not table:
        return None
    cache: dict[float, tuple[PlantParams, ControllerBundle]] = {}

    def schedule(theta_j: float) -> tuple[PlantParams, ControllerBundle]:
        j = round(jacobian_scale_at(table, theta_j), 9)
        if j not in cache:
            scheduled = schedule_gains(bundle.spec, bundle.plant, j)
            cache[j] = (scheduled.plant, scheduled)
        return cache[j]

    return schedule


def triangular_profile(amplitude: float, period: float) -> Callable[[float], float]:
    def profile(t: float) -> float:
        phase = (t / period) % 1.0
        return amplitude * (4.0 * phase if phase < 0.25 else 2.0 - 4.0 * phase if phase < 0.75 else 4.0 * phase - 4.0)

    return profile


def _profile_function(profile, cfg: SimConfig) -> Callable[[float], float]:
    if profile is None:
        return triangular_profile(cfg.cuff_torque_amplitude, cfg.cuff_torque_period)
    if callable(profile):
        return profile
    samples = np.asarray(profile, dtype=float)
    return lambda t: float(np.interp(t, samples[:, 0], samples[:, 1]))


def steady_ratio(frame: pd.DataFrame) -> float | None:
    """Least-squares slope of -tau_s against tau_c over samples with |tau_c| >= half its peak."""
    if frame.empty:
        return None
    tau_c = frame["tau_c"].to_numpy()
    tau_s = frame["tau_s"].to_numpy()
    peak = np.max(np.abs(tau_c))
    if peak == 0.0:
        return None
    mask = np.abs(tau_c) >= 0.5 * peak
    return float(np.sum(-tau_s[mask] * tau_c[mask]) / np.sum(tau_c[mask] ** 2))


def run_locked_output(
    bundle: ControllerBundle,
    p: PlantParams,
    cfg: SimConfig,
    human_torque_profile=None,
    dob: DobSettings | None = None,
    jacobian_table: list[JacobianPoint] | None = None,
) -> SimTrace:
    """
    Strength-amplification test with the joint locked.

    Args:
        human_torque_profile: callable t -> tau_c, or (t, tau_c) samples;
            defaults to a triangular wave from cfg
        dob: observer settings; None runs without an observer

    Returns:
        SimTrace with metric ``tau_ratio_steady`` (expected alpha - 1)

    Raises:
        InstabilityDetected: a state or torque exceeded the divergence bound
        ConfigValidationError: dt_ctrl / substeps undersamples the fastest plant mode
    """
    profile = _profile_function(human_torque_profile, cfg)
    controller = ShapingController(bundle, cfg.dt_ctrl, cfg.derivative_cutoff_hz)
    frame, control = _simulate(
        p,
        cfg,
        Boundary("locked"),
        controller,
        lambda k, t: profile(t),
        input_scale=max(cfg.cuff_torque_amplitude, 1.0),
        dob=dob,
        schedule=_scheduler(bundle, jacobian_table),
        on_schedule=controller.retune,
    )
    ratio = steady_ratio(frame)
    logger.info("sim.locked_output_complete", samples=len(frame), tau_ratio_steady=ratio)
    return SimTrace(frame, "locked-output", control, {"tau_ratio_steady": ratio})


def hysteresis_loop_area(theta: npt.NDArray[np.float64], torque: npt.NDArray[np.float64]) -> float:
    """Closed-path integral of torque d(theta) by the trapezoid rule."""
    if theta.size < 2:
        return 0.0
    return float(np.sum(0.5 * (torque[1:] + torque[:-1]) * np.diff(theta)))


def run_dob_hysteresis_test(
    p: PlantParams,
    friction: FrictionModel,
    q: QFilter,
    cfg: SimConfig,
    position_amplitude: float,
    position_freq: float,
    dob_enabled: bool,
    dob: DobSettings | None = None,
    cycles: float = 1.25,
) -> SimTrace:
    """
    Slow sinusoidal position tracking with a PD loop on the motor, joint free.

    The loop area is the integral of the position controller output (before
    friction compensation) against theta_j over the last full cycle.
    """
    observer = dob or DobSettings()
    observer = observer.model_copy(
        update={"omega_q": q.omega_q, "zeta_q": q.zeta_q, "enabled": dob_enabled}
    )
    controller = PositionController(
        cfg.kp, cfg.kd, position_amplitude, position_freq, cfg.dt_ctrl, cfg.derivative_cutoff_hz
    )
    period = 1.0 / position_freq
    frame, control = _simulate(
        p,
        cfg,
        Boundary("free"),
        controller,
        lambda k, t: 0.0,
        input_scale=max(cfg.kp * position_amplitude, friction.F_c, 1.0),
        dob=observer,
        friction=friction,
        duration=cycles * period,
    )
    t = frame["t"].to_numpy()
    last = t >= t[-1] - period if t.size else np.zeros(0, dtype=bool)
    area = hysteresis_loop_area(frame["theta_j"].to_numpy()[last], control[last])
    logger.info("sim.hysteresis_complete", dob_enabled=dob_enabled, F_c=friction.F_c, loop_area=area)
    return SimTrace(frame, "dob-hysteresis", control, {"loop_area": area})


def growth_rate(signal, t) -> float:
    """
    Exponential envelope rate (1/s) of a signal: log-linear fit through the
    local maxima of |signal| above the numerical floor.
    """
    x = np.abs(np.asarray(signal, dtype=float))
    t = np.asarray(t, dtype=float)
    if x.size < 4 or np.max(x) == 0.0:
        return 0.0
    floor = 1e-9 * np.max(x)
    peaks = np.nonzero((x[1:-1] >= x[:-2]) & (x[1:-1] > x[2:]) & (x[1:-1] > floor))[0] + 1
    if peaks.size >= 3:
        slope, _ = np.polyfit(t[peaks], np.log(x[peaks]), 1)
        return float(slope)
    quarter = x.size // 4
    first = np.sqrt(np.mean(x[:quarter] ** 2))
    last = np.sqrt(np.mean(x[-quarter:] ** 2))
    if first == 0.0 or last == 0.0:
        return -math.inf if last == 0.0 else math.inf
    return float(math.log(last / first) / (t[-quarter] - t[0]))


def classify_growth(sigma: float) -> Verdict:
    if sigma < -GROWTH_BAND:
        return "stable"
    if sigma > GROWTH_BAND:
        return "unstable"
    return "oscillatory"


def run_coupled_human(
    bundle: ControllerBundle,
    p: PlantParams,
    human: HumanModel,
    cfg: SimConfig,
    perturbation: float | None = None,
    dob: DobSettings | None = None,
    jacobian_table: list[JacobianPoint] | None = None,
) -> SimTrace:
    """
    Impulse response of the exoskeleton coupled to a human model.

    The impulse (N m s) is applied as a constant torque over the first
    control step. Divergence is reported as an unstable verdict.
    """
    impulse = cfg.impulse if perturbation is None else perturbation
    dt = cfg.dt_ctrl
    controller = ShapingController(bundle, dt, cfg.derivative_cutoff_hz)

    def external(k: int, t: float) -> float:
        return impulse / dt if k == 0 else 0.0

    try:
        frame, control = _simulate(
            p,
            cfg,
            Boundary("human", human),
            controller,
            external,
            input_scale=abs(impulse) / dt,
            dob=dob,
            schedule=_scheduler(bundle, jacobian_table),
            on_schedule=controller.retune,
        )
    except InstabilityDetected as exc:
        logger.info("sim.coupled_human_diverged", kind=human.kind, time=exc.time)
        return SimTrace(
            pd.DataFrame(columns=TRACE_COLUMNS),
            "coupled-human",
            metrics={"growth_rate": math.inf, "diverged_at": exc.time},
            verdict="unstable",
        )

    after = frame["t"] > 2.0 * dt
    sigma = growth_rate(frame["tau_c"][after], frame["t"][after])
    verdict = classify_growth(sigma)
    logger.info("sim.coupled_human_complete", kind=human.kind, growth_rate=sigma, verdict=verdict)
    return SimTrace(frame, "coupled-human", control, {"growth_rate": sigma}, verdict)


def estimate_frequency_response(t, u, y, omega: float) -> complex:
    """
    Complex gain y/u at omega from a least-squares fit of
    a sin(wt) + b cos(wt) + c + d t to each signal.
    """
    t = np.asarray(t, dtype=float)
    basis = np.column_stack([np.sin(omega * t), np.cos(omega * t), np.ones_like(t), t])

    def phasor(signal) -> complex:
        coef, *_ = np.linalg.lstsq(basis, np.asarray(signal, dtype=float), rcond=None)
        return complex(coef[1], -coef[0])

    return phasor(y) / phasor(u)


def run_frequency_sweep(
    bundle: ControllerBundle,
    p: PlantParams,
    cfg: SimConfig,
    freqs_hz: list[float] | None = None,
    settle: float = 1.0,
    cycles: int = 3,
) -> pd.DataFrame:
    """
    Free-output sine sweep of tau_c -> theta_j (friction and observer off).

    Returns:
        DataFrame with freq_hz, magnitude, phase_deg
    """
    freqs = cfg.sweep_freqs_hz if freqs_hz is None else freqs_hz
    quiet = cfg.model_copy(update={"friction": FrictionModel(), "noise_std": 0.0, "tau_c_bias": 0.0})
    rows = []
    for f in freqs:
        omega = 2.0 * math.pi * f
        amplitude = cfg.cuff_torque_amplitude
        span = settle + cycles / f
        frame, _ = _simulate(
            p,
            quiet,
            Boundary("free"),
            ShapingController(bundle, cfg.dt_ctrl, cfg.derivative_cutoff_hz),
            lambda k, t, w=omega, a=amplitude: a * math.sin(w * t),
            input_scale=max(amplitude, 1.0),
            duration=span,
        )
        window = frame["t"] >= span - cycles / f
        g = estimate_frequency_response(frame["t"][window], frame["tau_c"][window], frame["theta_j"][window], omega)
        rows.append({"freq_hz": f, "magnitude": abs(g), "phase_deg": math.degrees(np.angle(g))})
    return pd.DataFrame(rows, columns=["freq_hz", "magnitude", "phase_deg"])


def run_free(
    bundle: ControllerBundle,
    p: PlantParams,
    cfg: SimConfig,
    dob: DobSettings | None = None,
    jacobian_table: list[JacobianPoint] | None = None,
) -> SimTrace:
    """Free output driven by a sinusoidal cuff torque at the first sweep frequency."""
    omega = 2.0 * math.pi * cfg.sweep_freqs_hz[0]
    amplitude = cfg.cuff_torque_amplitude
    controller = ShapingController(bundle, cfg.dt_ctrl, cfg.derivative_cutoff_hz)
    frame, control = _simulate(
        p,
        cfg,
        Boundary("free"),
        controller,
        lambda k, t: amplitude * math.sin(omega * t),
        input_scale=max(amplitude, 1.0),
        dob=dob,
        schedule=_scheduler(bundle, jacobian_table),
        on_schedule=controller.retune,
    )
    return SimTrace(frame, "free", control, {})
