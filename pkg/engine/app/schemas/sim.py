import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .plant import PlantParams


# Integration steps per period of the fastest plant mode
MODE_RESOLUTION = 20.0


class FrictionModel(BaseModel):
    """Smoothed Coulomb friction: delta_f = -F_c tanh(omega_m / v_eps)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    F_c: float = Field(default=0.0, ge=0, description="Coulomb level, N m")
    v_eps: float = Field(default=0.01, gt=0, description="smoothing width, rad/s")


class HumanModel(BaseModel):
    """Operator terminating the cuff port. Only the fields of `kind` are consulted."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["none", "spring", "inertia", "spring-damper", "prescribed-motion"] = "spring"
    K_h: float = Field(default=0.0, ge=0, description="N m/rad")
    B_h: float = Field(default=0.0, ge=0, description="N m s/rad")
    J_h: float = Field(default=0.0, ge=0, description="kg m^2")
    motion: Optional[list[tuple[float, float]]] = Field(
        default=None, description="(t, theta_h) samples for prescribed-motion"
    )

    @model_validator(mode="after")
    def validate_kind(self):
        if self.kind == "inertia" and self.J_h <= 0:
            raise ValueError("inertia human requires J_h > 0")
        if self.kind == "prescribed-motion":
            if not self.motion or len(self.motion) < 2:
                raise ValueError("prescribed-motion human requires at least two motion samples")
            times = [t for t, _ in self.motion]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("motion sample times must be strictly increasing")
        return self


def fastest_plant_mode(p: PlantParams, human: Optional[HumanModel] = None) -> float:
    """Largest natural frequency or real pole magnitude (rad/s) of the plant and its termination."""
    modes = [math.sqrt(p.K_s / p.J_m), math.sqrt((p.K_s + p.K_c) / p.J_j), p.B_m / p.J_m]
    if human is not None:
        if human.kind == "inertia":
            modes.append(math.sqrt((p.K_s + p.K_c) / p.J_j + p.K_c / human.J_h))
        elif human.kind == "spring-damper" and human.B_h > 0.0:
            modes.append((p.K_c + human.K_h) / human.B_h)
    return max(modes)


Scenario = Literal["locked-output", "dob-hysteresis", "coupled-human", "free"]


class SimConfig(BaseModel):
    """Time-domain run configuration."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    scenario: Scenario = "locked-output"
    dt_ctrl: float = Field(default=0.001, gt=0, description="controller period, s")
    substeps: int = Field(default=10, ge=1)
    duration: float = Field(default=8.0, ge=0, description="s")
    # None resolves to round(T / dt_ctrl)
    delay_steps: Optional[int] = Field(default=None, ge=0)
    derivative_cutoff_hz: float = Field(default=200.0, gt=0)
    friction: FrictionModel = Field(default_factory=FrictionModel)

    # actuator
    torque_limit: float = Field(default=300.0, gt=0, description="N m")
    max_torque_rate: Optional[float] = Field(default=None, gt=0, description="N m/s")

    # sensing
    noise_std: float = Field(default=0.0, ge=0, description="torque sensor noise, N m")
    tau_c_bias: float = Field(default=0.0, description="constant cuff sensor bias, N m")
    seed: int = 0

    # locked-output / free: triangular (locked) or sinusoidal (free) cuff torque
    cuff_torque_amplitude: float = Field(default=5.0, ge=0, description="N m")
    cuff_torque_period: float = Field(default=4.0, gt=0, description="s")
    sweep_freqs_hz: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 5.0, 10.0])

    # dob-hysteresis
    position_amplitude: float = Field(default=0.5, gt=0, description="rad")
    position_freq: float = Field(default=0.05, gt=0, description="Hz")
    kp: float = Field(default=2000.0, ge=0)
    kd: float = Field(default=60.0, ge=0)

    # coupled-human
    impulse: float = Field(default=0.5, description="cuff impulse, N m s")

    @model_validator(mode="after")
    def validate_sweep(self):
        if any(f <= 0 for f in self.sweep_freqs_hz):
            raise ValueError("sweep frequencies must be positive")
        return self

    def resolved_delay_steps(self, delay: float) -> int:
        if self.delay_steps is not None:
            return self.delay_steps
        return int(round(delay / self.dt_ctrl))

    def check_resolution(self, p: PlantParams, human: Optional[HumanModel] = None) -> None:
        """Reject a physics step that samples the fastest plant mode too coarsely."""
        omega = fastest_plant_mode(p, human)
        h = self.dt_ctrl / self.substeps
        if omega * h * MODE_RESOLUTION > 2.0 * math.pi:
            needed = math.ceil(omega * self.dt_ctrl * MODE_RESOLUTION / (2.0 * math.pi))
            raise ValueError(
                f"integration step {h:.3g} s resolves the fastest plant mode ({omega:.4g} rad/s) "
                f"fewer than {MODE_RESOLUTION:g} times per period; use substeps >= {needed}"
            )
