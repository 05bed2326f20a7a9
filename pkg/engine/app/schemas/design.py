import math

from pydantic import BaseModel, ConfigDict, Field


class ComplianceShape(BaseModel):
    """
    Coefficients of the biquadratic inner-loop compliance shape

        C4(s) = (s^2 + Btilde2 s + Ktilde2) / (K_s (s^2 + Btilde1 s + Ktilde1))
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    Ktilde1: float = Field(default=0.0, ge=0)
    Btilde1: float = Field(ge=0)
    Ktilde2: float = Field(gt=0)
    Btilde2: float = Field(ge=0)


class SeaGains(BaseModel):
    """Inner SEA feedback gains, deflection form and torque-normalized form."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    K1: float
    B1: float
    K2_theta: float
    B2_theta: float
    K2_tau: float
    B2_tau: float
    warnings: list[str] = Field(default_factory=list)


class DesignSpec(BaseModel):
    """Designer choices for double compliance shaping."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    J_hat: float = Field(default=2.0, gt=0, description="virtual motor inertia, kg m^2")
    B_hat: float = Field(default=20.0, gt=0, description="virtual motor damping, N m s/rad")
    alpha: float = Field(ge=1.0, description="amplification ratio")
    zeta: float = Field(default=1.0, gt=0, description="damping of the C4 zero pair")
    zeta_hat: float = Field(default=0.8, gt=0, description="damping of the C7 zero pair")
    filter_omega: float = Field(default=2 * math.pi * 50, gt=0, description="G_v low-pass cutoff, rad/s")
    filter_zeta: float = Field(default=0.7, gt=0)


class MetaGains(BaseModel):
    """Cuff-torque feedback gains of the meta-SEA. K1_hat and B1_hat are fixed at zero."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    K2_hat: float
    B2_hat: float
    K1_hat: float = 0.0
    B1_hat: float = 0.0
    warnings: list[str] = Field(default_factory=list)
