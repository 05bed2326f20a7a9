from typing import Optional

from pydantic import BaseModel, Field

from .analysis import StabilityReport
from .design import MetaGains, SeaGains


class TfCoefficients(BaseModel):
    """Continuous transfer function, coefficients in ascending powers of s."""

    num: list[float]
    den: list[float]
    delay: float = 0.0


class DiscreteCoefficients(BaseModel):
    """Discrete transfer function, coefficients in ascending powers of z^-1."""

    num_z: list[float]
    den_z: list[float]
    sample_period: float
    delay_steps: int = 0


class GainsFile(BaseModel):
    """Everything a runtime controller needs, as written by `design`."""

    sea: SeaGains
    meta: MetaGains
    gv_nominal: TfCoefficients
    gv_causal: TfCoefficients
    q_filter: TfCoefficients
    dt_ctrl: float
    discrete: dict[str, DiscreteCoefficients] = Field(default_factory=dict)


class RunSummary(BaseModel):
    """Reproducible record of one command invocation."""

    tool_version: str
    command: str
    config_digest: str
    applied_defaults: list[str] = Field(default_factory=list)
    warnings: list[str] = Field(default_factory=list)
    gains: Optional[GainsFile] = None
    metrics: dict[str, Optional[float]] = Field(default_factory=dict)
    stability: dict[str, StabilityReport] = Field(default_factory=dict)
    notes: list[str] = Field(default_factory=list)
