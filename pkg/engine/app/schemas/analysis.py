from typing import Literal, Optional

from pydantic import BaseModel, Field


class PassivityViolation(BaseModel):
    """Frequency interval where a compliance leaves the [-180, 0] degree band."""

    omega_start: float
    omega_end: float
    worst_phase_deg: float


class StabilityReport(BaseModel):
    """Coupled human/exoskeleton stability verdict with margins."""

    verdict: Literal["stable", "marginal", "unstable"]
    rhp_zeros: int = 0
    crossover_freqs: list[float] = Field(default_factory=list)
    # None means no crossover (infinite margin)
    phase_margin_deg: Optional[float] = None
    gain_margin_db: Optional[float] = None
    margins_negative: bool = False
    passivity_violations: list[PassivityViolation] = Field(default_factory=list)
    warnings: list[str] = Field(default_factory=list)
