import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class QFilter(BaseModel):
    """Second-order low-pass Q(s) = wq^2 / (s^2 + 2 zq wq s + wq^2)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    omega_q: float = Field(default=2 * math.pi * 20, gt=0, description="cutoff, rad/s")
    zeta_q: float = Field(default=0.7, gt=0)


class DobSettings(QFilter):
    """Q filter plus the runtime options of the transmission observer."""

    enabled: bool = True
    # None resolves to twice the actuator torque limit
    saturation: Optional[float] = Field(default=None, gt=0, description="estimate bound, N m")
    # Feed the observer the torque actually applied (True) or the newest command (False)
    delay_aware: bool = True

    def q_filter(self) -> QFilter:
        return QFilter(omega_q=self.omega_q, zeta_q=self.zeta_q)
