from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .design import DesignSpec
from .dob import DobSettings
from .plant import PlantParams
from .sim import HumanModel, SimConfig


class JacobianPoint(BaseModel):
    """One row of the piecewise-linear reflection-ratio table."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    angle_rad: float
    scale: float = Field(gt=0)


class ProjectConfig(BaseModel):
    """Top-level project document (JSON)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    plant: PlantParams
    design: DesignSpec
    dob: DobSettings = Field(default_factory=DobSettings)
    sim: SimConfig = Field(default_factory=SimConfig)
    human: Optional[HumanModel] = None
    jacobian_table: Optional[list[JacobianPoint]] = None

    @model_validator(mode="after")
    def validate_jacobian_table(self):
        if self.jacobian_table is not None:
            if not self.jacobian_table:
                raise ValueError("jacobian_table must not be empty when given")
            angles = [row.angle_rad for row in self.jacobian_table]
            if any(b <= a for a, b in zip(angles, angles[1:])):
                raise ValueError("jacobian_table angles must be strictly increasing")
        return self

    @model_validator(mode="after")
    def validate_resolution(self):
        self.sim.check_resolution(self.plant, self.human)
        return self
