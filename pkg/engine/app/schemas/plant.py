from pydantic import BaseModel, ConfigDict, Field


class PlantParams(BaseModel):
    """Single-joint SEA exoskeleton with an elastic cuff (reflected quantities)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    J_m: float = Field(gt=0, description="reflected motor inertia, kg m^2")
    B_m: float = Field(gt=0, description="reflected motor damping, N m s/rad")
    K_s: float = Field(gt=0, description="SEA spring stiffness, N m/rad")
    J_j: float = Field(gt=0, description="joint inertia, kg m^2")
    K_c: float = Field(gt=0, description="cuff spring stiffness, N m/rad")
    T: float = Field(default=0.002, ge=0, description="control delay, s")

    def scaled(self, jacobian_scale: float) -> "PlantParams":
        """Reflect the motor-side quantities through a transmission ratio j (scaled by j^2)."""
        if jacobian_scale <= 0:
            raise ValueError("jacobian scale must be positive")
        j2 = jacobian_scale * jacobian_scale
        return self.model_copy(
            update={"J_m": self.J_m * j2, "B_m": self.B_m * j2, "K_s": self.K_s * j2}
        )
