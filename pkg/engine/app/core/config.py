from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings loaded from environment variables."""

    model_config = SettingsConfigDict(env_file=".env", env_prefix="EXOSHAPE_", case_sensitive=False)

    # App
    app_env: str = Field(default="development")
    log_level: str = Field(default="INFO")
    output_dir: str = Field(default="out")

    # Realized-chain delay approximation
    pade_order: int = Field(default=4, ge=1, le=8)

    # Frequency grids
    nyquist_omega_min: float = Field(default=1e-3, gt=0)
    nyquist_omega_max: float = Field(default=1e5, gt=0)
    nyquist_points_per_decade: int = Field(default=200, ge=20)
    passivity_points_per_decade: int = Field(default=100, ge=10)


# Singleton instance
settings = Settings()
