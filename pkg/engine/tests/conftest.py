"""
Shared fixtures: the demo plant and design used throughout the suite.
"""
import pytest

from app.schemas.config import ProjectConfig
from app.schemas.design import DesignSpec
from app.schemas.dob import QFilter
from app.schemas.plant import PlantParams
from app.schemas.sim import SimConfig
from app.services.pipeline import LoadedConfig, validate_config
from app.services.shaping import double_compliance_design


DEMO_CONFIG = {
    "plant": {"J_m": 1.0, "B_m": 6.0, "K_s": 500.0, "J_j": 0.15, "K_c": 300.0, "T": 0.002},
    "design": {"J_hat": 2.0, "B_hat": 20.0, "alpha": 8.0, "zeta": 1.0, "zeta_hat": 0.8},
}


@pytest.fixture
def demo_plant() -> PlantParams:
    return PlantParams(**DEMO_CONFIG["plant"])


@pytest.fixture
def demo_spec() -> DesignSpec:
    return DesignSpec(**DEMO_CONFIG["design"])


@pytest.fixture
def demo_bundle(demo_spec, demo_plant):
    return double_compliance_design(demo_spec, demo_plant)


@pytest.fixture
def demo_q() -> QFilter:
    return QFilter()


@pytest.fixture
def fast_sim() -> SimConfig:
    """Coarser integration for the longer runs."""
    return SimConfig(substeps=4, duration=4.0)


@pytest.fixture
def demo_raw() -> dict:
    return {section: dict(values) for section, values in DEMO_CONFIG.items()}


@pytest.fixture
def demo_loaded(demo_raw) -> LoadedConfig:
    return validate_config(demo_raw)


@pytest.fixture
def demo_config(demo_loaded) -> ProjectConfig:
    return demo_loaded.config
