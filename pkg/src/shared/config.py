# src/shared/config.py
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    tol: float = Field(default=1e-8, gt=0, description="Identity residual tolerance (POLAR_TOL)")
    log_level: str = Field(default="WARNING", description="Root log level (POLAR_LOG_LEVEL)")

    model_config = SettingsConfigDict(
        env_prefix="POLAR_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


class Tolerances(BaseModel):
    """Every numeric knob the math modules consume.

    Relative tolerances (rank, hermitian) are scaled by ``1 + ||h||`` of the
    object under test.
    """

    identity_tol: float = Field(default=1e-8, gt=0)
    rank_tol: float = Field(default=1e-10, gt=0)
    hermitian_tol: float = Field(default=1e-10, gt=0)
    eig_tol: float = Field(default=1e-10, gt=0)
    jacobi_tol: float = Field(default=1e-12, gt=0)
    jacobi_max_sweeps: int = Field(default=60, ge=1)
    defect_margin: float = Field(default=1e-9, gt=0)
    contraction_slack: float = Field(default=1e-12, ge=0)
    inverse_norm_threshold: float = Field(default=10.0, gt=0)
    singular_value_threshold: float = Field(default=0.1, gt=0)
    max_polynomial_degree: int = Field(default=16, ge=0)
    workers: int = Field(default=4, ge=1)

    model_config = ConfigDict(frozen=True)


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings() -> None:
    global _settings
    _settings = None


def get_tolerances() -> Tolerances:
    return Tolerances(identity_tol=get_settings().tol)


def resolve(tolerances: Optional[Tolerances]) -> Tolerances:
    return tolerances if tolerances is not None else get_tolerances()
