from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Dict, Optional

# Multipliers applied to (GP_TOLERANCE, CERTIFICATE_RESIDUAL)
TOLERANCE_PROFILES: Dict[str, tuple] = {
    "default": (1.0, 1.0),
    "strict": (0.1, 0.01),
    "loose": (10.0, 100.0),
}

class Settings(BaseSettings):
    # Curve
    VALIDATION_GRID: int = Field(2048, gt=16)
    PROJECTION_MAX_ITER: int = 60
    ARCLENGTH_OVERSAMPLING: int = 8

    # Ray
    GRAZING_TOLERANCE: float = Field(1e-7, gt=0)
    HIT_MIN_T: float = Field(1e-9, gt=0)

    # Beams
    DEGENERACY_TOLERANCE: float = Field(1e-9, gt=0)
    CONJUGACY_TOLERANCE: float = Field(1e-6, gt=0)
    SINGULAR_JACOBIAN_TOLERANCE: float = Field(1e-9, gt=0)

    # Paths
    CERTIFICATE_RESIDUAL: float = Field(1e-8, gt=0)
    PATH_IDENTITY_TOLERANCE: float = Field(1e-6, gt=0)
    SHOOTING_TOLERANCE: float = Field(1e-10, gt=0)
    SHOOTING_MAX_ITER: int = 50
    NEWTON_DAMPING: float = Field(0.2, gt=0)
    DEFAULT_STARTS: int = 16
    SOLVER_WORKERS: int = 1

    # Security
    GP_TOLERANCE: float = Field(1e-4, gt=0)
    MAX_SEARCH_BOUNCES: int = 4
    MAX_PIGEONHOLE_BOUNCES: int = 40

    # Perturbations
    MAX_SUPPORT_RADIUS: float = Field(0.05, gt=0)
    CONJUGACY_SCAN_STEPS: int = 10
    CONJUGACY_SCAN_STEP: float = 1e-3

    # Witness pipeline
    WITNESS_EPS_BUDGET: float = Field(2.0, gt=0)
    WITNESS_MAX_REPAIRS: int = 8

    # Application
    TOLERANCE_PROFILE: str = "default"
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None
    DEBUG: bool = False

    @property
    def gp_tolerance(self) -> float:
        """General-position tolerance after the active profile is applied"""
        return self.GP_TOLERANCE * self._profile()[0]

    @property
    def certificate_residual(self) -> float:
        """Certification residual after the active profile is applied"""
        return self.CERTIFICATE_RESIDUAL * self._profile()[1]

    def _profile(self) -> tuple:
        try:
            return TOLERANCE_PROFILES[self.TOLERANCE_PROFILE]
        except KeyError:
            raise ValueError(f"Unknown tolerance profile: {self.TOLERANCE_PROFILE}")

    model_config = SettingsConfigDict(env_file=".env", env_prefix="BILLIARD_", extra="ignore")

settings = Settings()
