from fastapi import HTTPException, status

from billiard_security.core.config import Settings, settings
from billiard_security.core.exceptions import (
    BilliardError, BudgetExceededError, BudgetExhaustedError, SolverError, WitnessSolverError
)


def get_settings() -> Settings:
    """Active settings instance"""
    return settings


def http_error(error: BilliardError, **extra) -> HTTPException:
    """Map a billiard exception onto an HTTP error"""
    if isinstance(error, (BudgetExceededError, BudgetExhaustedError)):
        code = status.HTTP_413_REQUEST_ENTITY_TOO_LARGE
    elif isinstance(error, (SolverError, WitnessSolverError)):
        code = status.HTTP_409_CONFLICT
    else:
        code = status.HTTP_422_UNPROCESSABLE_ENTITY
    return HTTPException(
        status_code=code,
        detail={"error": type(error).__name__, "message": str(error), **extra}
    )
