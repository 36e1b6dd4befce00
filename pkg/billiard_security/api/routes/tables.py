from fastapi import APIRouter, HTTPException, status

from billiard_security.api.dependencies import http_error
from billiard_security.core.exceptions import BilliardError
from billiard_security.schemas.table import TableDocument, TableResponse, TableSpec, ValidationReportDocument
from billiard_security.services.curve import validate

router = APIRouter()

PRESETS = ("circle", "ellipse")


def _describe(spec: TableSpec) -> TableResponse:
    try:
        table = spec.build()
    except BilliardError as e:
        raise http_error(e)
    return TableResponse(
        table=TableDocument.from_table(table),
        report=ValidationReportDocument.from_report(validate(table))
    )


@router.post("/validate", response_model=TableResponse)
def validate_table(spec: TableSpec):
    """Build a table and report its convexity invariants"""
    return _describe(spec)


@router.get("/presets/{name}", response_model=TableResponse)
def get_preset(name: str, radius: float = 1.0, a: float = 2.0, b: float = 1.0):
    """Circle or ellipse preset with its validation report"""
    if name not in PRESETS:
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND,
            detail=f"Unknown preset '{name}'"
        )
    if min(radius, a, b) <= 0:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail="Preset dimensions must be positive"
        )
    return _describe(TableSpec(preset=name, radius=radius, a=a, b=b))
