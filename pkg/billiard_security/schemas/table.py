"""
Pydantic documents for tables and their validation reports
"""
import math
from typing import Any, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from billiard_security.services.curve import NormalBump, Table, ValidationReport, circle, ellipse, noisy


def plain(value: Any) -> Any:
    """Convert numpy values and non-finite floats into JSON-safe Python values"""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class BumpDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    center_s: float
    half_width: float
    value_coeff: float = 0.0
    slope_coeff: float = 0.0
    curvature_coeff: float = 0.0


class TableDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fourier_x: List[float]
    fourier_y: List[float]
    bumps: List[BumpDocument] = []
    grid: Optional[int] = None

    @classmethod
    def from_table(cls, table: Table) -> "TableDocument":
        return cls(
            fourier_x=[float(c) for c in table.base_x],
            fourier_y=[float(c) for c in table.base_y],
            bumps=[BumpDocument(**vars(b)) for b in table.bumps],
            grid=table.grid,
        )

    def to_table(self) -> Table:
        bumps = tuple(NormalBump(**b.model_dump()) for b in self.bumps)
        kwargs = {"grid": self.grid} if self.grid else {}
        return Table(np.array(self.fourier_x), np.array(self.fourier_y), bumps, **kwargs)


class TableSpec(BaseModel):
    """Preset or explicit table, optionally with seeded Fourier noise"""
    model_config = ConfigDict(extra="forbid")

    preset: Optional[Literal["circle", "ellipse"]] = None
    radius: float = Field(1.0, gt=0)
    a: float = Field(2.0, gt=0)
    b: float = Field(1.0, gt=0)
    noise: float = Field(0.0, ge=0)
    seed: int = 0
    table: Optional[TableDocument] = None

    def build(self, rng: Optional[np.random.Generator] = None) -> Table:
        if self.table is not None:
            table = self.table.to_table()
        elif self.preset == "ellipse":
            table = ellipse(self.a, self.b)
        else:
            table = circle(self.radius)
        if self.noise > 0.0:
            table = noisy(table, self.noise, rng if rng is not None else np.random.default_rng(self.seed))
        return table


class ValidationFailureDocument(BaseModel):
    invariant: str
    s: float
    value: Optional[float]


class ValidationReportDocument(BaseModel):
    valid: bool
    min_curvature: Optional[float]
    min_curvature_s: float
    min_speed: float
    min_speed_s: float
    turning_number: int
    signed_area: float
    failures: List[ValidationFailureDocument] = []

    @classmethod
    def from_report(cls, report: ValidationReport) -> "ValidationReportDocument":
        return cls(
            valid=report.valid,
            min_curvature=plain(report.min_curvature),
            min_curvature_s=report.min_curvature_s,
            min_speed=report.min_speed,
            min_speed_s=report.min_speed_s,
            turning_number=report.turning_number,
            signed_area=report.signed_area,
            failures=[ValidationFailureDocument(invariant=f.invariant, s=f.s, value=plain(f.value))
                      for f in report.failures],
        )


class TableResponse(BaseModel):
    table: TableDocument
    report: ValidationReportDocument
