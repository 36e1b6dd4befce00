"""
Pydantic documents for witness bundles and their verification
"""
from typing import TYPE_CHECKING, Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from billiard_security.schemas.path import PathRecord, Point
from billiard_security.schemas.table import TableDocument, TableSpec, plain
from billiard_security.services.security import GeneralPositionReport

if TYPE_CHECKING:
    from billiard_security.services.perturb import PerturbationRecord
    from billiard_security.services.witness import WitnessBundle

BUNDLE_VERSION = "1"


class ViolationDocument(BaseModel):
    condition: str
    paths: List[int]
    points: List[Point]
    separation: float
    detail: Dict[str, Any] = {}


class GeneralPositionDocument(BaseModel):
    gp1: bool
    gp2: bool
    gp3: bool
    gp4: bool
    nc: bool
    tol: float
    min_separation: Optional[float] = None
    violations: List[ViolationDocument] = []

    @classmethod
    def from_report(cls, report: GeneralPositionReport) -> "GeneralPositionDocument":
        return cls(
            gp1=report.gp1, gp2=report.gp2, gp3=report.gp3, gp4=report.gp4, nc=report.nc,
            tol=report.tol, min_separation=plain(report.min_separation),
            violations=[ViolationDocument(condition=v.condition, paths=list(v.paths), points=plain(v.points),
                                          separation=v.separation, detail=plain(v.detail))
                        for v in report.violations],
        )


class PerturbationRecordDocument(BaseModel):
    kind: str
    parameters: Dict[str, Any] = {}
    support: List[List[float]] = []
    d2_effect: float = 0.0

    @classmethod
    def from_record(cls, record: "PerturbationRecord") -> "PerturbationRecordDocument":
        return cls(kind=record.kind, parameters=plain(record.parameters), support=plain(record.support),
                   d2_effect=record.d2_effect)


class WitnessBundleDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: str = BUNDLE_VERSION
    n: int
    eps_budget: float
    x: Point
    y: Point
    original: TableDocument
    table: TableDocument
    paths: List[PathRecord]
    report: Optional[GeneralPositionDocument] = None
    perturbation_log: List[PerturbationRecordDocument] = []
    d2_drift: float
    complete: bool = False
    stage: Optional[str] = None
    error: Optional[str] = None
    diagnostics: List[Dict[str, Any]] = []

    @classmethod
    def from_bundle(cls, bundle: "WitnessBundle", stage: Optional[str] = None,
                    error: Optional[str] = None) -> "WitnessBundleDocument":
        return cls(
            n=bundle.n,
            eps_budget=bundle.eps_budget,
            x=plain(bundle.x),
            y=plain(bundle.y),
            original=TableDocument.from_table(bundle.original),
            table=TableDocument.from_table(bundle.table),
            paths=[PathRecord.from_path(bundle.table, p) for p in bundle.paths],
            report=GeneralPositionDocument.from_report(bundle.report) if bundle.report else None,
            perturbation_log=[PerturbationRecordDocument.from_record(r) for r in bundle.perturbation_log],
            d2_drift=bundle.d2_drift,
            complete=bundle.complete,
            stage=stage,
            error=error,
            diagnostics=plain(bundle.diagnostics),
        )


class WitnessRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    table: TableSpec = TableSpec()
    x: Point
    y: Point
    n: int = Field(2, ge=1)
    eps_budget: Optional[float] = Field(None, gt=0)
    seed: int = 0
    tol: Optional[float] = Field(None, gt=0)


class PathCheckDocument(BaseModel):
    index: int
    residual: float
    certified: bool
    endpoints_ok: bool
    points_ok: bool
    min_alpha: float


class VerificationReport(BaseModel):
    passed: bool
    paths: List[PathCheckDocument]
    general_position: Optional[GeneralPositionDocument]
    path_count_ok: bool
    table_valid: bool
    d2_drift: float
    eps_budget: float
    drift_ok: bool
    messages: List[str] = []
