from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from billiard_security.schemas.table import TableSpec, plain
from billiard_security.services.beams import FocusChain
from billiard_security.services.curve import Table
from billiard_security.services.ray import PathCertificate, PolygonalPath, Trace, certify

Point = List[float]


class PathRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x: Point
    y: Point
    vertices: List[float]
    points: List[Point]
    angles: List[float]
    length: float

    @classmethod
    def from_path(cls, table: Table, path: PolygonalPath) -> "PathRecord":
        return cls(
            x=plain(path.x),
            y=plain(path.y),
            vertices=list(path.vertices),
            points=plain(path.points.reshape(-1, 2)),
            angles=list(certify(table, path).alphas),
            length=path.length,
        )

    def to_path(self, table: Table) -> PolygonalPath:
        return PolygonalPath.on_table(table, self.x, self.y, self.vertices)


class CertificateDocument(BaseModel):
    residual: float
    min_alpha: float
    length: float
    alphas: List[float]
    certified: bool

    @classmethod
    def from_certificate(cls, certificate: PathCertificate) -> "CertificateDocument":
        return cls(residual=certificate.residual, min_alpha=certificate.min_alpha, length=certificate.length,
                   alphas=list(certificate.alphas), certified=certificate.certified)


class BounceDocument(BaseModel):
    s: float
    t: float
    alpha: float
    point: Point


class TraceRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    table: TableSpec = TableSpec()
    point: Point
    angle: float
    bounces: int = Field(1, ge=0)


class TraceResponse(BaseModel):
    bounces: List[BounceDocument]
    final_point: Point
    final_direction: Point
    length: float

    @classmethod
    def from_trace(cls, fragment: Trace) -> "TraceResponse":
        return cls(
            bounces=[BounceDocument(s=b.s, t=b.t, alpha=b.alpha, point=plain(b.point)) for b in fragment.bounces],
            final_point=plain(fragment.final.p),
            final_direction=plain(fragment.final.v),
            length=fragment.length,
        )


class SolveRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    table: TableSpec = TableSpec()
    x: Point
    y: Point
    m: int = Field(1, ge=0)
    method: Literal["variational", "shooting", "enumerate"] = "variational"
    theta0: Optional[float] = None
    starts: Optional[int] = Field(None, gt=0)
    seed: int = 0


class SolveResponse(BaseModel):
    paths: List[PathRecord]
    certificates: List[CertificateDocument]
    iterations: Optional[int] = None
    jacobian_det: Optional[float] = None


class FocusStepDocument(BaseModel):
    s: float
    kappa: float
    alpha: float
    rho: float
    f_before: Optional[float]
    f_after: Optional[float]


def chain_document(chain: FocusChain) -> List[FocusStepDocument]:
    return [FocusStepDocument(**plain(step)) for step in chain.dump()]


class ConjugacyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    table: TableSpec = TableSpec()
    x: Point
    y: Point
    vertices: Optional[List[float]] = None
    bounces: Optional[int] = Field(None, ge=0)
    chain: bool = False
    seed: int = 0


class ConjugacyReport(BaseModel):
    is_conjugate: bool
    margin: Optional[float]
    focus: List[float]
    path: PathRecord
    chain: Optional[List[FocusStepDocument]] = None
