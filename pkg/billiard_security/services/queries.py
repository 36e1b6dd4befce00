"""Request-level orchestration shared by the CLI and the HTTP routes"""
import logging
import math
from typing import Optional, Sequence

from billiard_security.core.exceptions import DomainError, NoPathError
from billiard_security.schemas.path import (
    CertificateDocument, ConjugacyReport, PathRecord, SolveResponse, TraceResponse, chain_document
)
from billiard_security.services.beams import conjugacy_test, focus_chain
from billiard_security.services.curve import Table
from billiard_security.services.paths import (
    certify, enumerate_paths, initial_angle, max_length_path, rng_from, segment, solve_shooting
)
from billiard_security.services.ray import PolygonalPath, RayState, direction, require_certified, trace

logger = logging.getLogger(__name__)


def trace_ray(table: Table, point: Sequence[float], angle: float, bounces: int) -> TraceResponse:
    return TraceResponse.from_trace(trace(table, RayState(point, direction(angle)), bounces))


def _respond(table: Table, paths: Sequence[PolygonalPath], **extra) -> SolveResponse:
    return SolveResponse(
        paths=[PathRecord.from_path(table, p) for p in paths],
        certificates=[CertificateDocument.from_certificate(certify(table, p)) for p in paths],
        **extra,
    )


def solve_paths(table: Table, x: Sequence[float], y: Sequence[float], m: int, method: str = "variational",
                theta0: Optional[float] = None, starts: Optional[int] = None, seed=0) -> SolveResponse:
    """Solve for m-bounce paths with the variational, shooting or enumeration strategy"""
    rng = rng_from(seed)
    if method == "enumerate":
        found = enumerate_paths(table, x, y, m, starts, rng)
        return _respond(table, [p for p, _ in found])
    if m == 0:
        return _respond(table, [segment(x, y)])
    if method == "variational":
        return _respond(table, max_length_path(table, x, y, m, starts, rng))
    if method != "shooting":
        raise DomainError(f"Unknown solve method: {method}")

    if theta0 is None:
        seeds = max_length_path(table, x, y, m, starts, rng)
        if not seeds:
            raise NoPathError(f"No {m}-bounce path to warm-start shooting")
        theta0 = initial_angle(seeds[0])
    result = solve_shooting(table, x, y, m, theta0)
    return _respond(table, [result.path], iterations=result.iterations, jacobian_det=result.jacobian_det)


def select_path(table: Table, x: Sequence[float], y: Sequence[float], vertices: Optional[Sequence[float]] = None,
                bounces: Optional[int] = None, seed=0) -> PolygonalPath:
    """Explicit vertex tuple, or the longest certified path with the given bounce count"""
    if vertices is not None:
        path = PolygonalPath.on_table(table, x, y, vertices)
        require_certified(table, path)
        return path
    bounces = 1 if bounces is None else bounces
    if bounces == 0:
        return segment(x, y)
    candidates = max_length_path(table, x, y, bounces, seed=rng_from(seed))
    if not candidates:
        raise NoPathError(f"No certified {bounces}-bounce path from {list(x)} to {list(y)}")
    return candidates[0]


def conjugacy_report(table: Table, x: Sequence[float], y: Sequence[float],
                     vertices: Optional[Sequence[float]] = None, bounces: Optional[int] = None,
                     chain: bool = False, seed=0) -> ConjugacyReport:
    path = select_path(table, x, y, vertices, bounces, seed)
    result = conjugacy_test(table, path)
    logger.info(f"Conjugacy along {path.m}-bounce path: margin {result.margin:.3e}")
    return ConjugacyReport(
        is_conjugate=result.is_conjugate,
        margin=result.margin if math.isfinite(result.margin) else None,
        focus=[result.focus.a, result.focus.b],
        path=PathRecord.from_path(table, path),
        chain=chain_document(focus_chain(table, path)) if chain else None,
    )
