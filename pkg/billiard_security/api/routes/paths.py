from fastapi import APIRouter

from billiard_security.api.dependencies import http_error
from billiard_security.core.exceptions import BilliardError
from billiard_security.schemas.path import (
    ConjugacyReport, ConjugacyRequest, SolveRequest, SolveResponse, TraceRequest, TraceResponse
)
from billiard_security.services.queries import conjugacy_report, solve_paths, trace_ray

router = APIRouter()


@router.post("/trace", response_model=TraceResponse)
def trace_path(request: TraceRequest):
    """Follow a ray through a number of reflections"""
    try:
        return trace_ray(request.table.build(), request.point, request.angle, request.bounces)
    except BilliardError as e:
        raise http_error(e)


@router.post("/solve", response_model=SolveResponse)
def solve(request: SolveRequest):
    """Billiard paths from x to y with m bounces"""
    try:
        return solve_paths(request.table.build(), request.x, request.y, request.m, request.method,
                           request.theta0, request.starts, request.seed)
    except BilliardError as e:
        raise http_error(e)


@router.post("/conjugacy", response_model=ConjugacyReport)
def conjugacy(request: ConjugacyRequest):
    """Whether x and y are conjugate along a path"""
    try:
        return conjugacy_report(request.table.build(), request.x, request.y, request.vertices,
                                request.bounces, request.chain, request.seed)
    except BilliardError as e:
        raise http_error(e)
