"""Single-ray billiard dynamics on a Table"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from billiard_security.core.config import settings
from billiard_security.core.exceptions import (
    CertificationError, DegenerateConfigurationError, GeometryError, GrazingError
)
from billiard_security.services.curve import Table, cross, evaluate, frame, parameter_distance

logger = logging.getLogger(__name__)


def unit(v: Sequence[float]) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def direction(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


def angle_from_tangent(v: np.ndarray, tangent: np.ndarray, normal: np.ndarray) -> float:
    """Signed angle from the tangent to v in the (T, N) frame"""
    return math.atan2(float(np.dot(v, normal)), float(np.dot(v, tangent)))


@dataclass(frozen=True, eq=False)
class RayState:
    p: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "v", unit(self.v))


@dataclass(frozen=True, eq=False)
class BouncePoint:
    """Impact with the boundary; alpha is measured from T(s) to the incoming ray"""
    s: float
    t: float
    alpha: float
    point: np.ndarray


@dataclass(frozen=True, eq=False)
class PolygonalPath:
    """Polygonal path x -> sigma(s_1) -> ... -> sigma(s_m) -> y"""
    x: np.ndarray
    y: np.ndarray
    vertices: Tuple[float, ...]
    points: np.ndarray

    @classmethod
    def on_table(cls, table: Table, x: Sequence[float], y: Sequence[float], vertices: Sequence[float]) -> "PolygonalPath":
        params = tuple(float(s) % 1.0 for s in vertices)
        points = evaluate(table, np.array(params), 0)[0] if params else np.zeros((0, 2))
        return cls(np.asarray(x, dtype=float), np.asarray(y, dtype=float), params, points)

    @property
    def m(self) -> int:
        return len(self.vertices)

    @cached_property
    def nodes(self) -> np.ndarray:
        """x, the vertex points and y, shape (m+2, 2)"""
        return np.vstack([self.x, self.points.reshape(-1, 2), self.y])

    @cached_property
    def segments(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        nodes = self.nodes
        return [(nodes[i], nodes[i + 1]) for i in range(len(nodes) - 1)]

    @cached_property
    def rho(self) -> np.ndarray:
        """Consecutive distances rho_0 .. rho_m"""
        return np.linalg.norm(np.diff(self.nodes, axis=0), axis=1)

    @property
    def length(self) -> float:
        return float(np.sum(self.rho))


@dataclass(frozen=True, eq=False)
class Trace:
    start: RayState
    bounces: Tuple[BouncePoint, ...]
    final: RayState
    length: float


def bracketed_root(fn, a: float, b: float) -> float:
    """Root of fn in [a, b]; falls back to the smaller endpoint when rounding hides the sign change"""
    try:
        return float(brentq(fn, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    except ValueError:
        fa, fb = fn(a), fn(b)
        logger.debug(f"No sign change on [{a:.15g}, {b:.15g}] (fa={fa:.3e}, fb={fb:.3e}); using the nearer endpoint")
        return float(a if abs(fa) <= abs(fb) else b)


def _crossing_roots(table: Table, ray: RayState, params: np.ndarray) -> List[float]:
    """Boundary parameters where sigma(s) meets the ray's line, bracketed on `params`"""
    pts = evaluate(table, params, 0)[0]
    h = cross(ray.v, pts - ray.p)

    def line_offset(s: float) -> float:
        return float(cross(ray.v, evaluate(table, s, 0)[0] - ray.p))

    roots = []
    for i in np.nonzero(h[:-1] * h[1:] <= 0.0)[0]:
        if h[i] == 0.0:
            roots.append(float(params[i]))
        elif h[i + 1] != 0.0:
            roots.append(bracketed_root(line_offset, params[i], params[i + 1]))
    return roots


def first_hit(table: Table, ray: RayState, bounce_index: Optional[int] = None) -> BouncePoint:
    """Exit intersection of the ray with the boundary"""
    t_min = settings.HIT_MIN_T
    params = np.append(table.samples, 1.0)
    roots = _crossing_roots(table, ray, params)

    def best(candidates: List[float]) -> Optional[Tuple[float, float]]:
        hits = []
        for s in candidates:
            t = float(np.dot(evaluate(table, s, 0)[0] - ray.p, ray.v))
            if t > t_min:
                hits.append((t, s))
        return max(hits) if hits else None

    hit = best(roots)
    if hit is None:
        # the chord may be shorter than one grid cell: refine around the start point
        step = 1.0 / table.grid
        nearest = table.samples[int(np.argmin(np.sum((table.sample_points - ray.p) ** 2, axis=1)))]
        local = nearest + np.linspace(-2.0 * step, 2.0 * step, 257)
        hit = best(_crossing_roots(table, ray, local))
    if hit is None:
        logger.error(f"Ray from {ray.p.tolist()} along {ray.v.tolist()} never meets the boundary")
        raise GeometryError(f"Ray from {ray.p.tolist()} has no boundary crossing")

    t, s = hit
    f = frame(table, s)
    incidence = float(np.dot(ray.v, f.normal))
    if abs(incidence) < settings.GRAZING_TOLERANCE:
        logger.error(f"Grazing hit at s={s:.9f} (|<v,N>|={abs(incidence):.3e})")
        raise GrazingError(f"Grazing incidence at s={s:.9f}", bounce_index=bounce_index)
    alpha = math.atan2(-incidence, float(np.dot(ray.v, f.tangent)))
    return BouncePoint(s=float(s % 1.0), t=t, alpha=alpha, point=f.point)


def reflect(v: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Specular reflection v - 2 <N, v> N"""
    v = np.asarray(v, dtype=float)
    n = np.asarray(n, dtype=float)
    return v - 2.0 * np.dot(n, v) * n


def boundary_ray(table: Table, s: float, alpha: float) -> RayState:
    """Inward ray leaving sigma(s) at angle alpha from T(s)"""
    f = frame(table, s)
    v = math.cos(alpha) * f.tangent + math.sin(alpha) * f.normal
    return RayState(f.point, v)


def billiard_map(table: Table, s: float, alpha: float) -> Tuple[float, float]:
    """Birkhoff section map (s, alpha) -> (s', alpha')"""
    if not 0.0 < alpha < math.pi:
        raise GeometryError(f"Outgoing angle must lie in (0, pi), got {alpha}")
    hit = first_hit(table, boundary_ray(table, s, alpha))
    return hit.s, hit.alpha


def trace(table: Table, ray: RayState, bounces: int) -> Trace:
    """Follow the ray through `bounces` reflections"""
    if bounces < 0:
        raise GeometryError(f"Bounce count must be non-negative, got {bounces}")
    current = ray
    hits: List[BouncePoint] = []
    length = 0.0
    for index in range(bounces):
        hit = first_hit(table, current, bounce_index=index)
        normal = frame(table, hit.s).normal
        current = RayState(hit.point, reflect(current.v, normal))
        length += hit.t
        hits.append(hit)
    return Trace(start=ray, bounces=tuple(hits), final=current, length=length)


def reverse(table: Table, fragment: Trace) -> RayState:
    """Time-reversed ray: starts where the final ray next meets the boundary and heads back.

    Tracing it through len(fragment.bounces) reflections visits the same
    bounce parameters in reverse order.
    """
    landing = first_hit(table, fragment.final)
    return RayState(landing.point, -fragment.final.v)


def same_vertices(a: Sequence[float], b: Sequence[float], tol: float) -> bool:
    if len(a) != len(b):
        return False
    return bool(np.all(parameter_distance(np.array(a), np.array(b)) < tol)) if a else True


@dataclass(frozen=True)
class PathCertificate:
    residual: float
    min_alpha: float
    length: float
    alphas: Tuple[float, ...] = ()
    certified: bool = False


def certify(table: Table, path: PolygonalPath, tol: Optional[float] = None) -> PathCertificate:
    """Reflection residual of a polygonal path, recomputed from the table"""
    tol = settings.certificate_residual if tol is None else tol
    if path.m == 0:
        length = float(np.linalg.norm(path.y - path.x))
        return PathCertificate(residual=0.0, min_alpha=math.pi / 2, length=length,
                               certified=length > 0.0)

    points = evaluate(table, np.array(path.vertices), 0)[0]
    nodes = np.vstack([path.x, points, path.y])
    steps = np.diff(nodes, axis=0)
    rho = np.linalg.norm(steps, axis=1)
    if np.any(rho < 1e-12):
        raise DegenerateConfigurationError(f"Path has coincident consecutive points (min gap {rho.min():.3e})")
    directions = steps / rho[:, None]

    f = frame(table, np.array(path.vertices))
    residual = 0.0
    alphas = []
    for i in range(path.m):
        incoming, outgoing = directions[i], directions[i + 1]
        tangent, normal = f.tangent[i], f.normal[i]
        mirrored = reflect(incoming, normal)
        residual = max(residual, abs(math.atan2(float(cross(mirrored, outgoing)),
                                                float(np.dot(mirrored, outgoing)))))
        alphas.append(math.atan2(-float(np.dot(incoming, normal)), float(np.dot(incoming, tangent))))

    min_alpha = min(min(a, math.pi - a) for a in alphas)
    return PathCertificate(
        residual=residual,
        min_alpha=min_alpha,
        length=float(np.sum(rho)),
        alphas=tuple(alphas),
        certified=residual < tol and min_alpha > settings.GRAZING_TOLERANCE,
    )


def require_certified(table: Table, path: PolygonalPath, tol: Optional[float] = None) -> PathCertificate:
    certificate = certify(table, path, tol)
    if not certificate.certified:
        logger.error(f"Path with {path.m} vertices fails certification (residual {certificate.residual:.3e})")
        raise CertificationError(f"Path is not a billiard path (residual {certificate.residual:.3e})",
                                 residual=certificate.residual)
    return certificate
