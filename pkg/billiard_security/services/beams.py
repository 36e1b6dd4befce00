"""Line families, envelopes and the mirror-equation focusing recursion.

Focusing distances are kept as homogeneous pairs (a : b) on the projective
line. One reflection followed by a translation to the next vertex is the
Moebius map

    f -> 1 / (1/f + c) - rho,   c = 2 kappa z / sin(alpha)

whose matrix [[1 - rho c, -rho], [c, 1]] acts on (a, b); a chain over m
bounces is a single matrix product and f = infinity needs no special case.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from billiard_security.core.config import settings
from billiard_security.core.exceptions import (
    BilliardError, DomainError, GeometryError, GrazingError, InvalidPathError
)
from billiard_security.services.curve import Table, cross, frame, rotate_left
from billiard_security.services.ray import (
    BouncePoint, PolygonalPath, RayState, certify, direction, first_hit, reflect
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LineSample:
    """xi(u), v(u) and their u-derivatives"""
    point: np.ndarray
    direction: np.ndarray
    d_point: np.ndarray
    d_direction: np.ndarray
    bounces: Tuple[BouncePoint, ...] = ()


@dataclass(frozen=True, eq=False)
class LineFamily:
    """Closed-form seed family composed with recorded reflections"""
    seed: Callable[[float], LineSample]
    interval: Tuple[float, float] = (-0.1, 0.1)
    reflections: Tuple[Table, ...] = ()

    def __call__(self, u: float) -> LineSample:
        sample = self.seed(float(u))
        for index, table in enumerate(self.reflections):
            sample = _reflect_sample(table, sample, index)
        return sample

    def reflected(self, table: Table) -> "LineFamily":
        return LineFamily(self.seed, self.interval, self.reflections + (table,))

    def line_point(self, u: float, t: float) -> np.ndarray:
        sample = self(u)
        return sample.point + t * sample.direction

    def jacobian(self, u: float, t: float, sample: Optional[LineSample] = None) -> np.ndarray:
        """Jacobian of (u, t) -> xi(u) + t v(u), columns (d/du, d/dt)"""
        sample = sample or self(u)
        return np.column_stack([sample.d_point + t * sample.d_direction, sample.direction])

    def samples(self, count: int = 9) -> np.ndarray:
        return np.linspace(self.interval[0], self.interval[1], count)


def pencil(p: Sequence[float], theta0: float, interval: Tuple[float, float] = (-0.1, 0.1)) -> LineFamily:
    """Lines through p at angle theta0 + u"""
    p = np.asarray(p, dtype=float)

    def seed(u: float) -> LineSample:
        v = direction(theta0 + u)
        return LineSample(p, v, np.zeros(2), rotate_left(v))

    return LineFamily(seed, interval)


def parallel(base: Sequence[float], v: Sequence[float], interval: Tuple[float, float] = (-0.1, 0.1)) -> LineFamily:
    """Parallel lines base + u J(v) along the fixed direction v"""
    base = np.asarray(base, dtype=float)
    v = np.asarray(v, dtype=float) / np.linalg.norm(v)
    offset = rotate_left(v)

    def seed(u: float) -> LineSample:
        return LineSample(base + u * offset, v, offset, np.zeros(2))

    return LineFamily(seed, interval)


def line_family(xi: Callable[[float], Sequence[float]], v: Callable[[float], Sequence[float]],
                d_xi: Callable[[float], Sequence[float]], d_v: Callable[[float], Sequence[float]],
                interval: Tuple[float, float] = (-0.1, 0.1)) -> LineFamily:
    """Family from closed-form callables for xi, v and their derivatives"""

    def seed(u: float) -> LineSample:
        return LineSample(np.asarray(xi(u), dtype=float), np.asarray(v(u), dtype=float),
                          np.asarray(d_xi(u), dtype=float), np.asarray(d_v(u), dtype=float))

    return LineFamily(seed, interval)


def _reflect_sample(table: Table, sample: LineSample, index: int) -> LineSample:
    """Reflect one line and propagate derivatives through the hit condition w(xi + t v) = 0"""
    hit = first_hit(table, RayState(sample.point, sample.direction), bounce_index=index)
    f = frame(table, hit.s)
    v, dv, dxi = sample.direction, sample.d_direction, sample.d_point
    normal, tangent = f.normal, f.tangent
    vn = float(np.dot(v, normal))

    dt = -float(np.dot(normal, dxi + hit.t * dv)) / vn
    d_point = dxi + dt * v + hit.t * dv
    d_normal = -f.curvature * float(np.dot(d_point, tangent)) * tangent

    new_v = reflect(v, normal)
    new_dv = (dv - 2.0 * (float(np.dot(d_normal, v)) + float(np.dot(normal, dv))) * normal
              - 2.0 * vn * d_normal)
    return LineSample(hit.point, new_v, d_point, new_dv, sample.bounces + (hit,))


def reflect_family(table: Table, family: LineFamily) -> LineFamily:
    """Reflected family; every sampled line must meet the table without grazing"""
    reflected = family.reflected(table)
    for u in family.samples():
        try:
            reflected(u)
        except GrazingError:
            raise
        except GeometryError as e:
            logger.error(f"Line u={u:.6g} of the family misses the table")
            raise DomainError(f"Line u={u:.6g} does not meet the table: {e}") from e
    return reflected


@dataclass(frozen=True)
class FocusRatio:
    """Focusing distance f = a / b, normalised so max(|a|, |b|) = 1"""
    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        scale = max(abs(a), abs(b))
        if scale == 0.0 or not math.isfinite(scale):
            raise BilliardError(f"Invalid homogeneous focus pair ({a}, {b})")
        a, b = a / scale, b / scale
        if b < 0.0 or (b == 0.0 and a < 0.0):
            a, b = -a, -b
        object.__setattr__(self, "a", a + 0.0)
        object.__setattr__(self, "b", b + 0.0)

    @classmethod
    def of(cls, f: float) -> "FocusRatio":
        return cls(1.0, 0.0) if math.isinf(f) else cls(f, 1.0)

    @property
    def is_infinite(self) -> bool:
        return self.b == 0.0

    @property
    def value(self) -> float:
        return math.inf if self.is_infinite else self.a / self.b

    def apply(self, matrix: np.ndarray) -> "FocusRatio":
        a, b = matrix @ np.array([self.a, self.b])
        return FocusRatio(a, b)


def envelope(family: LineFamily, u0: float) -> FocusRatio:
    """First-order focusing point of the family at u0, measured along v from xi"""
    sample = family(u0)
    speed = float(np.dot(sample.d_direction, sample.d_direction))
    if math.sqrt(speed) < settings.DEGENERACY_TOLERANCE:
        return FocusRatio(1.0, 0.0)
    return FocusRatio.of(-float(np.dot(sample.d_point, sample.d_direction)) / speed)


@dataclass(frozen=True)
class Degeneracy:
    degenerate: bool
    direction_speed: float
    transverse_speed: float

    def __bool__(self) -> bool:
        return self.degenerate


def is_degenerate(family: LineFamily, u0: float) -> Degeneracy:
    """Degenerate iff v' vanishes and xi' is parallel to v"""
    sample = family(u0)
    direction_speed = float(np.linalg.norm(sample.d_direction))
    transverse_speed = abs(float(cross(sample.d_point, sample.direction)))
    tol = settings.DEGENERACY_TOLERANCE
    return Degeneracy(direction_speed < tol and transverse_speed < tol, direction_speed, transverse_speed)


def mirror_matrix(kappa: float, alpha: float, rho_next: float = 0.0, z: float = 1.0) -> np.ndarray:
    sin_alpha = math.sin(alpha)
    if sin_alpha <= settings.GRAZING_TOLERANCE:
        raise GrazingError(f"Mirror step at grazing angle alpha={alpha}")
    c = 2.0 * kappa * z / sin_alpha
    return np.array([[1.0 - rho_next * c, -rho_next], [c, 1.0]])


def mirror_step(f_in: FocusRatio, kappa: float, alpha: float, rho_next: float = 0.0, z: float = 1.0) -> FocusRatio:
    """One reflection by the mirror equation, then translation by rho_next"""
    return f_in.apply(mirror_matrix(kappa, alpha, rho_next, z))


@dataclass(frozen=True)
class BounceRecord:
    """Per-bounce input to the focusing recursion"""
    s: float
    kappa: float
    alpha: float
    rho: float


@dataclass(frozen=True)
class FocusChain:
    rho0: float
    records: Tuple[BounceRecord, ...]
    steps: Tuple[Tuple[FocusRatio, FocusRatio], ...]
    final: FocusRatio

    def dump(self) -> List[Dict[str, float]]:
        """Per-bounce {s, kappa, alpha, rho, f_before, f_after}"""
        return [
            {"s": r.s, "kappa": r.kappa, "alpha": r.alpha, "rho": r.rho,
             "f_before": before.value, "f_after": after.value}
            for r, (before, after) in zip(self.records, self.steps)
        ]


def chain_inputs(table: Table, path: PolygonalPath) -> Tuple[float, Tuple[BounceRecord, ...]]:
    """rho_0 and the per-bounce records of a certified path"""
    certificate = certify(table, path)
    if not certificate.certified:
        logger.error(f"Focus chain requested for an uncertified path (residual {certificate.residual:.3e})")
        raise InvalidPathError(f"Path is not certified (residual {certificate.residual:.3e})")
    rho = path.rho
    if path.m == 0:
        return float(rho[0]), ()
    kappas = np.atleast_1d(frame(table, np.array(path.vertices)).curvature)
    records = tuple(
        BounceRecord(s=path.vertices[i], kappa=float(kappas[i]), alpha=certificate.alphas[i], rho=float(rho[i + 1]))
        for i in range(path.m)
    )
    return float(rho[0]), records


def fold_chain(rho0: float, records: Sequence[BounceRecord], z: float = 1.0) -> FocusRatio:
    """Matrix-product evaluation of f_m(z) from f_0 = -rho_0"""
    matrix = np.eye(2)
    for record in records:
        matrix = mirror_matrix(record.kappa, record.alpha, record.rho, z) @ matrix
    return FocusRatio(-rho0, 1.0).apply(matrix)


def focus_chain(table: Table, path: PolygonalPath, z: float = 1.0) -> FocusChain:
    rho0, records = chain_inputs(table, path)
    current = FocusRatio(-rho0, 1.0)
    steps = []
    for record in records:
        after = mirror_step(current, record.kappa, record.alpha, record.rho, z)
        steps.append((current, after))
        current = after
    return FocusChain(rho0=rho0, records=records, steps=tuple(steps), final=current)


def propagate_focus(table: Table, path: PolygonalPath, z: float = 1.0) -> FocusRatio:
    """Focus of the pencil at x after all bounces, measured from y"""
    rho0, records = chain_inputs(table, path)
    return fold_chain(rho0, records, z)


@dataclass(frozen=True)
class ConjugacyResult:
    is_conjugate: bool
    margin: float
    focus: FocusRatio


def conjugacy_test(table: Table, path: PolygonalPath, tol: Optional[float] = None) -> ConjugacyResult:
    """x and y are conjugate along the path iff the pencil at x refocuses at y"""
    tol = settings.CONJUGACY_TOLERANCE if tol is None else tol
    focus = propagate_focus(table, path)
    margin = focus.value
    is_conjugate = math.isfinite(margin) and abs(margin) < tol
    logger.debug(f"Conjugacy margin {margin:.3e} along {path.m}-bounce path")
    return ConjugacyResult(is_conjugate=is_conjugate, margin=margin, focus=focus)
