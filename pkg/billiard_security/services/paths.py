"""Billiard path solvers: maximal length and Newton shooting"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from billiard_security.core.config import settings
from billiard_security.core.exceptions import (
    BilliardError, ConvergenceError, DegenerateConfigurationError, GeometryError,
    GrazingError, SingularJacobianError
)
from billiard_security.services.beams import LineFamily, pencil
from billiard_security.services.curve import Table, cross, evaluate
from billiard_security.services.ray import (
    PathCertificate, PolygonalPath, RayState, Trace, certify, direction, same_vertices, trace
)

logger = logging.getLogger(__name__)

DOMAIN_BACKTRACKS = 8

Seed = Union[int, np.random.Generator, None]

__all__ = [
    "PathCertificate", "ShootResult", "Shot", "certify", "enumerate_paths", "max_length_path",
    "path_hessian", "path_length", "rng_from", "same_path", "segment", "shoot", "solve_shooting",
]


def rng_from(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def segment(x: Sequence[float], y: Sequence[float]) -> PolygonalPath:
    """The bounce-free path xy"""
    return PolygonalPath(np.asarray(x, dtype=float), np.asarray(y, dtype=float), (), np.zeros((0, 2)))


def same_path(a: PolygonalPath, b: PolygonalPath, tol: Optional[float] = None) -> bool:
    tol = settings.PATH_IDENTITY_TOLERANCE if tol is None else tol
    return same_vertices(a.vertices, b.vertices, tol)


def _unit_steps(table: Table, x, y, s: np.ndarray, order: int):
    d = evaluate(table, s, order)
    nodes = np.vstack([np.asarray(x, dtype=float), d[0], np.asarray(y, dtype=float)])
    steps = np.diff(nodes, axis=0)
    rho = np.linalg.norm(steps, axis=1)
    if np.any(rho < 1e-12):
        raise DegenerateConfigurationError(f"Coincident consecutive path points (min gap {rho.min():.3e})")
    return d, steps / rho[:, None], rho


def path_length(table: Table, x: Sequence[float], y: Sequence[float], s: Sequence[float]) -> Tuple[float, np.ndarray]:
    """Length of x -> sigma(s_1) -> ... -> sigma(s_m) -> y and its gradient in s"""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    d, units, rho = _unit_steps(table, x, y, s, 1)
    gradient = np.einsum("ij,ij->i", units[:-1] - units[1:], d[1])
    return float(np.sum(rho)), gradient


def path_hessian(table: Table, x: Sequence[float], y: Sequence[float], s: Sequence[float]) -> np.ndarray:
    """Tridiagonal Hessian of the length in s"""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    d, units, rho = _unit_steps(table, x, y, s, 2)
    m = s.size
    projections = (np.eye(2)[None] - np.einsum("ki,kj->kij", units, units)) / rho[:, None, None]
    hessian = np.zeros((m, m))
    for i in range(m):
        hessian[i, i] = (np.dot(units[i] - units[i + 1], d[2][i])
                         + d[1][i] @ (projections[i] + projections[i + 1]) @ d[1][i])
        if i + 1 < m:
            hessian[i, i + 1] = hessian[i + 1, i] = -d[1][i] @ projections[i + 1] @ d[1][i + 1]
    return hessian


def _rotation_steps(m: int) -> List[float]:
    fractions = {Fraction(p, q) for q in range(2, m + 3) for p in range(1, q)}
    return [float(f) for f in sorted(fractions, key=lambda f: (f.denominator, f.numerator))]


def _initial_tuples(m: int, starts: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Arithmetic progressions around the boundary interleaved with stratified random tuples"""
    rotations = _rotation_steps(m)
    tuples = []
    for i in range(starts):
        offset = rng.random()
        if i % 2 == 0 and m > 1:
            step = rotations[(i // 2) % len(rotations)]
            tuples.append(offset + step * np.arange(m))
        else:
            strata = (np.arange(m) + rng.random(m)) / m
            tuples.append(offset + rng.permutation(strata))
    return tuples


def _ascend(table: Table, x, y, s0: np.ndarray) -> Optional[np.ndarray]:
    """Local maximum of the length from s0, or None if the start degenerates"""

    def objective(s: np.ndarray):
        length, gradient = path_length(table, x, y, s)
        return -length, -gradient

    try:
        result = minimize(objective, s0, jac=True, method="BFGS",
                          options={"gtol": 1e-11, "maxiter": 200 * s0.size})
        s = result.x
        for _ in range(20):
            _, gradient = path_length(table, x, y, s)
            if np.max(np.abs(gradient)) < 1e-13:
                break
            hessian = path_hessian(table, x, y, s)
            try:
                step = np.linalg.solve(hessian, -gradient)
            except np.linalg.LinAlgError:
                break
            size = np.linalg.norm(step)
            if not np.isfinite(size):
                break
            if size > settings.NEWTON_DAMPING:
                step *= settings.NEWTON_DAMPING / size
            s = s + step

        hessian = path_hessian(table, x, y, s)
        top = float(np.max(np.linalg.eigvalsh(hessian)))
        if top > 1e-7 * max(1.0, float(np.max(np.abs(hessian)))):
            logger.debug(f"Start converged to a saddle (top eigenvalue {top:.3e})")
            return None
    except DegenerateConfigurationError as e:
        logger.debug(f"Skipping degenerate start: {e}")
        return None
    return np.mod(s, 1.0)


def max_length_path(table: Table, x: Sequence[float], y: Sequence[float], m: int,
                    starts: Optional[int] = None, seed: Seed = 0,
                    tol: Optional[float] = None) -> List[PolygonalPath]:
    """Certified local maxima of the length over m-bounce vertex tuples, longest first"""
    if m < 1:
        raise GeometryError(f"Variational solver needs m >= 1, got {m}")
    starts = settings.DEFAULT_STARTS if starts is None else starts
    rng = rng_from(seed)
    initial = _initial_tuples(m, starts, rng)

    if settings.SOLVER_WORKERS > 1:
        with ThreadPoolExecutor(max_workers=settings.SOLVER_WORKERS) as pool:
            finals = list(pool.map(lambda s0: _ascend(table, x, y, s0), initial))
    else:
        finals = [_ascend(table, x, y, s0) for s0 in initial]

    found: List[Tuple[PolygonalPath, PathCertificate]] = []
    for s in finals:
        if s is None:
            continue
        path = PolygonalPath.on_table(table, x, y, s)
        try:
            certificate = certify(table, path, tol)
        except DegenerateConfigurationError:
            continue
        if not certificate.certified:
            logger.debug(f"Local maximum failed certification (residual {certificate.residual:.3e})")
            continue
        if any(same_path(path, other) for other, _ in found):
            continue
        found.append((path, certificate))

    found.sort(key=lambda item: (-round(item[1].length, 12), item[0].vertices))
    logger.info(f"Variational solver: {len(found)} certified {m}-bounce paths from {starts} starts")
    return [path for path, _ in found]


@dataclass(frozen=True, eq=False)
class Shot:
    """Pencil from p at angle theta reflected m times"""
    family: LineFamily
    theta: float
    m: int
    trace: Trace

    def evaluate(self, u: float, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Point on the m-th reflected line and the Jacobian in (u, t)"""
        sample = self.family(u)
        return sample.point + t * sample.direction, self.family.jacobian(u, t, sample)


def shoot(table: Table, p: Sequence[float], theta: float, m: int) -> Shot:
    p = np.asarray(p, dtype=float)
    family = pencil(p, theta)
    for _ in range(m):
        family = family.reflected(table)
    fragment = trace(table, RayState(p, direction(theta)), m)
    return Shot(family=family, theta=theta, m=m, trace=fragment)


@dataclass(frozen=True, eq=False)
class ShootResult:
    u_star: float
    t_star: float
    theta_star: float
    path: PolygonalPath
    converged: bool
    iterations: int
    jacobian_det: float


def solve_shooting(table: Table, p: Sequence[float], q: Sequence[float], m: int, theta0: float,
                   tol: Optional[float] = None, max_iter: Optional[int] = None) -> ShootResult:
    """Newton iteration on l_m(u, t) = q starting from the angle theta0"""
    tol = settings.SHOOTING_TOLERANCE if tol is None else tol
    max_iter = settings.SHOOTING_MAX_ITER if max_iter is None else max_iter
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    singular = settings.SINGULAR_JACOBIAN_TOLERANCE

    shot = shoot(table, p, theta0, m)
    family = shot.family
    u = 0.0
    sample = family(u)
    t = float(np.dot(q - sample.point, sample.direction))

    iterations = 0
    while True:
        residual = sample.point + t * sample.direction - q
        if np.linalg.norm(residual) < tol:
            break
        if iterations >= max_iter:
            logger.error(f"Shooting from {p.tolist()} stalled at |F|={np.linalg.norm(residual):.3e}")
            raise ConvergenceError(f"Shooting did not converge in {max_iter} iterations")
        jacobian = family.jacobian(u, t, sample)
        det = float(cross(jacobian[:, 0], jacobian[:, 1]))
        if abs(det) < singular:
            logger.error(f"Singular shooting Jacobian at u={u:.6g}, t={t:.6g}")
            raise SingularJacobianError(f"Singular Jacobian (conjugate point) at u={u:.6g}, t={t:.6g}")
        delta = np.linalg.solve(jacobian, -residual)
        size = np.linalg.norm(delta)
        if size > settings.NEWTON_DAMPING:
            delta *= settings.NEWTON_DAMPING / size
        # halve the step until every reflection stays clear of grazing
        for _ in range(DOMAIN_BACKTRACKS):
            try:
                sample = family(u + float(delta[0]))
                break
            except (GrazingError, GeometryError) as e:
                blocked = e
                delta *= 0.5
        else:
            logger.error(f"Shooting step from u={u:.6g} stays outside the admissible domain: {blocked}")
            raise ConvergenceError(f"Shooting left the admissible domain: {blocked}") from blocked
        u += float(delta[0])
        t += float(delta[1])
        iterations += 1

    jacobian = family.jacobian(u, t, sample)
    det = float(cross(jacobian[:, 0], jacobian[:, 1]))
    if abs(det) < singular:
        logger.error(f"Shooting converged onto a conjugate point (det={det:.3e})")
        raise SingularJacobianError(f"Singular Jacobian (conjugate point) at the solution, det={det:.3e}")
    if t <= 0.0:
        logger.error(f"Shooting solution from {p.tolist()} has t={t:.6g}; q lies behind the last reflection")
        raise ConvergenceError(f"Target lies behind the last reflection (t={t:.6g})")

    vertices = [hit.s for hit in sample.bounces]
    path = PolygonalPath.on_table(table, p, q, vertices)
    logger.debug(f"Shooting converged in {iterations} iterations (det={det:.3e})")
    return ShootResult(u_star=u, t_star=t, theta_star=theta0 + u, path=path,
                       converged=True, iterations=iterations, jacobian_det=det)


def initial_angle(path: PolygonalPath) -> float:
    """Direction of the first segment"""
    first = path.nodes[1] - path.nodes[0]
    return math.atan2(float(first[1]), float(first[0]))


def enumerate_paths(table: Table, x: Sequence[float], y: Sequence[float], max_bounces: int,
                    starts_per_m: Optional[int] = None,
                    seed: Seed = 0) -> List[Tuple[PolygonalPath, PathCertificate]]:
    """Certified paths with 0..max_bounces bounces, deduplicated"""
    rng = rng_from(seed)
    found: List[Tuple[PolygonalPath, PathCertificate]] = []
    direct = segment(x, y)
    certificate = certify(table, direct)
    if certificate.certified:
        found.append((direct, certificate))
    for m in range(1, max_bounces + 1):
        try:
            candidates = max_length_path(table, x, y, m, starts_per_m, rng)
        except BilliardError as e:
            logger.warning(f"Enumeration skipped m={m}: {e}")
            continue
        for path in candidates:
            if not any(same_path(path, other) for other, _ in found):
                found.append((path, certify(table, path)))
    return found
