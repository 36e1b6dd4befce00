"""Local table perturbations built from compactly supported normal bumps.

Every operation returns a new Table together with a PerturbationRecord; the
input table is never modified. Amplitudes are solved against the measured
post-bump geometry and the result is checked for strict convexity and for
its C2 distance from the input before it is returned.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import newton, root

from billiard_security.core.config import settings
from billiard_security.core.exceptions import (
    AmplitudeTooLargeError, BudgetExceededError, ConjugacyBreakError, GeometryError,
    InvalidPathError, InvalidTableError, PerturbationError, SupportCollisionError,
    TargetOutOfReachError
)
from billiard_security.services.beams import chain_inputs, conjugacy_test, fold_chain
from billiard_security.services.curve import (
    NormalBump, Table, base_normal, ck_distance, cross, evaluate, frame, parameter_distance,
    require_valid
)
from billiard_security.services.ray import PolygonalPath, require_certified, unit

logger = logging.getLogger(__name__)

KINDS = ("curvature", "point_tangent", "vertex_slide", "chord_shift", "conjugacy_break")


@dataclass(frozen=True)
class PerturbationRecord:
    kind: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    support: Tuple[Tuple[float, float], ...] = ()
    d2_effect: float = 0.0


def support_radius(s0: float, protected: Sequence[float] = (), nu: Optional[float] = None) -> float:
    """Bump half width clear of every protected parameter"""
    distances = parameter_distance(np.asarray(list(protected), dtype=float), s0) if len(protected) else np.array([])
    if nu is None:
        nu = settings.MAX_SUPPORT_RADIUS
        if distances.size:
            nu = min(nu, 0.25 * float(distances.min()))
        if nu <= 1e-9:
            raise SupportCollisionError(f"Protected vertex coincides with s={s0:.9f}")
        return nu
    if distances.size and float(distances.min()) < nu:
        logger.error(f"Bump at s={s0:.6f} with half width {nu} reaches a protected vertex")
        raise SupportCollisionError(
            f"Support ({s0 - nu:.6f}, {s0 + nu:.6f}) contains a protected vertex "
            f"(distance {float(distances.min()):.6f})"
        )
    return nu


def _finalize(before: Table, after: Table, eps: Optional[float]) -> float:
    """Check convexity and budget; return the measured C2 effect"""
    try:
        require_valid(after)
    except InvalidTableError as e:
        raise AmplitudeTooLargeError(f"Perturbed table is not strictly convex: {e}") from e
    effect = ck_distance(before, after, 2)
    if eps is not None and effect > eps:
        logger.error(f"Perturbation C2 effect {effect:.4g} exceeds budget {eps:.4g}")
        raise BudgetExceededError(f"C2 effect {effect:.4g} exceeds budget {eps:.4g}")
    return effect


def rotate(v: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def signed_angle(a: np.ndarray, b: np.ndarray) -> float:
    return math.atan2(float(cross(a, b)), float(np.dot(a, b)))


def bump_curvature(table: Table, s0: float, delta_kappa: float, nu: Optional[float] = None,
                   eps: Optional[float] = None, protected: Sequence[float] = ()) -> Tuple[Table, PerturbationRecord]:
    """Change the curvature at s0 by delta_kappa, keeping position and tangent"""
    if delta_kappa == 0.0:
        return table, PerturbationRecord("curvature", {"center_s": s0, "delta_kappa": 0.0})
    nu = support_radius(s0, protected, nu)

    before = frame(table, s0)
    target = before.curvature + delta_kappa
    tangent = evaluate(table, s0, 1)[1]
    guess = delta_kappa * before.speed ** 3 / float(cross(tangent, base_normal(table, s0)))

    def curvature_error(c: float) -> float:
        trial = table.with_bump(NormalBump(s0, nu, curvature_coeff=c))
        return frame(trial, s0).curvature - target

    try:
        amplitude = float(newton(curvature_error, guess, x1=guess * (1.0 + 1e-3), tol=1e-15, maxiter=20))
    except RuntimeError as e:
        raise TargetOutOfReachError(f"Curvature target {target:.6g} not reached: {e}") from e
    if abs(curvature_error(amplitude)) > 1e-8:
        raise TargetOutOfReachError(f"Curvature target {target:.6g} missed by {curvature_error(amplitude):.3e}")

    bumped = table.with_bump(NormalBump(s0, nu, curvature_coeff=amplitude))
    effect = _finalize(table, bumped, eps)
    record = PerturbationRecord(
        kind="curvature",
        parameters={"center_s": float(s0), "nu": nu, "delta_kappa": float(delta_kappa), "amplitude": amplitude},
        support=((float(s0), nu),),
        d2_effect=effect,
    )
    logger.debug(f"Curvature bump at s={s0:.6f}: dk={delta_kappa:.3e}, d2={effect:.3e}")
    return bumped, record


def _place_point_tangent(table: Table, s0: float, target_point: Sequence[float], target_angle: float,
                         nu: Optional[float], eps: Optional[float],
                         protected: Sequence[float]) -> Tuple[Table, PerturbationRecord, float]:
    target = np.asarray(target_point, dtype=float)
    before = frame(table, s0)
    if np.linalg.norm(target - before.point) < 1e-15 and target_angle == 0.0:
        return table, PerturbationRecord("point_tangent", {"center_s": s0, "s_star": s0}), s0
    nu = support_radius(s0, protected, nu)

    wanted = rotate(before.tangent, target_angle)
    offset = target - before.point
    normal0 = base_normal(table, s0)
    guess = [float(np.dot(offset, normal0)), target_angle * before.speed,
             s0 + float(np.dot(offset, before.tangent)) / before.speed]

    def mismatch(z: np.ndarray) -> np.ndarray:
        value, slope, s = z
        trial = table.with_bump(NormalBump(s0, nu, value_coeff=value, slope_coeff=slope))
        d = evaluate(trial, s, 1)
        gap = d[0] - target
        return np.array([gap[0], gap[1], signed_angle(wanted, unit(d[1]))])

    solution = root(mismatch, guess, method="hybr", tol=1e-15)
    value, slope, s_star = (float(v) for v in solution.x)
    error = mismatch(solution.x)
    if np.max(np.abs(error)) > 1e-10 or abs(s_star - s0) > 0.5 * nu:
        logger.error(f"Point/tangent bump at s={s0:.6f} missed its target (error {np.max(np.abs(error)):.3e})")
        raise TargetOutOfReachError(
            f"Target {target.tolist()} with rotation {target_angle:.3e} unreachable from s={s0:.6f}"
        )

    bumped = table.with_bump(NormalBump(s0, nu, value_coeff=value, slope_coeff=slope))
    effect = _finalize(table, bumped, eps)
    record = PerturbationRecord(
        kind="point_tangent",
        parameters={"center_s": float(s0), "nu": nu, "target": target.tolist(), "angle": float(target_angle),
                    "value_coeff": value, "slope_coeff": slope, "s_star": s_star % 1.0},
        support=((float(s0), nu),),
        d2_effect=effect,
    )
    return bumped, record, s_star % 1.0


def bump_point_tangent(table: Table, s0: float, target_point: Sequence[float], target_angle: float,
                       nu: Optional[float] = None, eps: Optional[float] = None,
                       protected: Sequence[float] = ()) -> Tuple[Table, PerturbationRecord]:
    """Make the boundary pass through target_point with its tangent rotated by target_angle"""
    bumped, record, _ = _place_point_tangent(table, s0, target_point, target_angle, nu, eps, protected)
    return bumped, record


def mirror_tangent(point: np.ndarray, a: np.ndarray, b: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Unit tangent at `point` perpendicular to the bisector of angle a-point-b"""
    bisector = unit(a - point) + unit(b - point)
    tangent = unit(np.array([bisector[1], -bisector[0]]))
    return tangent if np.dot(tangent, reference) >= 0.0 else -tangent


def intersect_lines(p1: np.ndarray, d1: np.ndarray, p2: np.ndarray, d2: np.ndarray) -> np.ndarray:
    denom = float(cross(d1, d2))
    if abs(denom) < 1e-12 * np.linalg.norm(d1) * np.linalg.norm(d2):
        raise GeometryError("Lines are parallel")
    a = float(cross(p2 - p1, d2)) / denom
    return p1 + a * d1


def _path_protected(path: PolygonalPath, skip: Sequence[int], protected: Sequence[float]) -> List[float]:
    return list(protected) + [s for i, s in enumerate(path.vertices) if i not in skip]


def move_vertex_on_segment(table: Table, path: PolygonalPath, vertex_index: int, slide: float,
                           nu: Optional[float] = None, eps: Optional[float] = None,
                           protected: Sequence[float] = (),
                           along: Optional[str] = None) -> Tuple[Table, PolygonalPath, PerturbationRecord]:
    """Slide a first or last vertex along an incident segment and re-aim the boundary there.

    along="incoming" keeps the previous point's outgoing direction and needs y as
    the next point; along="outgoing" keeps the next point's incoming direction
    and needs x as the previous point.
    """
    if slide == 0.0:
        return table, path, PerturbationRecord("vertex_slide", {"vertex_index": vertex_index, "slide": 0.0})
    m = path.m
    if not 0 <= vertex_index < m:
        raise InvalidPathError(f"Vertex index {vertex_index} out of range for {m} vertices")
    if along is None:
        along = "incoming" if vertex_index == m - 1 else "outgoing"
    if along == "incoming" and vertex_index != m - 1:
        raise InvalidPathError("Sliding along the incoming segment needs y as the next point")
    if along == "outgoing" and vertex_index != 0:
        raise InvalidPathError("Sliding along the outgoing segment needs x as the previous point")

    nodes = path.nodes
    previous, vertex, following = nodes[vertex_index], nodes[vertex_index + 1], nodes[vertex_index + 2]
    far = following if along == "outgoing" else previous
    moved = vertex + slide * unit(far - vertex)

    s0 = path.vertices[vertex_index]
    old_tangent = frame(table, s0).tangent
    tangent = mirror_tangent(moved, previous, following, old_tangent)
    others = _path_protected(path, [vertex_index], protected)
    bumped, placed, s_star = _place_point_tangent(table, s0, moved, signed_angle(old_tangent, tangent),
                                                  nu, eps, others)

    vertices = list(path.vertices)
    vertices[vertex_index] = s_star
    new_path = PolygonalPath.on_table(bumped, path.x, path.y, vertices)
    require_certified(bumped, new_path)
    record = PerturbationRecord(
        kind="vertex_slide",
        parameters={**placed.parameters, "vertex_index": vertex_index, "slide": float(slide), "along": along},
        support=placed.support,
        d2_effect=placed.d2_effect,
    )
    logger.info(f"Vertex {vertex_index} slid by {slide:.3e} ({along}), d2={placed.d2_effect:.3e}")
    return bumped, new_path, record


def parallel_chord_shift(table: Table, path: PolygonalPath, chord_index: int, slide: float,
                         nu: Optional[float] = None, eps: Optional[float] = None,
                         protected: Sequence[float] = ()) -> Tuple[Table, PolygonalPath, PerturbationRecord]:
    """Replace the chord PQ (segment `chord_index`) by a parallel chord through P + slide e_AP"""
    if slide == 0.0:
        return table, path, PerturbationRecord("chord_shift", {"chord_index": chord_index, "slide": 0.0})
    if not 1 <= chord_index <= path.m - 1:
        raise InvalidPathError(f"Segment {chord_index} is not a chord of a {path.m}-vertex path")

    nodes = path.nodes
    a, p, q, b = nodes[chord_index - 1], nodes[chord_index], nodes[chord_index + 1], nodes[chord_index + 2]
    p_new = p + slide * unit(p - a)
    q_new = intersect_lines(p_new, q - p, q, q - b)

    i_p, i_q = chord_index - 1, chord_index
    s_p, s_q = path.vertices[i_p], path.vertices[i_q]
    others = _path_protected(path, [i_p, i_q], protected)
    if nu is None:
        nu = min(support_radius(s_p, others + [s_q]), support_radius(s_q, others + [s_p]))

    tangent_p = mirror_tangent(p_new, a, q_new, frame(table, s_p).tangent)
    first, rec_p, s_p_new = _place_point_tangent(
        table, s_p, p_new, signed_angle(frame(table, s_p).tangent, tangent_p), nu, None, others + [s_q])
    tangent_q = mirror_tangent(q_new, p_new, b, frame(first, s_q).tangent)
    second, rec_q, s_q_new = _place_point_tangent(
        first, s_q, q_new, signed_angle(frame(first, s_q).tangent, tangent_q), nu, None, others + [s_p])

    effect = _finalize(table, second, eps)
    vertices = list(path.vertices)
    vertices[i_p], vertices[i_q] = s_p_new, s_q_new
    new_path = PolygonalPath.on_table(second, path.x, path.y, vertices)
    require_certified(second, new_path)
    record = PerturbationRecord(
        kind="chord_shift",
        parameters={"chord_index": chord_index, "slide": float(slide), "nu": nu,
                    "p_target": p_new.tolist(), "q_target": q_new.tolist(),
                    "p_bump": rec_p.parameters, "q_bump": rec_q.parameters},
        support=rec_p.support + rec_q.support,
        d2_effect=effect,
    )
    logger.info(f"Chord {chord_index} shifted by {slide:.3e}, d2={effect:.3e}")
    return second, new_path, record


def _distinct_parameters(values: Sequence[float]) -> List[float]:
    distinct: List[float] = []
    for s in values:
        if all(parameter_distance(s, other) > 1e-9 for other in distinct):
            distinct.append(s)
    return distinct


def break_conjugacy(table: Table, path: PolygonalPath, eps: Optional[float] = None,
                    protected: Sequence[float] = ()) -> Tuple[Table, PerturbationRecord, float]:
    """Scale the curvature at every vertex by z so x and y stop being conjugate along the path"""
    status = conjugacy_test(table, path)
    if not status.is_conjugate:
        return table, PerturbationRecord("conjugacy_break", {"z": 1.0}), status.margin

    rho0, records = chain_inputs(table, path)
    steps = range(1, settings.CONJUGACY_SCAN_STEPS + 1)
    candidates = [1.0 + sign * j * settings.CONJUGACY_SCAN_STEP for j in steps for sign in (1.0, -1.0)]
    predicted = {z: fold_chain(rho0, records, z).value for z in candidates}
    order = sorted(candidates, key=lambda z: (-abs(predicted[z]), z))

    vertices = _distinct_parameters(path.vertices)
    floor = 10.0 * settings.CONJUGACY_TOLERANCE
    scan: List[Dict[str, Any]] = []
    for z in order:
        if abs(predicted[z]) < floor:
            scan.append({"z": z, "predicted": predicted[z], "outcome": "margin"})
            continue
        try:
            current = table
            supports = []
            for s in vertices:
                kappa = frame(table, s).curvature
                others = list(protected) + [v for v in vertices if v is not s]
                current, record = bump_curvature(current, s, kappa * (z - 1.0), protected=others)
                supports.extend(record.support)
            effect = _finalize(table, current, eps)
        except PerturbationError as e:
            scan.append({"z": z, "predicted": predicted[z], "outcome": type(e).__name__})
            logger.debug(f"Curvature scale z={z} rejected: {e}")
            continue

        moved = PolygonalPath.on_table(current, path.x, path.y, path.vertices)
        after = conjugacy_test(current, moved)
        if abs(after.margin) < floor:
            scan.append({"z": z, "predicted": predicted[z], "outcome": "margin"})
            continue
        record = PerturbationRecord(
            kind="conjugacy_break",
            parameters={"z": z, "predicted_margin": predicted[z], "vertices": list(vertices),
                        "margin_before": status.margin},
            support=tuple(supports),
            d2_effect=effect,
        )
        logger.info(f"Broke conjugacy with z={z}: margin {status.margin:.3e} -> {after.margin:.3e}")
        return current, record, after.margin

    logger.error(f"No curvature scale broke conjugacy within budget ({len(scan)} candidates)")
    raise ConjugacyBreakError("Every scanned curvature scale violated convexity or budget", scan=scan)
