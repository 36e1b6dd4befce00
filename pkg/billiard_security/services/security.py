"""General position, non-collinearity, blocking and new-vertex path search"""
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from billiard_security.core.config import settings
from billiard_security.core.exceptions import BilliardError, BounceLimitError, NoPathError, PigeonholeError
from billiard_security.services.curve import Table, cross
from billiard_security.services.paths import Seed, max_length_path, rng_from, same_path
from billiard_security.services.ray import PolygonalPath

logger = logging.getLogger(__name__)

CONDITIONS = ("GP1", "GP2", "GP3", "GP4", "NC")


@dataclass(frozen=True)
class Violation:
    """One failed condition with the points that witness it"""
    condition: str
    paths: Tuple[int, ...]
    points: Tuple[Tuple[float, float], ...]
    separation: float
    detail: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class GeneralPositionReport:
    gp1: bool
    gp2: bool
    gp3: bool
    gp4: bool
    nc: bool
    violations: Tuple[Violation, ...]
    tol: float
    min_separation: float = float("inf")

    @property
    def general_position(self) -> bool:
        return self.gp1 and self.gp2 and self.gp3 and self.gp4

    def of(self, condition: str) -> List[Violation]:
        return [v for v in self.violations if v.condition == condition]

    def count(self, *conditions: str) -> int:
        wanted = conditions or CONDITIONS[:4]
        return sum(1 for v in self.violations if v.condition in wanted)


def _pt(p: np.ndarray) -> Tuple[float, float]:
    return float(p[0]), float(p[1])


def segment_distances(p: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Distance from p to each segment starts[i] -> ends[i]"""
    ab = ends - starts
    length2 = np.einsum("ij,ij->i", ab, ab)
    safe = np.where(length2 > 0.0, length2, 1.0)
    t = np.clip(np.einsum("ij,ij->i", p - starts, ab) / safe, 0.0, 1.0)
    t = np.where(length2 > 0.0, t, 0.0)
    return np.linalg.norm(p - (starts + t[:, None] * ab), axis=1)


def _pair_candidates(a, b, c, d, tol: float) -> List[np.ndarray]:
    """Intersection of two segments plus endpoints lying within tol of the other segment"""
    r, s = b - a, d - c
    candidates = []
    denom = float(cross(r, s))
    scale = np.linalg.norm(r) * np.linalg.norm(s)
    if abs(denom) > 1e-14 * scale:
        t = float(cross(c - a, s)) / denom
        u = float(cross(c - a, r)) / denom
        slack_t = tol / max(np.linalg.norm(r), 1e-300)
        slack_u = tol / max(np.linalg.norm(s), 1e-300)
        if -slack_t <= t <= 1.0 + slack_t and -slack_u <= u <= 1.0 + slack_u:
            candidates.append(a + t * r)
    for point, (p0, p1) in ((a, (c, d)), (b, (c, d)), (c, (a, b)), (d, (a, b))):
        if segment_distances(point, p0[None], p1[None])[0] < tol:
            candidates.append(point)
    return candidates


def _vertex_table(paths: Sequence[PolygonalPath]) -> List[Tuple[int, int, np.ndarray]]:
    return [(i, j, path.points[j]) for i, path in enumerate(paths) for j in range(path.m)]


def check_non_collinearity(paths: Sequence[PolygonalPath], y: Sequence[float],
                           tol: Optional[float] = None) -> List[Violation]:
    """Pairs of distinct vertices P, Q with y closer than tol |PQ| to the line PQ"""
    tol = settings.gp_tolerance if tol is None else tol
    y = np.asarray(y, dtype=float)
    violations = []
    for (i, a, p), (j, b, q) in combinations(_vertex_table(paths), 2):
        chord = q - p
        length2 = float(np.dot(chord, chord))
        if length2 < tol * tol:
            continue
        area = abs(float(cross(chord, y - p)))
        if area < tol * length2:
            violations.append(Violation("NC", tuple(sorted({i, j})), (_pt(p), _pt(q)), area / np.sqrt(length2),
                                        {"vertices": [[i, a], [j, b]]}))
    return violations


def check_general_position(paths: Sequence[PolygonalPath], x: Sequence[float], y: Sequence[float],
                           tol: Optional[float] = None) -> GeneralPositionReport:
    """Check GP1-GP4 and NC for a bundle of paths from x to y"""
    tol = settings.gp_tolerance if tol is None else tol
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    violations: List[Violation] = []
    separation = float("inf")

    vertices = _vertex_table(paths)
    for (i, a, p), (j, b, q) in combinations(vertices, 2):
        gap = float(np.linalg.norm(p - q))
        separation = min(separation, gap)
        if gap < tol:
            condition = "GP2" if i == j else "GP1"
            violations.append(Violation(condition, tuple(sorted({i, j})), (_pt(p), _pt(q)), gap,
                                        {"vertices": [[i, a], [j, b]]}))

    owners = [(i, k) for i, path in enumerate(paths) for k in range(path.m + 1)]
    if owners:
        starts = np.array([paths[i].nodes[k] for i, k in owners])
        ends = np.array([paths[i].nodes[k + 1] for i, k in owners])
    else:
        starts = ends = np.zeros((0, 2))

    for label, point, incident in (("x", x, lambda k, m: k == 0), ("y", y, lambda k, m: k == m)):
        for index, (i, k) in enumerate(owners):
            if incident(k, paths[i].m):
                continue
            gap = float(segment_distances(point, starts[index:index + 1], ends[index:index + 1])[0])
            separation = min(separation, gap)
            if gap < tol:
                violations.append(Violation("GP4", (i,), (_pt(point),), gap, {"endpoint": label, "segment": k}))

    clusters: List[np.ndarray] = []
    for first, second in combinations(range(len(owners)), 2):
        for candidate in _pair_candidates(starts[first], ends[first], starts[second], ends[second], tol):
            if np.linalg.norm(candidate - x) < tol or np.linalg.norm(candidate - y) < tol:
                continue
            if any(np.linalg.norm(candidate - c) < tol for c in clusters):
                continue
            distances = segment_distances(candidate, starts, ends)
            near = np.nonzero(distances < tol)[0]
            if near.size < 3:
                continue
            clusters.append(candidate)
            members = [list(owners[n]) for n in near]
            violations.append(Violation(
                "GP3", tuple(sorted({owners[n][0] for n in near})), (_pt(candidate),),
                float(np.sort(distances)[2]), {"cluster_size": int(near.size), "segments": members},
            ))

    nc_violations = check_non_collinearity(paths, y, tol)
    violations.extend(nc_violations)
    flags = {c: not any(v.condition == c for v in violations) for c in CONDITIONS}
    report = GeneralPositionReport(
        gp1=flags["GP1"], gp2=flags["GP2"], gp3=flags["GP3"], gp4=flags["GP4"], nc=flags["NC"],
        violations=tuple(violations), tol=tol, min_separation=separation,
    )
    logger.debug(f"General position over {len(paths)} paths: {report.count()} violations, "
                 f"{len(nc_violations)} NC")
    return report


def blocking_test(paths: Sequence[PolygonalPath], blockers: Sequence[Sequence[float]],
                  radius: float) -> Tuple[bool, List[int]]:
    """A path is blocked when a blocker outside the endpoint balls lies within radius of it"""
    if radius <= 0.0:
        raise BilliardError(f"Blocking radius must be positive, got {radius}")
    unblocked = []
    for index, path in enumerate(paths):
        nodes = path.nodes
        blocked = False
        for blocker in blockers:
            b = np.asarray(blocker, dtype=float)
            if np.linalg.norm(b - path.x) < radius or np.linalg.norm(b - path.y) < radius:
                continue
            if float(np.min(segment_distances(b, nodes[:-1], nodes[1:]))) < radius:
                blocked = True
                break
        if not blocked:
            unblocked.append(index)
    return not unblocked, unblocked


@dataclass(frozen=True, eq=False)
class NewVertexPath:
    path: PolygonalPath
    vertex_index: int
    m: int
    separation: float


def pigeonhole_bounces(existing: Sequence[PolygonalPath]) -> int:
    k = sum(path.m for path in existing)
    return k * k - k + 2


def _new_vertex(path: PolygonalPath, existing: Sequence[PolygonalPath], tol: float) -> Optional[Tuple[int, float]]:
    """Vertex of path farthest from every old vertex and from its own path's other vertices"""
    old = [p for other in existing for p in other.points.reshape(-1, 2)]
    best = None
    for j in range(path.m):
        point = path.points[j]
        own = [path.points[i] for i in range(path.m) if i != j]
        far_old = min((float(np.linalg.norm(point - p)) for p in old), default=float("inf"))
        if far_old < tol:
            continue
        score = min([far_old] + [float(np.linalg.norm(point - p)) for p in own])
        if best is None or score > best[1]:
            best = (j, score)
    return best


def find_new_vertex_path(table: Table, x: Sequence[float], y: Sequence[float],
                         existing: Sequence[PolygonalPath], starts: Optional[int] = None,
                         seed: Seed = 0, tol: Optional[float] = None) -> NewVertexPath:
    """Longest path with k^2 - k + 2 bounces, which must contain a vertex not in the existing set"""
    tol = settings.gp_tolerance if tol is None else tol
    m = pigeonhole_bounces(existing)
    limit = settings.MAX_PIGEONHOLE_BOUNCES
    if m > limit:
        logger.error(f"Pigeonhole bounce count {m} for k={sum(p.m for p in existing)} vertices exceeds the limit {limit}")
        raise BounceLimitError(
            f"{m} bounces are needed to guarantee a new vertex but MAX_PIGEONHOLE_BOUNCES is {limit}",
            required=m, limit=limit
        )

    candidates = max_length_path(table, x, y, m, starts, seed)
    if not candidates:
        logger.error(f"No certified {m}-bounce path from {list(x)} to {list(y)}")
        raise NoPathError(f"Variational solver found no certified {m}-bounce path")
    for path in candidates:
        found = _new_vertex(path, existing, tol)
        if found is not None:
            logger.info(f"New vertex {found[0]} on {m}-bounce path (separation {found[1]:.3e})")
            return NewVertexPath(path=path, vertex_index=found[0], m=m, separation=found[1])

    logger.error(f"All vertices of {len(candidates)} {m}-bounce paths are old")
    raise PigeonholeError(
        f"Every vertex of the {m}-bounce maxima lies within {tol} of an existing vertex; "
        f"either non-collinearity fails or the solver missed the global maximum"
    )


def search_new_vertex_path(table: Table, x: Sequence[float], y: Sequence[float],
                           existing: Sequence[PolygonalPath], starts: Optional[int] = None,
                           seed: Seed = 0, tol: Optional[float] = None) -> NewVertexPath:
    """Fewest-bounce path with a new vertex, ranked by general-position violations"""
    tol = settings.gp_tolerance if tol is None else tol
    rng = rng_from(seed)
    limit = min(pigeonhole_bounces(existing), settings.MAX_SEARCH_BOUNCES)
    for m in range(1, limit + 1):
        ranked = []
        for path in max_length_path(table, x, y, m, starts, rng):
            if any(same_path(path, other) for other in existing):
                continue
            if not check_general_position([path], x, y, tol).gp2:
                continue
            found = _new_vertex(path, existing, tol)
            if found is None:
                continue
            report = check_general_position(list(existing) + [path], x, y, tol)
            ranked.append((report.count(), -found[1], len(ranked), path, found))
        if ranked:
            _, _, _, path, (index, gap) = min(ranked, key=lambda item: item[:3])
            logger.info(f"Search picked a {m}-bounce path ({len(ranked)} candidates)")
            return NewVertexPath(path=path, vertex_index=index, m=m, separation=gap)
        logger.debug(f"No usable {m}-bounce path")
    logger.info("Bounded search exhausted; falling back to the pigeonhole bounce count")
    return find_new_vertex_path(table, x, y, existing, starts, rng, tol)
