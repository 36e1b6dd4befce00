"""Inductive construction of n billiard paths from x to y in general position.

The builder keeps an immutable sequence of tables. Step k adds one path and
may spend at most eps_budget * 2^-k of C2 distance doing so:

  1. repair non-collinearity of the existing vertices (best effort)
  2. find a certified path with a vertex no existing path uses
  3. break a conjugacy of x and y along it by scaling curvatures
  4. splice the path around its new vertex when it shares vertices
  5. slide vertices and chords until no triple points remain

Existing paths are re-certified after every table change and re-solved by
shooting when a bump reached them.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from billiard_security.core.config import settings
from billiard_security.core.exceptions import (
    BilliardError, BudgetExceededError, BudgetExhaustedError, ConjugacyBreakError, DomainError,
    PerturbationError, WitnessError, WitnessSolverError
)
from billiard_security.services.beams import conjugacy_test
from billiard_security.services.curve import Table, ck_distance, frame, require_valid, tubular
from billiard_security.services.paths import (
    Seed, initial_angle, rng_from, segment, solve_shooting
)
from billiard_security.services.perturb import (
    PerturbationRecord, break_conjugacy, bump_point_tangent, intersect_lines, mirror_tangent,
    move_vertex_on_segment, parallel_chord_shift, signed_angle, support_radius
)
from billiard_security.services.ray import (
    PolygonalPath, RayState, certify, direction, require_certified, trace
)
from billiard_security.services.security import (
    GeneralPositionReport, check_general_position, search_new_vertex_path
)

logger = logging.getLogger(__name__)

SLIDES = (1e-3, -1e-3, 2e-3, -2e-3, 4e-3, -4e-3)
SPLICE_ANGLES = (2e-4, -2e-4, 5e-4, -5e-4, 1e-3, -1e-3)


@dataclass
class WitnessBundle:
    original: Table
    table: Table
    x: np.ndarray
    y: np.ndarray
    paths: List[PolygonalPath]
    report: Optional[GeneralPositionReport]
    perturbation_log: List[PerturbationRecord]
    d2_drift: float
    eps_budget: float
    n: int
    diagnostics: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return (len(self.paths) == self.n and self.report is not None
                and self.report.general_position and self.d2_drift <= self.eps_budget)


class WitnessBuilder:
    """State machine over (table, paths) snapshots"""

    def __init__(self, table: Table, x: Sequence[float], y: Sequence[float], n: int,
                 eps_budget: Optional[float] = None, seed: Seed = 0, tol: Optional[float] = None):
        self.original = table
        self.table = table
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.n = n
        self.eps_budget = settings.WITNESS_EPS_BUDGET if eps_budget is None else eps_budget
        self.rng = rng_from(seed)
        self.tol = settings.gp_tolerance if tol is None else tol
        self.paths: List[PolygonalPath] = []
        self.log: List[PerturbationRecord] = []
        self.diagnostics: List[Dict[str, Any]] = []
        self.stage = "init"

    # Snapshot helpers

    def report(self) -> GeneralPositionReport:
        return check_general_position(self.paths, self.x, self.y, self.tol)

    def bundle(self) -> WitnessBundle:
        try:
            report = self.report() if self.paths else None
        except BilliardError:
            report = None
        return WitnessBundle(
            original=self.original, table=self.table, x=self.x, y=self.y, paths=list(self.paths),
            report=report, perturbation_log=list(self.log),
            d2_drift=ck_distance(self.original, self.table, 2) if self.log else 0.0,
            eps_budget=self.eps_budget, n=self.n, diagnostics=list(self.diagnostics),
        )

    def _note(self, event: str, **details):
        entry = {"stage": self.stage, "event": event, **details}
        self.diagnostics.append(entry)
        logger.debug(f"[{self.stage}] {event} {details}")

    def _protected(self, skip_path: Optional[int] = None) -> List[float]:
        return [s for i, path in enumerate(self.paths) if i != skip_path for s in path.vertices]

    def _commit(self, table: Table, record: PerturbationRecord, replace: Optional[Tuple[int, PolygonalPath]] = None):
        self.table = table
        self.log.append(record)
        if replace is not None:
            index, path = replace
            self.paths[index] = path
        self._resolve_existing()

    def _resolve_existing(self):
        """Re-certify every path on the current table, re-shooting the ones a bump reached"""
        for index, path in enumerate(self.paths):
            moved = PolygonalPath.on_table(self.table, self.x, self.y, path.vertices)
            if certify(self.table, moved).certified:
                self.paths[index] = moved
                continue
            logger.info(f"Path {index} lost certification; re-solving by shooting")
            result = solve_shooting(self.table, self.x, self.y, path.m, initial_angle(path))
            require_certified(self.table, result.path)
            self.paths[index] = result.path

    # Pipeline

    def run(self) -> WitnessBundle:
        self._start()
        try:
            for k in range(1, self.n):
                self._step(k)
            self.stage = "final"
            bundle = self.bundle()
            if bundle.report is None or not bundle.report.general_position:
                raise BudgetExhaustedError("Final bundle is not in general position", self.stage, bundle)
            if bundle.d2_drift > self.eps_budget:
                raise BudgetExhaustedError(
                    f"Total drift {bundle.d2_drift:.4g} exceeds budget {self.eps_budget:.4g}", self.stage, bundle)
            logger.info(f"Witness with {self.n} paths built, drift {bundle.d2_drift:.3e}, "
                        f"{len(self.log)} perturbations")
            return bundle
        except WitnessError:
            raise
        except BudgetExceededError as e:
            logger.error(f"Witness budget spent at stage {self.stage}: {e}")
            raise BudgetExhaustedError(str(e), self.stage, self.bundle()) from e
        except BilliardError as e:
            logger.error(f"Witness pipeline failed at stage {self.stage}: {e}")
            raise WitnessSolverError(f"{type(e).__name__}: {e}", self.stage, self.bundle()) from e

    def _start(self):
        self.stage = "init"
        if self.n < 1:
            raise DomainError(f"Witness needs n >= 1, got {self.n}")
        require_valid(self.table)
        if np.linalg.norm(self.x - self.y) < self.tol:
            raise DomainError("Endpoints x and y coincide")
        for label, point in (("x", self.x), ("y", self.y)):
            if tubular(self.table, point).w <= 0.0:
                raise DomainError(f"Endpoint {label}={point.tolist()} is not inside the table")
        self.paths = [segment(self.x, self.y)]

    def _step(self, k: int):
        eps = self.eps_budget * 2.0 ** -k
        before = self.table
        logger.info(f"Witness step {k}: {len(self.paths)} paths, budget {eps:.3e}")

        self.stage = f"nc[{k}]"
        self._repair_non_collinearity(eps)

        self.stage = f"search[{k}]"
        found = search_new_vertex_path(self.table, self.x, self.y, self.paths, seed=self.rng, tol=self.tol)
        self.paths.append(found.path)
        index = len(self.paths) - 1
        self._note("candidate", m=found.m, vertex_index=found.vertex_index, separation=found.separation)

        self.stage = f"conjugacy[{k}]"
        try:
            self._break_conjugacy(index, eps)
        except ConjugacyBreakError:
            if self.report().gp1:
                raise
            self._note("splice_before_conjugacy")
            self.stage = f"isolate[{k}]"
            self._splice(index, found.vertex_index, eps)
            self.stage = f"conjugacy[{k}]"
            self._break_conjugacy(index, eps)

        self.stage = f"isolate[{k}]"
        if not self.report().gp1:
            self._splice(index, found.vertex_index, eps)

        self.stage = f"repair[{k}]"
        self._repair_general_position(eps)

        drift = ck_distance(before, self.table, 2)
        if drift > eps:
            raise BudgetExhaustedError(f"Step {k} drift {drift:.4g} exceeds {eps:.4g}", self.stage, self.bundle())
        self._note("step_done", drift=drift)

    def _break_conjugacy(self, index: int, eps: float):
        path = self.paths[index]
        if not conjugacy_test(self.table, path).is_conjugate:
            return
        table, record, margin = break_conjugacy(self.table, path, eps=eps, protected=self._protected(index))
        self._note("conjugacy_broken", margin=margin, z=record.parameters.get("z"))
        self._commit(table, record)

    def _splice(self, index: int, vertex_index: int, eps: float):
        """Re-aim both halves of path `index` by small angles and install their meeting point"""
        path = self.paths[index]
        m = path.m
        s_v = path.vertices[vertex_index]
        theta_x = initial_angle(path)
        back = path.nodes[-2] - self.y
        theta_y = math.atan2(float(back[1]), float(back[0]))
        old = np.array([p for i, other in enumerate(self.paths) if i != index for p in other.points.reshape(-1, 2)])

        options = []
        for dx in SPLICE_ANGLES:
            for dy in SPLICE_ANGLES:
                try:
                    head = trace(self.table, RayState(self.x, direction(theta_x + dx)), vertex_index)
                    tail = trace(self.table, RayState(self.y, direction(theta_y + dy)), m - 1 - vertex_index)
                    meeting = intersect_lines(head.final.p, head.final.v, tail.final.p, tail.final.v)
                except BilliardError:
                    continue
                others = [b.s for b in head.bounces] + [b.s for b in reversed(tail.bounces)]
                points = [b.point for b in head.bounces] + [b.point for b in tail.bounces] + [meeting]
                score = min((float(np.min(np.linalg.norm(old - p, axis=1))) for p in points), default=math.inf) \
                    if old.size else math.inf
                options.append((-score, dx, dy, head, tail, meeting, others))
        options.sort(key=lambda item: item[:3])

        for neg_score, dx, dy, head, tail, meeting, others in options:
            if -neg_score < self.tol:
                break
            protected = self._protected(index) + others
            reference = frame(self.table, s_v).tangent
            tangent = mirror_tangent(meeting, head.final.p, tail.final.p, reference)
            try:
                nu = support_radius(s_v, protected)
                table, record = bump_point_tangent(self.table, s_v, meeting, signed_angle(reference, tangent),
                                                   nu=nu, eps=eps, protected=protected)
                s_star = record.parameters.get("s_star", s_v)
                vertices = ([b.s for b in head.bounces] + [s_star] + [b.s for b in reversed(tail.bounces)])
                spliced = PolygonalPath.on_table(table, self.x, self.y, vertices)
                require_certified(table, spliced)
            except BilliardError as e:
                self._note("splice_rejected", dx=dx, dy=dy, reason=str(e))
                continue
            self._note("spliced", dx=dx, dy=dy, separation=-neg_score)
            self._commit(table, PerturbationRecord(record.kind, {**record.parameters, "splice": [dx, dy]},
                                                   record.support, record.d2_effect), (index, spliced))
            return
        raise WitnessSolverError(f"No splice of path {index} separates its vertices", self.stage, self.bundle())

    def _repair_non_collinearity(self, eps: float):
        for _ in range(settings.WITNESS_MAX_REPAIRS):
            report = self.report()
            violations = report.of("NC")
            if not violations:
                return
            vertices = violations[0].detail["vertices"]
            if not any(self._try_slides(i, j, eps, lambda r: len(r.of("NC")), len(violations))
                       for i, j in vertices):
                logger.warning(f"Could not repair {len(violations)} non-collinearity violations")
                self._note("nc_unrepaired", count=len(violations))
                return

    def _try_slides(self, path_index: int, vertex_index: int, eps: float, score, current: int) -> bool:
        path = self.paths[path_index]
        if vertex_index not in (0, path.m - 1):
            return False
        for slide in SLIDES:
            try:
                table, moved, record = move_vertex_on_segment(
                    self.table, path, vertex_index, slide, eps=eps, protected=self._protected(path_index))
            except (PerturbationError, BilliardError) as e:
                self._note("slide_rejected", path=path_index, vertex=vertex_index, slide=slide, reason=str(e))
                continue
            if self._accept(table, record, path_index, moved, score, current):
                return True
        return False

    def _accept(self, table: Table, record: PerturbationRecord, index: int, path: PolygonalPath,
                score, current: int) -> bool:
        """Commit a trial perturbation when it lowers the violation score"""
        saved = (self.table, list(self.paths), list(self.log))
        try:
            self._commit(table, record, (index, path))
        except BilliardError as e:
            self.table, self.paths, self.log = saved
            self._note("commit_rejected", reason=str(e))
            return False
        if score(self.report()) < current:
            self._note("repaired", kind=record.kind, path=index)
            return True
        self.table, self.paths, self.log = saved
        return False

    def _repair_general_position(self, eps: float):
        for _ in range(settings.WITNESS_MAX_REPAIRS):
            report = self.report()
            current = report.count()
            if report.general_position:
                return
            violation = next(v for v in report.violations if v.condition in ("GP3", "GP4", "GP1", "GP2"))
            if violation.condition == "GP3":
                segments = violation.detail["segments"]
            elif violation.condition == "GP4":
                segments = [[violation.paths[0], violation.detail["segment"]]]
            else:
                segments = [[i, 0] for i in violation.paths]
            # newest path first
            segments = sorted(segments, key=lambda item: -item[0])
            if not any(self._repair_segment(i, k, eps, current) for i, k in segments):
                raise BudgetExhaustedError(
                    f"Could not repair {violation.condition} violation at {violation.points}",
                    self.stage, self.bundle())

    def _repair_segment(self, path_index: int, segment_index: int, eps: float, current: int) -> bool:
        path = self.paths[path_index]
        count = lambda r: r.count()
        if path.m == 0:
            return False
        if segment_index == 0:
            return self._try_slides(path_index, 0, eps, count, current)
        if segment_index == path.m:
            return self._try_slides(path_index, path.m - 1, eps, count, current)
        for slide in SLIDES:
            try:
                table, moved, record = parallel_chord_shift(
                    self.table, path, segment_index, slide, eps=eps, protected=self._protected(path_index))
            except BilliardError as e:
                self._note("shift_rejected", path=path_index, chord=segment_index, slide=slide, reason=str(e))
                continue
            if self._accept(table, record, path_index, moved, count, current):
                return True
        return False


def construct_witness(table: Table, x: Sequence[float], y: Sequence[float], n: int,
                      eps_budget: Optional[float] = None, seed: Seed = 0,
                      tol: Optional[float] = None) -> WitnessBundle:
    """n certified paths from x to y in general position on a C2-close table"""
    return WitnessBuilder(table, x, y, n, eps_budget, seed, tol).run()
