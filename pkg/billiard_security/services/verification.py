"""Independent re-check of a serialized witness bundle.

Only the document is trusted: the table and every path are rebuilt from
it and re-certified. Nothing from the construction pipeline is imported.
"""
import logging
from typing import List, Optional

import numpy as np

from billiard_security.core.config import settings
from billiard_security.core.exceptions import BilliardError, VerificationError
from billiard_security.schemas.witness import (
    GeneralPositionDocument, PathCheckDocument, VerificationReport, WitnessBundleDocument
)
from billiard_security.services.curve import ck_distance, validate
from billiard_security.services.ray import certify
from billiard_security.services.security import check_general_position

logger = logging.getLogger(__name__)

POINT_TOLERANCE = 1e-9


def verify_bundle(document: WitnessBundleDocument, tol: Optional[float] = None,
                  residual_tol: Optional[float] = None) -> VerificationReport:
    """Rebuild and re-check a bundle; `passed` is true iff every check holds"""
    tol = settings.gp_tolerance if tol is None else tol
    residual_tol = settings.certificate_residual if residual_tol is None else residual_tol
    messages: List[str] = []

    try:
        table = document.table.to_table()
        original = document.original.to_table()
    except BilliardError as e:
        raise VerificationError(f"Bundle table cannot be rebuilt: {e}") from e
    table_valid = validate(table).valid
    if not table_valid:
        messages.append("table is not strictly convex")

    x = np.asarray(document.x, dtype=float)
    y = np.asarray(document.y, dtype=float)
    checks = []
    paths = []
    for index, record in enumerate(document.paths):
        path = record.to_path(table)
        paths.append(path)
        endpoints_ok = bool(np.allclose(path.x, x, rtol=0.0, atol=1e-12)
                            and np.allclose(path.y, y, rtol=0.0, atol=1e-12))
        stored = np.asarray(record.points, dtype=float).reshape(-1, 2)
        points_ok = stored.shape == path.points.shape and bool(
            np.all(np.linalg.norm(stored - path.points, axis=1) < POINT_TOLERANCE) if stored.size else True)
        try:
            certificate = certify(table, path, residual_tol)
            residual, min_alpha, certified = certificate.residual, certificate.min_alpha, certificate.certified
        except BilliardError as e:
            messages.append(f"path {index}: {e}")
            residual, min_alpha, certified = float("inf"), 0.0, False
        if not certified:
            messages.append(f"path {index} fails certification (residual {residual:.3e})")
        if not endpoints_ok:
            messages.append(f"path {index} does not join the bundle endpoints")
        if not points_ok:
            messages.append(f"path {index} stored points disagree with the table")
        checks.append(PathCheckDocument(index=index, residual=min(residual, 1e300), certified=certified,
                                        endpoints_ok=endpoints_ok, points_ok=points_ok, min_alpha=min_alpha))

    general_position = None
    if paths:
        report = check_general_position(paths, x, y, tol)
        general_position = GeneralPositionDocument.from_report(report)
        if not report.general_position:
            messages.append(f"general position fails with {report.count()} violations")
    else:
        messages.append("bundle has no paths")

    path_count_ok = len(paths) == document.n
    if not path_count_ok:
        messages.append(f"bundle holds {len(paths)} paths, expected {document.n}")
    drift = ck_distance(original, table, 2)
    drift_ok = drift <= document.eps_budget
    if not drift_ok:
        messages.append(f"C2 drift {drift:.4g} exceeds budget {document.eps_budget:.4g}")

    passed = (table_valid and path_count_ok and drift_ok and bool(paths)
              and all(c.certified and c.endpoints_ok and c.points_ok for c in checks)
              and general_position is not None and general_position.gp1 and general_position.gp2
              and general_position.gp3 and general_position.gp4)
    logger.info(f"Verification {'passed' if passed else 'failed'}: {len(paths)} paths, drift {drift:.3e}")
    return VerificationReport(
        passed=passed, paths=checks, general_position=general_position, path_count_ok=path_count_ok,
        table_valid=table_valid, d2_drift=drift, eps_budget=document.eps_budget, drift_ok=drift_ok,
        messages=messages,
    )
