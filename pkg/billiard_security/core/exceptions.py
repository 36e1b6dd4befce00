"""Exception hierarchy shared by the services, the API and the CLI.

Each class carries the process exit code the CLI maps it to:
1 for validation and verification failures, 2 for solver failures,
3 for an exhausted perturbation budget.
"""
from typing import Any, Optional


class BilliardError(Exception):
    """Base exception for billiard computations"""
    exit_code = 1


# Validation failures

class InvalidTableError(BilliardError):
    """Table violates a strict-convexity invariant"""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class UnsupportedDerivativeError(BilliardError, ValueError):
    """Requested derivative order above the supported maximum"""


class ProjectionError(BilliardError):
    """Nearest-point projection did not converge"""


class GeometryError(BilliardError):
    """Ray or line configuration has no valid intersection"""


class GrazingError(BilliardError):
    """Ray meets the boundary tangentially within tolerance"""

    def __init__(self, message: str, bounce_index: Optional[int] = None):
        super().__init__(message)
        self.bounce_index = bounce_index


class DomainError(BilliardError):
    """Line family leaves the table"""


class DegenerateConfigurationError(BilliardError):
    """Consecutive path points coincide"""


class InvalidPathError(BilliardError):
    """Path is not a certified billiard path"""


class CertificationError(InvalidPathError):
    """Reflection residual above the certification threshold"""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class VerificationError(BilliardError):
    """Serialized bundle failed independent verification"""


# Perturbation contract failures

class PerturbationError(BilliardError):
    """Base exception for table perturbations"""


class AmplitudeTooLargeError(PerturbationError):
    """Perturbed table is no longer strictly convex"""


class SupportCollisionError(PerturbationError):
    """Bump support reaches a protected vertex"""


class TargetOutOfReachError(PerturbationError):
    """Point/tangent target could not be met by a local bump"""


class BudgetExceededError(PerturbationError):
    """Measured C2 effect exceeds the requested budget"""
    exit_code = 3


# Solver failures

class SolverError(BilliardError):
    """Base exception for iterative solvers"""
    exit_code = 2


class SingularJacobianError(SolverError):
    """Shooting Jacobian is singular (conjugate endpoints)"""


class ConvergenceError(SolverError):
    """Iteration budget exhausted without convergence"""


class NoPathError(SolverError):
    """No certified path found"""


class PigeonholeError(SolverError):
    """Best path has no vertex away from the existing vertices"""


class BounceLimitError(SolverError):
    """Pigeonhole bounce count exceeds MAX_PIGEONHOLE_BOUNCES"""

    def __init__(self, message: str, required: int, limit: int):
        super().__init__(message)
        self.required = required
        self.limit = limit


class ConjugacyBreakError(SolverError):
    """Every scanned curvature scale violated convexity or budget"""

    def __init__(self, message: str, scan: Any = None):
        super().__init__(message)
        self.scan = scan or []


# Witness pipeline

class WitnessError(BilliardError):
    """Witness construction failed; carries the partial bundle"""

    def __init__(self, message: str, stage: str, partial: Any = None):
        super().__init__(message)
        self.stage = stage
        self.partial = partial


class WitnessSolverError(WitnessError):
    """A pipeline stage failed to produce a usable result"""
    exit_code = 2


class BudgetExhaustedError(WitnessError):
    """Perturbation budget spent without a passing bundle"""
    exit_code = 3
