"""Smooth strictly convex tables.

A table boundary is a truncated trigonometric series sigma0(s), s in [0, 1),
plus a sum of compactly supported normal offsets d(s) N0(s), where N0 is the
inward normal of the base curve. Derivatives of the offset curve are
propagated exactly through the product rule, so every quantity downstream
(frames, curvature, reflected families) sees the same analytic curve.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from billiard_security.core.config import settings
from billiard_security.core.exceptions import (
    InvalidTableError, ProjectionError, UnsupportedDerivativeError
)

logger = logging.getLogger(__name__)

MAX_ORDER = 4
TWO_PI = 2.0 * math.pi

ArrayLike = Union[float, Sequence[float], np.ndarray]


def parameter_distance(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """Distance between boundary parameters on the circle R/Z"""
    delta = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 1.0)
    return np.minimum(delta, 1.0 - delta)


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def rotate_left(v: np.ndarray) -> np.ndarray:
    """Quarter turn counterclockwise, J(a, b) = (-b, a)"""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


# Bump profiles

def _mollifier_derivatives(x: np.ndarray, order: int) -> np.ndarray:
    """Derivatives of e * exp(1/(x^2 - 1)) for |x| < 1, shape (order+1, len(x))"""
    w = x * x - 1.0
    iw = 1.0 / w
    value = math.e * np.exp(iw)
    out = np.zeros((order + 1, x.size))
    out[0] = value
    if order == 0:
        return out

    p1 = -2.0 * x * iw ** 2
    p2 = -2.0 * iw ** 2 + 8.0 * x ** 2 * iw ** 3
    p3 = 24.0 * x * iw ** 3 - 48.0 * x ** 3 * iw ** 4
    p4 = 24.0 * iw ** 3 - 288.0 * x ** 2 * iw ** 4 + 384.0 * x ** 4 * iw ** 5

    out[1] = value * p1
    if order >= 2:
        out[2] = value * (p2 + p1 ** 2)
    if order >= 3:
        out[3] = value * (p3 + 3.0 * p1 * p2 + p1 ** 3)
    if order >= 4:
        out[4] = value * (p4 + 4.0 * p1 * p3 + 3.0 * p2 ** 2 + 6.0 * p1 ** 2 * p2 + p1 ** 4)
    return out


def bump_profiles(x: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value, slope and curvature profiles with derivatives up to `order`.

    psi1(0) = 1, psi1'(0) = 0
    psi2 = x psi1:        psi2(0) = 0, psi2'(0) = 1
    psi3 = x^2/2 psi1:    psi3(0) = psi3'(0) = 0, psi3''(0) = 1
    """
    x = np.asarray(x, dtype=float)
    m = _mollifier_derivatives(x, order)
    psi2 = np.zeros_like(m)
    psi3 = np.zeros_like(m)
    for j in range(order + 1):
        psi2[j] = x * m[j] + (j * m[j - 1] if j >= 1 else 0.0)
        psi3[j] = 0.5 * x * x * m[j]
        if j >= 1:
            psi3[j] += j * x * m[j - 1]
        if j >= 2:
            psi3[j] += math.comb(j, 2) * m[j - 2]
    return m, psi2, psi3


@dataclass(frozen=True)
class NormalBump:
    """Compactly supported normal offset centred at `center_s`"""
    center_s: float
    half_width: float
    value_coeff: float = 0.0
    slope_coeff: float = 0.0
    curvature_coeff: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.half_width < 0.5:
            raise InvalidTableError(f"Bump half width must lie in (0, 0.5), got {self.half_width}")
        object.__setattr__(self, "center_s", float(self.center_s) % 1.0)

    def support(self) -> Tuple[float, float]:
        return (self.center_s - self.half_width, self.center_s + self.half_width)

    def contains(self, s: ArrayLike) -> np.ndarray:
        return parameter_distance(s, self.center_s) < self.half_width

    def offset(self, s: np.ndarray, order: int) -> np.ndarray:
        """Offset d(s) and its parameter derivatives, shape (order+1, len(s))"""
        delta = np.mod(s - self.center_s + 0.5, 1.0) - 0.5
        x = delta / self.half_width
        mask = np.abs(x) < 1.0
        out = np.zeros((order + 1, s.size))
        if not mask.any():
            return out

        psi1, psi2, psi3 = bump_profiles(x[mask], order)
        nu = self.half_width
        for j in range(order + 1):
            out[j, mask] = (
                self.value_coeff * nu ** (-j) * psi1[j]
                + self.slope_coeff * nu ** (1 - j) * psi2[j]
                + self.curvature_coeff * nu ** (2 - j) * psi3[j]
            )
        return out


@dataclass(frozen=True, eq=False)
class Table:
    """Closed curve sigma(s) = sigma0(s) + d(s) N0(s), counterclockwise, period 1.

    Coefficient arrays hold the constant term first, then (cos, sin) pairs
    for harmonics 1, 2, ...
    """
    base_x: np.ndarray
    base_y: np.ndarray
    bumps: Tuple[NormalBump, ...] = ()
    grid: int = field(default_factory=lambda: settings.VALIDATION_GRID)

    def __post_init__(self):
        base_x = np.asarray(self.base_x, dtype=float).ravel()
        base_y = np.asarray(self.base_y, dtype=float).ravel()
        if base_x.size % 2 == 0 or base_y.size % 2 == 0:
            raise InvalidTableError("Fourier coefficient arrays need a constant term plus cos/sin pairs")
        size = max(base_x.size, base_y.size)
        base_x = np.pad(base_x, (0, size - base_x.size))
        base_y = np.pad(base_y, (0, size - base_y.size))
        base_x.flags.writeable = False
        base_y.flags.writeable = False
        object.__setattr__(self, "base_x", base_x)
        object.__setattr__(self, "base_y", base_y)
        object.__setattr__(self, "bumps", tuple(self.bumps))
        if self.grid < 16:
            raise InvalidTableError(f"Validation grid too small: {self.grid}")

    @property
    def harmonics(self) -> int:
        return (self.base_x.size - 1) // 2

    def with_bump(self, bump: NormalBump) -> "Table":
        return replace(self, bumps=self.bumps + (bump,))

    def without_bumps(self) -> "Table":
        return replace(self, bumps=())

    @cached_property
    def samples(self) -> np.ndarray:
        return np.arange(self.grid) / self.grid

    @cached_property
    def sample_points(self) -> np.ndarray:
        return evaluate(self, self.samples, 0)[0]

    @cached_property
    def diameter(self) -> float:
        pts = self.sample_points
        spans = pts.max(axis=0) - pts.min(axis=0)
        return float(np.hypot(*spans))


def circle(radius: float = 1.0, center: Tuple[float, float] = (0.0, 0.0), grid: Optional[int] = None) -> Table:
    """Circle of the given radius, parametrized (cos 2 pi s, sin 2 pi s)"""
    if radius <= 0:
        raise InvalidTableError(f"Circle radius must be positive, got {radius}")
    kwargs = {"grid": grid} if grid else {}
    return Table([center[0], radius, 0.0], [center[1], 0.0, radius], **kwargs)


def ellipse(a: float, b: float, grid: Optional[int] = None) -> Table:
    """Ellipse with semi-axes a (along x) and b (along y)"""
    if a <= 0 or b <= 0:
        raise InvalidTableError(f"Ellipse semi-axes must be positive, got {a}, {b}")
    kwargs = {"grid": grid} if grid else {}
    return Table([0.0, a, 0.0], [0.0, 0.0, b], **kwargs)


def noisy(table: Table, amplitude: float, rng: np.random.Generator, harmonics: int = 4) -> Table:
    """Add seeded Fourier noise to harmonics 2..harmonics+1 (coefficient scale amplitude/k^2)"""
    size = max(table.base_x.size, 2 * (harmonics + 1) + 1)
    base_x = np.pad(table.base_x, (0, size - table.base_x.size))
    base_y = np.pad(table.base_y, (0, size - table.base_y.size))
    for k in range(2, harmonics + 2):
        scale = amplitude / k ** 2
        base_x[2 * k - 1: 2 * k + 1] += scale * rng.standard_normal(2)
        base_y[2 * k - 1: 2 * k + 1] += scale * rng.standard_normal(2)
    noisy_table = replace(table, base_x=base_x, base_y=base_y)
    require_valid(noisy_table)
    return noisy_table


# Evaluation

def _base_derivatives(table: Table, s: np.ndarray, order: int) -> np.ndarray:
    """sigma0 and its derivatives, shape (order+1, len(s), 2)"""
    out = np.zeros((order + 1, s.size, 2))
    out[0, :, 0] = table.base_x[0]
    out[0, :, 1] = table.base_y[0]
    if table.harmonics == 0:
        return out

    k = np.arange(1, table.harmonics + 1)
    omega = TWO_PI * k
    phase = np.outer(s, omega)
    c, sn = np.cos(phase), np.sin(phase)
    ax, bx = table.base_x[1::2], table.base_x[2::2]
    ay, by = table.base_y[1::2], table.base_y[2::2]

    # d^j/ds^j cos(wt) = w^j cos(wt + j pi/2), likewise for sin
    rotations = [(c, sn), (-sn, c), (-c, -sn), (sn, -c)]
    for j in range(order + 1):
        cos_j, sin_j = rotations[j % 4]
        scale = omega ** j
        out[j, :, 0] += cos_j @ (ax * scale) + sin_j @ (bx * scale)
        out[j, :, 1] += cos_j @ (ay * scale) + sin_j @ (by * scale)
    return out


def _base_normal_derivatives(base: np.ndarray, order: int) -> np.ndarray:
    """Derivatives of N0 = J sigma0' / |sigma0'| given sigma0 up to order+1"""
    n = base.shape[1]
    q = np.zeros((order + 1, n))
    for j in range(order + 1):
        for i in range(j + 1):
            q[j] += math.comb(j, i) * np.einsum("ij,ij->i", base[i + 1], base[j - i + 1])

    # g = q^(-1/2) by Faa di Bruno
    h = [q[0] ** -0.5, -0.5 * q[0] ** -1.5, 0.75 * q[0] ** -2.5,
         -1.875 * q[0] ** -3.5, 6.5625 * q[0] ** -4.5]
    g = np.zeros((order + 1, n))
    g[0] = h[0]
    if order >= 1:
        g[1] = h[1] * q[1]
    if order >= 2:
        g[2] = h[2] * q[1] ** 2 + h[1] * q[2]
    if order >= 3:
        g[3] = h[3] * q[1] ** 3 + 3.0 * h[2] * q[1] * q[2] + h[1] * q[3]
    if order >= 4:
        g[4] = (h[4] * q[1] ** 4 + 6.0 * h[3] * q[1] ** 2 * q[2]
                + h[2] * (3.0 * q[2] ** 2 + 4.0 * q[1] * q[3]) + h[1] * q[4])

    normals = np.zeros((order + 1, n, 2))
    for j in range(order + 1):
        tangent = np.zeros((n, 2))
        for i in range(j + 1):
            tangent += math.comb(j, i) * base[i + 1] * g[j - i][:, None]
        normals[j] = rotate_left(tangent)
    return normals


def _as_parameters(s: ArrayLike) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(s, dtype=float)
    return np.atleast_1d(arr).ravel(), arr.ndim == 0


def evaluate(table: Table, s: ArrayLike, order: int = 0) -> np.ndarray:
    """Point and parameter derivatives of the boundary.

    Returns shape (order+1, 2) for scalar s and (order+1, n, 2) for arrays.
    """
    if order > MAX_ORDER or order < 0:
        raise UnsupportedDerivativeError(f"Derivative order {order} not supported (max {MAX_ORDER})")
    params, scalar = _as_parameters(s)

    base = _base_derivatives(table, params, order + 1)
    result = base[:order + 1].copy()

    if table.bumps:
        offset = np.zeros((order + 1, params.size))
        for bump in table.bumps:
            offset += bump.offset(params, order)
        active = np.any(offset != 0.0, axis=0)
        if active.any():
            normals = _base_normal_derivatives(base[:, active, :], order)
            for j in range(order + 1):
                correction = np.zeros((int(active.sum()), 2))
                for i in range(j + 1):
                    correction += math.comb(j, i) * offset[i, active][:, None] * normals[j - i]
                result[j, active] += correction

    return result[:, 0, :] if scalar else result


def base_normal(table: Table, s: ArrayLike) -> np.ndarray:
    """Inward normal N0 of the unperturbed base curve"""
    params, scalar = _as_parameters(s)
    base = _base_derivatives(table, params, 1)
    normal = _base_normal_derivatives(base, 0)[0]
    return normal[0] if scalar else normal


@dataclass(frozen=True, eq=False)
class Frame:
    point: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: Union[float, np.ndarray]
    speed: Union[float, np.ndarray]


def frame(table: Table, s: ArrayLike) -> Frame:
    """Unit tangent, inward normal, signed curvature and speed at s"""
    d = evaluate(table, s, 2)
    d1, d2 = d[1], d[2]
    speed = np.linalg.norm(d1, axis=-1)
    tangent = d1 / np.asarray(speed)[..., None]
    curvature = cross(d1, d2) / speed ** 3
    if np.ndim(speed) == 0:
        speed, curvature = float(speed), float(curvature)
    return Frame(point=d[0], tangent=tangent, normal=rotate_left(tangent),
                 curvature=curvature, speed=speed)


@dataclass(frozen=True)
class TubularCoords:
    s: float
    w: float


def tubular(table: Table, p: Sequence[float]) -> TubularCoords:
    """Nearest boundary parameter and signed distance (positive inside)"""
    p = np.asarray(p, dtype=float)
    distances = np.sum((table.sample_points - p) ** 2, axis=1)
    seed = table.samples[int(np.argmin(distances))]
    step = 1.0 / table.grid

    def stationarity(s: float) -> float:
        d = evaluate(table, s, 1)
        return float(np.dot(p - d[0], d[1]))

    s_star = None
    for width in (1, 2, 4, 8, 16):
        a, b = seed - width * step, seed + width * step
        ga, gb = stationarity(a), stationarity(b)
        if ga == 0.0:
            s_star = a
            break
        if ga * gb < 0.0:
            try:
                s_star = brentq(stationarity, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                maxiter=settings.PROJECTION_MAX_ITER)
            except RuntimeError as e:
                logger.error(f"Projection of {p.tolist()} failed: {e}")
                raise ProjectionError(f"Projection of {p.tolist()} did not converge") from e
            break

    if s_star is None:
        # flat stationarity: the point sits at a centre of curvature
        speed = float(np.linalg.norm(evaluate(table, seed, 1)[1]))
        if abs(stationarity(seed)) > 1e-10 * speed * max(1.0, table.diameter):
            logger.error(f"Projection of {p.tolist()} found no bracket near s={seed}")
            raise ProjectionError(f"Projection of {p.tolist()} did not converge")
        s_star = seed

    f = frame(table, s_star)
    w = float(np.dot(p - f.point, f.normal))
    return TubularCoords(s=float(s_star % 1.0), w=w)


# Validation

@dataclass(frozen=True)
class ValidationFailure:
    invariant: str
    s: float
    value: float


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    min_curvature: float
    min_curvature_s: float
    min_speed: float
    min_speed_s: float
    turning_number: int
    signed_area: float
    failures: Tuple[ValidationFailure, ...] = ()


def validate(table: Table) -> ValidationReport:
    """Check strict convexity, regularity, simplicity and orientation on the grid"""
    s = table.samples
    d = evaluate(table, s, 2)
    speed = np.linalg.norm(d[1], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = cross(d[1], d[2]) / speed ** 3
    kappa = np.where(np.isfinite(kappa), kappa, -np.inf)

    failures: List[ValidationFailure] = []
    i_kappa = int(np.argmin(kappa))
    i_speed = int(np.argmin(speed))
    if kappa[i_kappa] <= 0.0:
        failures.append(ValidationFailure("curvature", float(s[i_kappa]), float(kappa[i_kappa])))
    if speed[i_speed] <= 0.0:
        failures.append(ValidationFailure("speed", float(s[i_speed]), float(speed[i_speed])))

    pts = d[0]
    nxt = np.roll(pts, -1, axis=0)
    area = 0.5 * float(np.sum(pts[:, 0] * nxt[:, 1] - nxt[:, 0] * pts[:, 1]))
    if area <= 0.0:
        failures.append(ValidationFailure("orientation", 0.0, area))

    # A polygon whose turns are all left and sum to one revolution is simple
    edges = nxt - pts
    following = np.roll(edges, -1, axis=0)
    turns = np.arctan2(cross(edges, following), np.einsum("ij,ij->i", edges, following))
    turning_number = int(round(float(np.sum(turns)) / TWO_PI))
    i_turn = int(np.argmin(turns))
    if turns[i_turn] <= 0.0:
        failures.append(ValidationFailure("simplicity", float(s[(i_turn + 1) % s.size]), float(turns[i_turn])))
    if turning_number != 1:
        failures.append(ValidationFailure("turning_number", 0.0, float(turning_number)))

    report = ValidationReport(
        valid=not failures,
        min_curvature=float(kappa[i_kappa]),
        min_curvature_s=float(s[i_kappa]),
        min_speed=float(speed[i_speed]),
        min_speed_s=float(s[i_speed]),
        turning_number=turning_number,
        signed_area=area,
        failures=tuple(failures),
    )
    if not report.valid:
        logger.debug(f"Table failed validation: {[f.invariant for f in failures]}")
    return report


def require_valid(table: Table) -> ValidationReport:
    report = validate(table)
    if not report.valid:
        worst = report.failures[0]
        logger.error(f"Invalid table: {worst.invariant} fails at s={worst.s:.6f} ({worst.value:.6g})")
        raise InvalidTableError(f"Table fails {worst.invariant} at s={worst.s:.6f}", report=report)
    return report


# Distances

def _constant_speed_jets(table: Table, n: int, k: int) -> np.ndarray:
    """Constant-speed reparametrization f(lambda), lambda = i/n, with derivatives up to k"""
    fine = n * settings.ARCLENGTH_OVERSAMPLING
    sf = np.arange(fine + 1) / fine
    speeds = np.linalg.norm(evaluate(table, sf, 1)[1], axis=1)
    arclength = np.concatenate([[0.0], np.cumsum(0.5 * (speeds[1:] + speeds[:-1]) / fine)])
    total = arclength[-1]
    s_of = np.interp(np.arange(n) / n * total, arclength, sf)

    d = evaluate(table, s_of, max(k, 1))
    jets = np.zeros((k + 1, n, 2))
    jets[0] = d[0]
    if k >= 1:
        speed = np.linalg.norm(d[1], axis=1)[:, None]
        jets[1] = total * d[1] / speed
    if k >= 2:
        inner = np.einsum("ij,ij->i", d[1], d[2])[:, None]
        jets[2] = total ** 2 * (d[2] / speed ** 2 - d[1] * inner / speed ** 4)
    return jets


def ck_distance(a: Table, b: Table, k: int = 2, grid: Optional[int] = None) -> float:
    """C^k distance between constant-speed parametrizations, minimized over basepoint shifts"""
    if k not in (0, 1, 2):
        raise UnsupportedDerivativeError(f"ck_distance supports k <= 2, got {k}")
    n = grid or settings.VALIDATION_GRID
    fa = _constant_speed_jets(a, n, k)
    fb = _constant_speed_jets(b, n, k)

    def deviation(shift: int) -> float:
        return float(np.max(np.linalg.norm(fa - np.roll(fb, -shift, axis=1), axis=2)))

    stride = max(1, n // 256)
    coarse = {shift: deviation(shift) for shift in range(0, n, stride)}
    if stride == 1:
        return min(coarse.values())

    best = sorted(coarse, key=coarse.get)[:3]
    refined = dict(coarse)
    for centre in best:
        for shift in range(centre - stride + 1, centre + stride):
            shift %= n
            if shift not in refined:
                refined[shift] = deviation(shift)
    return min(refined.values())
