"""Arithmetic and coarse geometry of Sol = R x| R^2.

Coordinates are ``(z, x, y)`` with product

    (z, x, y)(z', x', y') = (z + z', x + e^{-z} x', y + e^{z} y').

Only the sandwich bounds of the Riemannian distance are exposed; the exact
distance off the coordinate axes needs geodesic shooting and is never used.
"""
from __future__ import annotations

import enum
import math
from typing import NamedTuple

import numpy as np

from .errors import DegenerateInputError, NumericRangeError

# |z| below this is treated as the removable singularity of g^t.
Z_EPS = 1e-12
FIXED_POINT_TOL = 1e-9


class SolElement(NamedTuple):
    z: float
    x: float
    y: float


IDENTITY = SolElement(0.0, 0.0, 0.0)


class BoundarySide(enum.Enum):
    PLUS = "plus"    # the x-line, hit when the drift is positive
    MINUS = "minus"  # the y-line, hit when the drift is negative

    @classmethod
    def for_drift(cls, alpha: float) -> "BoundarySide":
        return cls.PLUS if alpha > 0 else cls.MINUS


def _checked(z, x, y) -> SolElement:
    if not (math.isfinite(z) and math.isfinite(x) and math.isfinite(y)):
        raise NumericRangeError(f"non-finite Sol coordinates ({z}, {x}, {y})")
    return SolElement(z, x, y)


def multiply(a: SolElement, b: SolElement) -> SolElement:
    try:
        return _checked(a.z + b.z, a.x + math.exp(-a.z) * b.x, a.y + math.exp(a.z) * b.y)
    except OverflowError as exc:
        raise NumericRangeError(str(exc)) from exc


def inverse(g: SolElement) -> SolElement:
    try:
        return _checked(-g.z, -math.exp(g.z) * g.x, -math.exp(-g.z) * g.y)
    except OverflowError as exc:
        raise NumericRangeError(str(exc)) from exc


def multiply_fold(elements) -> SolElement:
    out = IDENTITY
    for g in elements:
        out = multiply(out, g)
    return out


def real_power(g: SolElement, t: float) -> SolElement:
    """The one-parameter subgroup through ``g``, evaluated at time ``t``.

    For ``g.z = 0`` the formula has a removable singularity and the limit
    ``(0, t x, t y)`` is used.
    """
    if abs(g.z) < Z_EPS:
        return SolElement(t * g.z, t * g.x, t * g.y)
    # (e^{-tz}-1)/(e^{-z}-1) written with expm1 so small z stays accurate
    cx = math.expm1(-t * g.z) / math.expm1(-g.z)
    cy = math.expm1(t * g.z) / math.expm1(g.z)
    return _checked(t * g.z, g.x * cx, g.y * cy)


def axis_distance(x: float) -> float:
    """Exact distance from the identity to ``(0, x, 0)`` (or ``(0, 0, x)``)."""
    return 2.0 * math.asinh(abs(x) / 2.0)


def _log_norm(x: float, y: float) -> float:
    n = math.hypot(x, y)
    return math.log(n) if n > 0 else -math.inf


def distance_bounds(g: SolElement) -> tuple[float, float]:
    """Lower and upper bounds on ``d(id, g)``.

    Upper bound is the smaller of ``|z| + 4 log(|(x,y)| + 1)`` (from
    ``g = (0,x,y)(z,0,0)``) and ``d(id,(0,x,0)) + |z| + d(id,(0,0,e^{-z}y))``
    (from ``g = (0,x,0)(z,0,0)(0,0,e^{-z}y)``); the mirrored factorisation
    is also tried. Lower bound is ``max(|z|, 2 log(|(x,y)|/4 + 1/2) - |z|)``.
    """
    return distance_bounds_from_logs(g.z, _log_abs(g.x), _log_abs(g.y))


def _log_abs(v: float) -> float:
    return math.log(abs(v)) if v != 0 else -math.inf


def _axis_from_log(log_abs: float) -> float:
    # 2 asinh(e^L / 2) without overflow for huge L
    if log_abs == -math.inf:
        return 0.0
    if log_abs < 30:
        return 2.0 * math.asinh(math.exp(log_abs) / 2.0)
    return 2.0 * log_abs + 2.0 * math.log1p(math.exp(-2.0 * log_abs))


def distance_bounds_from_logs(z: float, log_abs_x: float, log_abs_y: float) -> tuple[float, float]:
    """Same bounds as :func:`distance_bounds`, from ``log|x|`` and ``log|y|``.

    Walk positions with large drift have horizontal coordinates far outside
    double range; their logarithms are not.
    """
    az = abs(z)
    log_norm = np.logaddexp(2 * log_abs_x, 2 * log_abs_y) / 2 if (
        log_abs_x > -math.inf or log_abs_y > -math.inf) else -math.inf
    if log_norm == -math.inf:
        return az, az
    up_plain = az + 4.0 * float(np.logaddexp(log_norm, 0.0))
    up_x_first = _axis_from_log(log_abs_x) + az + _axis_from_log(log_abs_y - z)
    up_y_first = _axis_from_log(log_abs_y) + az + _axis_from_log(log_abs_x + z)
    upper = min(up_plain, up_x_first, up_y_first)
    horizontal = 2.0 * float(np.logaddexp(log_norm - math.log(4.0), -math.log(2.0)))
    lower = max(az, horizontal - az)
    return lower, upper


def boundary_action(g: SolElement, xi: float, side: BoundarySide) -> float:
    if side is BoundarySide.PLUS:
        return g.x + math.exp(-g.z) * xi
    return g.y + math.exp(g.z) * xi


def fixed_point(g: SolElement, side: BoundarySide) -> float:
    """The point of the boundary line fixed by ``g`` (``p^+`` or ``p^-``)."""
    if abs(g.z) < Z_EPS:
        raise DegenerateInputError("fixed point undefined for vertical coordinate 0")
    if side is BoundarySide.PLUS:
        return g.x / -math.expm1(-g.z)
    return g.y / -math.expm1(g.z)


def is_proper_pair(g: SolElement, h: SolElement, side: BoundarySide) -> bool:
    """Sufficient test that <g, h> acts properly on the chosen boundary line."""
    pg = fixed_point(g, side)
    ph = fixed_point(h, side)
    return abs(pg - ph) > FIXED_POINT_TOL * max(1.0, abs(pg), abs(ph))
