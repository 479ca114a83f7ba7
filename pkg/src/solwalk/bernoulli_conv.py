"""Bernoulli convolutions b_lambda: law of sum_{j>=0} +-lambda^j with fair signs.

``b_lambda^(t) = prod_{k>=0} cos(t lambda^k)``. When ``lambda^m = 1/2`` the
product regroups into ``m`` interleaved copies of the ``lambda = 1/2`` case,
each equal to ``sin(2u)/(2u)``; this gives closed forms and decay bounds.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NotPisotError, ValidationError
from .harmonic_analysis import FourierEvaluation
from .step_measure import certify_inverse


@dataclass(frozen=True)
class BernoulliParam:
    lam: float

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ValidationError(f"lambda must lie in (0, 1), got {self.lam}")


def _param(lam) -> float:
    return BernoulliParam(float(lam)).lam


def terms_needed(lam: float, eps: float) -> int:
    """Smallest ``K`` with ``lambda^{K+1} / (1 - lambda) <= eps``."""
    lam = _param(lam)
    if not eps > 0:
        raise ValidationError("eps must be positive")
    K = max(0, math.ceil(math.log(eps * (1 - lam)) / math.log(lam)) - 1)
    while lam ** (K + 1) / (1 - lam) > eps:
        K += 1
    return K


def sample_b_batch(lam: float, N: int, rng: np.random.Generator, eps: float = 1e-12,
                   chunk: int = 1 << 16) -> np.ndarray:
    """``N`` samples of ``sum_{j<=K} s_j lambda^j`` with tail at most ``eps``."""
    K = terms_needed(lam, eps)
    powers = lam ** np.arange(K + 1)
    out = np.empty(N)
    for start in range(0, N, chunk):
        n = min(chunk, N - start)
        signs = rng.integers(0, 2, size=(n, K + 1), dtype=np.int8) * 2 - 1
        out[start:start + n] = signs @ powers
    return out


def sample_b(lam: float, rng: np.random.Generator, eps: float = 1e-12) -> float:
    return float(sample_b_batch(lam, 1, rng, eps)[0])


def ft_terms_needed(lam: float, t: float, eps: float) -> int:
    """Smallest ``K`` with ``t^2 lambda^{2(K+1)} / (2 (1 - lambda^2)) <= eps``."""
    lam = _param(lam)
    if not eps > 0:
        raise ValidationError("eps must be positive")
    if t == 0:
        return 0
    need = t * t / (2 * (1 - lam * lam) * eps)
    if need <= 1:
        return 0
    K = max(0, math.ceil(math.log(need) / (-2 * math.log(lam))) - 1)
    while t * t * lam ** (2 * (K + 1)) / (2 * (1 - lam * lam)) > eps:
        K += 1
    return K


def ft_bernoulli(lam: float, t, eps: float = 1e-12) -> FourierEvaluation:
    """Truncated product ``prod_{k<=K} cos(t lambda^k)`` with error at most ``eps``.

    Each omitted factor lies in ``[1 - u^2/2, 1]``, so the omitted product
    differs from 1 by at most ``sum_{k>K} t^2 lambda^{2k} / 2``.
    """
    lam = _param(lam)
    ts = np.asarray(t, dtype=float)
    flat = np.atleast_1d(ts)
    tmax = float(np.max(np.abs(flat))) if flat.size else 0.0
    K = ft_terms_needed(lam, tmax, eps)
    powers = lam ** np.arange(K + 1)
    value = np.prod(np.cos(np.multiply.outer(flat, powers)), axis=1)
    trunc = flat ** 2 * lam ** (2 * (K + 1)) / (2 * (1 - lam * lam))
    return FourierEvaluation(ts, value.reshape(ts.shape), 0.0, trunc.reshape(ts.shape))


def support_interval(lam: float) -> tuple[float, float]:
    lam = _param(lam)
    return (-1.0 / (1.0 - lam), 1.0 / (1.0 - lam))


def half_power_index(lam: float, tol: float = 1e-12) -> int | None:
    """``m`` with ``lambda^m = 1/2``, if there is one."""
    m = round(math.log(0.5) / math.log(_param(lam)))
    if m >= 1 and abs(lam ** m - 0.5) <= tol:
        return m
    return None


def sinc_product(lam: float, t) -> np.ndarray:
    """Closed form ``prod_{j<m} sin(2 t lambda^j) / (2 t lambda^j)`` for ``lambda^m = 1/2``."""
    m = half_power_index(lam)
    if m is None:
        raise ValidationError("closed form needs lambda^m = 1/2")
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    for j in range(m):
        out = out * np.sinc(2 * t * lam ** j / math.pi)
    return out


def decay_bound(lam: float, t) -> np.ndarray:
    """``prod_{j<m} min(1, 1/(2 t lambda^j))``, a bound on ``|b^(t)|`` when ``lambda^m = 1/2``."""
    m = half_power_index(lam)
    if m is None:
        raise ValidationError("decay bound needs lambda^m = 1/2")
    t = np.abs(np.asarray(t, dtype=float))
    out = np.ones_like(t)
    with np.errstate(divide="ignore"):
        for j in range(m):
            out = out * np.minimum(1.0, 1.0 / (2 * t * lam ** j))
    return out


@dataclass
class DensityEstimate:
    grid: np.ndarray
    values: np.ndarray
    cutoff: float
    step: float
    heuristic: bool
    pisot_warning: bool = False

    def to_json(self) -> dict:
        return {"grid": self.grid.tolist(), "values": self.values.tolist(), "cutoff": self.cutoff,
                "step": self.step, "heuristic": self.heuristic, "pisot_warning": self.pisot_warning}


def _cutoff(lam: float, eps: float) -> tuple[float, bool]:
    m = half_power_index(lam)
    if m is not None and m >= 2:
        # (1/pi) int_T^inf C t^-m dt <= eps with C = prod_j 1/(2 lambda^j)
        C = math.prod(1.0 / (2 * lam ** j) for j in range(m))
        T = (C / (math.pi * (m - 1) * eps)) ** (1.0 / (m - 1))
        return max(T, 2 * math.pi), False
    if m == 1:
        # sin(2t)/(2t) is only conditionally integrable; the tail oscillates like 1/T
        return 1.0 / eps, False
    # no certified decay: borrow the bound of the nearest lambda^m = 1/2 below
    m = max(1, math.floor(math.log(0.5) / math.log(lam)))
    if m == 1:
        return 1.0 / eps, True
    lam_m = 0.5 ** (1.0 / m)
    C = math.prod(1.0 / (2 * lam_m ** j) for j in range(m))
    return max((C / (math.pi * (m - 1) * eps)) ** (1.0 / (m - 1)), 2 * math.pi), True


def density_estimate(lam: float, grid, eps: float = 1e-3, chunk: int = 256) -> DensityEstimate:
    """Fourier inversion ``f(x) = (1/pi) int_0^T b^(t) cos(t x) dt`` by the trapezoid rule.

    The step ``h`` keeps the aliasing period ``2 pi / h`` above twice the
    largest |x| plus the support radius, so periodic images do not reach the grid.
    """
    lam = _param(lam)
    if lam < 0.5:
        raise ValidationError("density estimates need lambda >= 1/2")
    pisot = False
    try:
        cert = certify_inverse(lam)
        if cert.degree >= 2:
            pisot = True
            warnings.warn(f"1/lambda = {cert.alpha} is a Pisot number; b_lambda has no density",
                          RuntimeWarning, stacklevel=2)
    except NotPisotError:
        pass
    grid = np.asarray(grid, dtype=float)
    T, heuristic = _cutoff(lam, eps)
    R = 1.0 / (1.0 - lam)
    reach = R + float(np.max(np.abs(grid))) if grid.size else R
    h = math.pi / (2 * reach)
    n = int(math.ceil(T / h))
    ts = np.arange(n + 1) * h
    ft = ft_bernoulli(lam, ts, eps=min(eps, 1e-12)).value
    weights = np.full(n + 1, h)
    weights[0] = weights[-1] = h / 2
    coef = weights * ft / math.pi
    values = np.empty(grid.size)
    for start in range(0, grid.size, chunk):
        g = grid.ravel()[start:start + chunk]
        values[start:start + g.size] = np.cos(np.multiply.outer(g, ts)) @ coef
    return DensityEstimate(grid, values.reshape(grid.shape), T, h, heuristic, pisot)
