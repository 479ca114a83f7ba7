"""The vertical projection S_n of the walk: drift, returns, occupation times.

Levels are integers (units of the lattice step ``gamma``) wherever occupation
counts are involved. The Lundberg exponent ``theta*`` of ``mu_z`` bounds the
chance of ever dropping ``D`` below the current position by ``exp(-theta* D)``;
that bound turns almost-sure statements into stopping rules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ValidationError, ZeroDriftError


def _as_pairs(mu_z):
    pairs = [(float(z), float(w)) for z, w in mu_z]
    if not pairs or any(w <= 0 for _, w in pairs):
        raise ValidationError("mu_z needs positive weights")
    return pairs


def mean(mu_z) -> float:
    return math.fsum(z * w for z, w in _as_pairs(mu_z))


def laplace(mu_z, theta: float) -> float:
    """``phi(theta) = sum w exp(-theta z)``."""
    return math.fsum(w * math.exp(-theta * z) for z, w in _as_pairs(mu_z))


def lundberg_exponent(mu_z) -> float:
    """Positive root of ``phi(theta) = 1``; ``inf`` when mu_z has no negative atom."""
    pairs = _as_pairs(mu_z)
    alpha = mean(pairs)
    if alpha <= 0:
        raise ZeroDriftError(f"Lundberg exponent needs positive drift, got {alpha}")
    zmin = min(z for z, _ in pairs)
    if zmin >= 0:
        return math.inf
    f = lambda th: laplace(pairs, th) - 1.0
    hi = 1.0
    while f(hi) <= 0:
        hi *= 2.0
    # phi is convex with phi(0) = 1 and phi'(0) = -alpha < 0, so f < 0 just right of 0
    lo = hi / 2.0
    while f(lo) > 0:
        lo /= 2.0
    return brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


@dataclass(frozen=True)
class TruncationPolicy:
    """Stop a path once it sits ``margin`` levels above the highest level of interest.

    With ``margin >= log(1/delta) / (theta* gamma)`` the walk returns below
    that level again with probability at most ``delta``.
    """
    delta: float
    margin: int   # in lattice levels

    @classmethod
    def for_levels(cls, levels, delta: float, gamma: float = 1.0) -> "TruncationPolicy":
        if not 0 < delta < 1:
            raise ValidationError("delta must lie in (0, 1)")
        theta = lundberg_exponent([(k * gamma, w) for k, w in levels])
        if math.isinf(theta):
            return cls(delta, 0)
        return cls(delta, int(math.ceil(math.log(1.0 / delta) / (theta * gamma))))


@dataclass(frozen=True)
class VerticalWalkStats:
    alpha: float
    theta_star: float
    p_ret: float
    M: float
    p_ret_stderr: float = 0.0
    method: str = "exact2atom"

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "theta_star": None if math.isinf(self.theta_star) else self.theta_star,
            "p_ret": self.p_ret,
            "p_ret_stderr": self.p_ret_stderr,
            "M": self.M,
            "method": self.method,
        }


def _levels(mu_z):
    levels = [(int(k), float(w)) for k, w in mu_z]
    if any(w <= 0 for _, w in levels):
        raise ValidationError("weights must be positive")
    total = sum(w for _, w in levels)
    if abs(total - 1) > 1e-9:
        raise ValidationError(f"weights sum to {total}")
    return levels


class _Stepper:
    """Draw integer increments of ``mu_z`` for a batch of paths."""

    def __init__(self, levels):
        self.steps = np.array([k for k, _ in levels], dtype=np.int64)
        cum = np.cumsum([w for _, w in levels])
        cum[-1] = 1.0
        self.cum = cum

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.steps[np.searchsorted(self.cum, rng.random(n), side="right")]


def return_probability(mu_z, method: str = "exact2atom", n_paths: int = 100_000,
                       seed: int = 0, delta: float = 1e-6) -> VerticalWalkStats:
    """Probability that the vertical walk revisits 0, and ``M = 1/(1 - p_ret)``.

    ``mu_z`` is a list of ``(level, weight)`` with integer levels.
    ``exact2atom`` covers ``p d_1 + (1-p) d_-1`` (any common scale);
    ``montecarlo`` counts a path that climbs the truncation margin above 0
    (or below, for negative drift) without returning as non-returning,
    a bias of at most ``delta``.
    """
    levels = _levels(mu_z)
    alpha = sum(k * w for k, w in levels)
    if alpha == 0:
        raise ZeroDriftError("return probability needs non-zero drift")
    if alpha < 0:
        flipped = [(-k, w) for k, w in levels]
        stats = return_probability(flipped, method, n_paths, seed, delta)
        return VerticalWalkStats(alpha, stats.theta_star, stats.p_ret, stats.M,
                                 stats.p_ret_stderr, stats.method)
    theta = lundberg_exponent(levels)
    if method == "exact2atom":
        ks = sorted(k for k, _ in levels)
        if len(levels) != 2 or ks[0] != -ks[1]:
            raise ValidationError("exact2atom needs mu_z = p d_a + (1-p) d_-a")
        p = dict(levels)[ks[1]]
        p_ret = 1.0 - abs(2.0 * p - 1.0)
        return VerticalWalkStats(alpha, theta, p_ret, 1.0 / (1.0 - p_ret), 0.0, "exact2atom")
    if method != "montecarlo":
        raise ValidationError(f"unknown method {method!r}")
    policy = TruncationPolicy.for_levels(levels, delta)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    stepper = _Stepper(levels)
    pos = np.zeros(n_paths, dtype=np.int64)
    active = np.arange(n_paths)
    returned = np.zeros(n_paths, dtype=bool)
    top = max(policy.margin, max(k for k, _ in levels))
    while active.size:
        pos[active] += stepper.draw(rng, active.size)
        hit = pos[active] == 0
        returned[active[hit]] = True
        escaped = pos[active] >= top
        active = active[~(hit | escaped)]
    p_ret = float(returned.mean())
    err = math.sqrt(max(p_ret * (1 - p_ret), 1e-300) / n_paths)
    return VerticalWalkStats(alpha, theta, p_ret, 1.0 / (1.0 - p_ret), err, "montecarlo")


@dataclass
class OccupationProfile:
    """Occupation counts ``n(zeta, k) = #{j >= 1 : S_{j-1} = k}`` for a batch of paths.

    ``counts[i, k - kmin]`` covers levels ``kmin..kmax``; counts at levels above
    ``kmax`` are discarded. ``path_min`` is each path's lowest level.
    """
    counts: np.ndarray
    kmin: int
    kmax: int
    path_min: np.ndarray
    steps: np.ndarray
    policy: TruncationPolicy

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.kmin, self.kmax + 1)

    def as_dicts(self) -> list[dict]:
        return [{int(k): int(c) for k, c in zip(self.levels, row) if c} for row in self.counts]


def occupation_matrix(mu_z, n_paths: int, rng: np.random.Generator, kmax: int,
                      delta: float = 1e-6, kmin: int | None = None,
                      max_steps: int = 10**8) -> OccupationProfile:
    """Simulate ``n_paths`` vertical paths from 0 and record occupation counts.

    A path stops once it exceeds ``kmax + margin``; by then its counts at
    levels ``<= kmax`` are final with probability ``>= 1 - delta``.
    With ``kmin=None`` every level a path visits below 0 is kept.
    """
    levels = _levels(mu_z)
    if sum(k * w for k, w in levels) <= 0:
        raise ZeroDriftError("occupation counts need positive drift")
    policy = TruncationPolicy.for_levels(levels, delta)
    stepper = _Stepper(levels)
    stop = kmax + policy.margin + 1
    lo = kmin if kmin is not None else min(0, kmax)
    width = kmax - lo + 1
    counts = np.zeros((n_paths, width), dtype=np.int32)
    pos = np.zeros(n_paths, dtype=np.int64)
    path_min = np.zeros(n_paths, dtype=np.int64)
    steps = np.zeros(n_paths, dtype=np.int64)
    active = np.arange(n_paths)
    n = 0
    while active.size:
        p = pos[active]
        if kmin is None and p.min() < lo:
            extra = lo - int(p.min())
            counts = np.pad(counts, ((0, 0), (extra, 0)))
            lo -= extra
            width += extra
        inside = (p >= lo) & (p <= kmax)
        counts[active[inside], p[inside] - lo] += 1
        pos[active] = p + stepper.draw(rng, active.size)
        np.minimum(path_min, pos, out=path_min)
        steps[active] += 1
        n += 1
        if n > max_steps:
            raise ArithmeticError("occupation simulation exceeded the step cap")
        active = active[pos[active] < stop]
    return OccupationProfile(counts, lo, kmax, path_min, steps, policy)


def occupation_counts(mu_z, rng: np.random.Generator, level_range: tuple[int, int],
                      delta: float = 1e-6) -> dict[int, int]:
    """One path's occupation profile on ``level_range`` (inclusive)."""
    lo, hi = level_range
    prof = occupation_matrix(mu_z, 1, rng, hi, delta, kmin=lo)
    return {int(k): int(c) for k, c in zip(prof.levels, prof.counts[0])}
