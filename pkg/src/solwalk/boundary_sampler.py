"""Monte Carlo sampling of the boundary point xi = sum_j x_j exp(-S_{j-1}).

Stopping rule
-------------
After ``n`` steps the remainder is ``exp(-S_n) * R`` with ``R`` distributed
like a fresh series. For ``0 < s <= 1`` with ``phi(s) = E exp(-s z) < 1``,
subadditivity of ``t -> t^s`` gives ``E|R|^s <= x_max^s / (1 - phi(s))``, so
Markov's inequality makes ``P(|tail| > eps | F_n) <= delta`` as soon as

    S_n >= log(x_max / eps) + log(1 / ((1 - phi(s)) delta)) / s.

The threshold is a constant, so the stopping time is a first passage time.
When every vertical step is positive the tail is bounded deterministically
by ``x_max exp(-S_n) / (1 - exp(-z_min))`` and ``delta`` plays no role.

Negative drift is handled by the automorphism ``(z, x, y) -> (-z, y, x)``,
which exchanges the two boundary lines.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import NonConvergenceError, NumericRangeError, ValidationError, ZeroDriftError
from .sol_group import BoundarySide, SolElement, distance_bounds_from_logs, multiply
from .step_measure import StepMeasure, drift
from .vertical_walk import laplace, lundberg_exponent

BLOCK_SIZE = 1 << 15       # samples per PRNG stream; fixes results independently of threads
CHUNK_STEPS = 32           # steps simulated per vectorised pass
STEP_CAP = 10**8
MAX_CAP_FRACTION = 1e-3


@dataclass(frozen=True)
class WalkState:
    n: int = 0
    S: float = 0.0
    U: float = 0.0
    V: float = 0.0

    def as_element(self) -> SolElement:
        return SolElement(self.S, self.U, self.V)


def step(state: WalkState, increment: SolElement) -> WalkState:
    """``W_n = W_{n-1} X_n`` in (S, U, V) coordinates."""
    try:
        return WalkState(state.n + 1, state.S + increment.z,
                         state.U + increment.x * math.exp(-state.S),
                         state.V + increment.y * math.exp(state.S))
    except OverflowError as exc:
        from .errors import NumericRangeError
        raise NumericRangeError(str(exc)) from exc


@dataclass(frozen=True)
class StoppingRule:
    side: BoundarySide
    level: float            # stop at the first n with S_n >= level (walk coordinates)
    eps: float
    delta: float
    x_max: float
    s: float | None         # moment exponent; None for the deterministic bound
    phi_s: float | None

    @property
    def confidence(self) -> float:
        return 1.0 if self.s is None else 1.0 - self.delta

    def to_json(self) -> dict:
        return {"side": self.side.value, "level": self.level, "eps": self.eps, "delta": self.delta,
                "x_max": self.x_max, "s": self.s, "phi_s": self.phi_s}


@dataclass(frozen=True)
class BoundarySample:
    xi: float
    err_bound: float
    err_confidence: float
    steps: int
    side: BoundarySide


@dataclass
class EmpiricalMeasure:
    """Sorted boundary samples plus provenance."""
    samples: np.ndarray
    seed: int | None = None
    eps: float = 0.0
    delta: float = 0.0
    side: BoundarySide = BoundarySide.PLUS
    mean_steps: float = 0.0
    max_steps: int = 0
    cap_failures: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.sort(np.asarray(self.samples, dtype=float))
        if self.samples.size < 1:
            raise ValidationError("empirical measure needs at least one sample")

    @property
    def N(self) -> int:
        return int(self.samples.size)

    @property
    def max_err(self) -> float:
        return self.eps

    def describe(self) -> dict:
        return {"N": self.N, "seed": self.seed, "eps": self.eps, "delta": self.delta,
                "side": self.side.value, "mean_steps": self.mean_steps,
                "max_steps": self.max_steps, "cap_failures": self.cap_failures, **self.meta}


def walk_measure(mu: StepMeasure) -> tuple[StepMeasure, BoundarySide]:
    """The measure in positive-drift coordinates and the side it lands on."""
    alpha = drift(mu)
    if alpha == 0 or abs(alpha) < 1e-15:
        raise ZeroDriftError("boundary sampling needs non-zero vertical drift")
    if alpha > 0:
        return mu, BoundarySide.PLUS
    return mu.mirrored(), BoundarySide.MINUS


def stopping_rule(mu: StepMeasure, eps: float, delta: float, s: float | None = None) -> StoppingRule:
    if not eps > 0:
        raise ValidationError("eps must be positive")
    if not 0 < delta < 1:
        raise ValidationError("delta must lie in (0, 1)")
    wm, side = walk_measure(mu)
    x_max = float(np.max(np.abs(wm.x)))
    if x_max == 0:
        return StoppingRule(side, -math.inf, eps, delta, 0.0, None, None)
    zmin = float(wm.z.min())
    if zmin > 0:
        level = math.log(x_max / (-math.expm1(-zmin) * eps))
        return StoppingRule(side, level, eps, delta, x_max, None, None)
    mu_z = list(zip(wm.z, wm.w))
    if s is None:
        s = min(1.0, lundberg_exponent(mu_z) / 2.0)
    phi_s = laplace(mu_z, s)
    if not phi_s < 1:
        raise ValidationError(f"moment exponent s={s} gives phi(s)={phi_s} >= 1")
    level = math.log(x_max / eps) + math.log(1.0 / ((1.0 - phi_s) * delta)) / s
    return StoppingRule(side, level, eps, delta, x_max, s, phi_s)


class _AtomTable:
    def __init__(self, wm: StepMeasure):
        self.z = wm.z
        self.x = wm.x
        self.y = wm.y
        cum = np.cumsum(wm.w)
        cum[-1] = 1.0
        self.cum = cum

    def draw(self, rng, shape):
        return np.searchsorted(self.cum, rng.random(shape), side="right")


def _simulate(table: _AtomTable, rule: StoppingRule, n: int, rng: np.random.Generator,
              cap: int | None = None):
    """Run ``n`` walks to the stopping level. Returns (xi, steps, capped)."""
    cap = STEP_CAP if cap is None else cap
    xi = np.zeros(n)
    steps = np.zeros(n, dtype=np.int64)
    capped = np.zeros(n, dtype=bool)
    if rule.x_max == 0:
        # the series is identically zero; one step certifies it
        steps[:] = 1
        return xi, steps, capped
    S = np.zeros(n)
    U = np.zeros(n)
    pending = np.arange(n)
    done_steps = 0
    while pending.size:
        m = CHUNK_STEPS
        idx = table.draw(rng, (pending.size, m))
        z = table.z[idx]
        x = table.x[idx]
        Scum = np.cumsum(z, axis=1)
        Scum += S[pending, None]
        Sprev = np.empty_like(Scum)
        Sprev[:, 0] = S[pending]
        Sprev[:, 1:] = Scum[:, :-1]
        Ucum = np.cumsum(x * np.exp(-Sprev), axis=1)
        Ucum += U[pending, None]
        hit = Scum >= rule.level
        has = hit.any(axis=1)
        first = hit.argmax(axis=1)
        fin = pending[has]
        xi[fin] = Ucum[has, first[has]]
        steps[fin] = done_steps + first[has] + 1
        rest = ~has
        S[pending[rest]] = Scum[rest, -1]
        U[pending[rest]] = Ucum[rest, -1]
        pending = pending[rest]
        done_steps += m
        if done_steps >= cap and pending.size:
            xi[pending] = U[pending]
            steps[pending] = done_steps
            capped[pending] = True
            break
    return xi, steps, capped


def block_rng(seed: int, index: int) -> np.random.Generator:
    """PRNG stream for block ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def sample_xi(mu: StepMeasure, rng: np.random.Generator, eps: float = 1e-6,
              delta: float = 1e-6, s: float | None = None) -> BoundarySample:
    rule = stopping_rule(mu, eps, delta, s)
    wm, side = walk_measure(mu)
    xi, steps, capped = _simulate(_AtomTable(wm), rule, 1, rng)
    if capped[0]:
        raise NonConvergenceError(f"walk hit the {STEP_CAP}-step cap")
    err = 0.0 if rule.x_max == 0 else eps
    return BoundarySample(float(xi[0]), err, rule.confidence, int(steps[0]), side)


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def sample_batch(mu: StepMeasure, N: int, seed: int, eps: float = 1e-6, delta: float = 1e-6,
                 threads: int | None = None, s: float | None = None,
                 block_size: int = BLOCK_SIZE) -> EmpiricalMeasure:
    """``N`` independent boundary samples, sorted.

    Sample ``i`` belongs to block ``i // block_size``, whose stream depends only
    on ``(seed, block index)``; the output is the same for any thread count.
    """
    if N < 1:
        raise ValidationError("N must be >= 1")
    rule = stopping_rule(mu, eps, delta, s)
    wm, side = walk_measure(mu)
    table = _AtomTable(wm)
    sizes = [min(block_size, N - start) for start in range(0, N, block_size)]

    def run(b):
        return _simulate(table, rule, sizes[b], block_rng(seed, b))

    threads = threads or default_threads()
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    xi = np.concatenate([p[0] for p in parts])
    steps = np.concatenate([p[1] for p in parts])
    capped = np.concatenate([p[2] for p in parts])
    n_cap = int(capped.sum())
    if n_cap > MAX_CAP_FRACTION * N:
        raise NonConvergenceError(f"{n_cap} of {N} walks hit the step cap")
    return EmpiricalMeasure(
        xi, seed=seed, eps=0.0 if rule.x_max == 0 else eps, delta=delta, side=side,
        mean_steps=float(steps.mean()), max_steps=int(steps.max()), cap_failures=n_cap,
        meta={"stopping_rule": rule.to_json()},
    )


def extended_comparison(mu: StepMeasure, N: int, seed: int, eps: float = 1e-6,
                        delta: float = 1e-6, factor: int = 10):
    """Stopped values and the same paths continued to ``factor`` times as many steps.

    Returns ``(xi_stop, xi_long, steps)``.
    """
    rule = stopping_rule(mu, eps, delta)
    wm, _ = walk_measure(mu)
    table = _AtomTable(wm)
    rng = block_rng(seed, 0)
    xi = np.zeros(N)
    long = np.zeros(N)
    steps = np.zeros(N, dtype=np.int64)
    S = np.zeros(N)
    U = np.zeros(N)
    n = 0
    stopped = np.zeros(N, dtype=bool)
    target = np.full(N, np.iinfo(np.int64).max)
    active = np.arange(N)
    while active.size:
        idx = table.draw(rng, active.size)
        U[active] += table.x[idx] * np.exp(-S[active])
        S[active] += table.z[idx]
        n += 1
        newly = active[~stopped[active] & (S[active] >= rule.level)]
        stopped[newly] = True
        xi[newly] = U[newly]
        steps[newly] = n
        target[newly] = factor * n
        finished = n >= target[active]
        long[active[finished]] = U[active[finished]]
        active = active[~finished]
        if n >= STEP_CAP:
            raise NonConvergenceError("extended run hit the step cap")
    return xi, long, steps


def speed_estimate(mu: StepMeasure, n: int, trials: int, seed: int):
    """Mean of ``S_n / n`` and of the distance sandwich bounds over ``trials`` walks.

    Returns ``(mean_Sn_over_n, sandwich_lo, sandwich_hi, stderr_Sn_over_n)``;
    the first entry is ``|S_n|/n`` so both drift signs compare against ``|alpha|``.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    wm, _ = walk_measure(mu)
    table = _AtomTable(wm)
    rng = block_rng(seed, 0)
    S = np.zeros(trials)
    U = np.zeros(trials)
    Vs = np.zeros(trials)   # exp(-S_n) V_n, bounded for positive drift
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            idx = table.draw(rng, trials)
            z = table.z[idx]
            U += table.x[idx] * np.exp(-S)
            S += z
            Vs = np.exp(-z) * (Vs + table.y[idx])
    if not (np.all(np.isfinite(U)) and np.all(np.isfinite(Vs))):
        raise NumericRangeError("horizontal coordinate left double range")
    with np.errstate(divide="ignore"):
        log_u = np.log(np.abs(U))
        log_v = S + np.log(np.abs(Vs))
    bounds = np.array([distance_bounds_from_logs(a, b, c) for a, b, c in zip(S, log_u, log_v)])
    speed = np.abs(S) / n
    return (float(speed.mean()), float(bounds[:, 0].mean() / n), float(bounds[:, 1].mean() / n),
            float(speed.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0)


@dataclass
class StationarityReport:
    distance: float          # KS distance with differences below ``resolution`` treated as ties
    null_quantile: float
    p_value: float
    n_reference: int
    n_resampled: int
    level: float = 0.999
    raw_ks: float = 0.0      # plain two-sample KS distance
    resolution: float = 0.0

    @property
    def passes(self) -> bool:
        return self.distance <= self.null_quantile

    def to_json(self) -> dict:
        return {"ks_distance": self.distance, "raw_ks_distance": self.raw_ks,
                "resolution": self.resolution, "null_quantile": self.null_quantile,
                "p_value": self.p_value, "n_reference": self.n_reference,
                "n_resampled": self.n_resampled, "level": self.level, "passes": self.passes}


def act_on_samples(mu: StepMeasure, xi: np.ndarray, rng: np.random.Generator,
                   side: BoundarySide) -> np.ndarray:
    """``g . xi_i`` with independent ``g ~ mu``."""
    cum = np.cumsum(mu.w)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, rng.random(xi.size), side="right")
    if side is BoundarySide.PLUS:
        return mu.x[idx] + np.exp(-mu.z[idx]) * xi
    return mu.y[idx] + np.exp(mu.z[idx]) * xi


def resolved_ks(a: np.ndarray, b: np.ndarray, r: float) -> float:
    """``sup_x max(F_a(x - r) - F_b(x), F_b(x - r) - F_a(x))`` for empirical CDFs.

    With ``r = 0`` this is the two-sample KS distance. If every sample is within
    ``r/2`` of an exact draw, the value is at most the KS distance of the exact
    draws, so the usual null quantile stays valid.
    """
    a, b = np.sort(a), np.sort(b)
    n, m = a.size, b.size

    def one_sided(u, v, nu, nv):
        # the sup over x of F_u(x - r) - F_v(x) is attained at x = u_i + r
        fu = np.searchsorted(u, u, side="right") / nu
        fv = np.searchsorted(v, u + r, side="right") / nv
        return float(np.max(fu - fv))

    return max(0.0, one_sided(a, b, n, m), one_sided(b, a, m, n))


def stationarity_check(mu: StepMeasure, samples: EmpiricalMeasure, N_resample: int | None = None,
                       seed: int = 0, level: float = 0.999) -> StationarityReport:
    """Two-sample KS test of ``nu`` against ``mu * nu``.

    The samples are split at random into two disjoint halves; one half is the
    reference and the other is pushed through independent ``g ~ mu``, so the
    two sets are independent draws from ``nu`` and ``mu * nu``. Each sample is
    only known to within its truncation error (scaled by ``g`` after the push)
    plus rounding; gaps below that resolution are not counted against the test.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(1,)))
    perm = rng.permutation(samples.N)
    half = samples.N // 2
    ref = samples.samples[perm[:half]]
    pool = samples.samples[perm[half:]]
    if N_resample is not None and N_resample < pool.size:
        pool = pool[:N_resample]
    _, side = walk_measure(mu)
    moved = act_on_samples(mu, pool, rng, side)
    n, m = ref.size, moved.size
    scale = np.exp(-mu.z if side is BoundarySide.PLUS else mu.z).max()
    offset = np.abs(mu.x if side is BoundarySide.PLUS else mu.y).max()
    size = max(float(np.abs(ref).max()), float(np.abs(moved).max()), offset)
    r = samples.eps * (1.0 + scale) + 8 * np.finfo(float).eps * size
    raw = float(stats.ks_2samp(ref, moved).statistic)
    d = resolved_ks(ref, moved, r)
    en = math.sqrt(n * m / (n + m))
    p = float(stats.kstwobign.sf(d * en))
    q = float(stats.kstwobign.ppf(level)) / en
    return StationarityReport(d, q, p, n, m, level, raw, r)


def multiply_fold_check(increments) -> tuple[WalkState, SolElement]:
    """Walk state and the plain group product for the same increments."""
    st = WalkState()
    prod = SolElement(0.0, 0.0, 0.0)
    for g in increments:
        st = step(st, g)
        prod = multiply(prod, g)
    return st, prod
