"""Fourier and dimension diagnostics for the harmonic measure nu.

Two independent routes to ``nu^(t)``: the empirical characteristic function
of boundary samples, and the conditional product formula

    nu^(t) = E prod_k F(t beta^k)^{n(zeta, k)},   F(u) = sum_x w_x cos(u x),

averaged over simulated vertical paths ``zeta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .boundary_sampler import EmpiricalMeasure, walk_measure
from .errors import ValidationError
from .pisot import PisotCertificate, beta_power
from .step_measure import StepMeasure
from .vertical_walk import occupation_matrix, return_probability

__all__ = [
    "EmpiricalMeasure", "FourierEvaluation", "SingularityCertificate", "DecayFit",
    "DimensionEstimate", "ecf", "exact_ft_product", "erdos_certificate", "pisot_frequencies",
    "singularity_probe", "decay_exponent_fit", "local_dimension", "atom_diagnostic", "report",
]


@dataclass
class FourierEvaluation:
    """Fourier transform estimate; fields are scalars or arrays of matching shape."""
    t: np.ndarray
    value: np.ndarray
    stat_err: np.ndarray
    trunc_err: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.value = np.asarray(self.value)
        self.stat_err = np.broadcast_to(np.asarray(self.stat_err, dtype=float), self.t.shape).copy()
        self.trunc_err = np.broadcast_to(np.asarray(self.trunc_err, dtype=float), self.t.shape).copy()

    @property
    def total_err(self) -> np.ndarray:
        return self.stat_err + self.trunc_err

    def to_json(self) -> dict:
        v = np.atleast_1d(self.value)
        out = {"t": np.atleast_1d(self.t).tolist(),
               "stat_err": np.atleast_1d(self.stat_err).tolist(),
               "trunc_err": np.atleast_1d(self.trunc_err).tolist()}
        if np.iscomplexobj(v):
            out["values"] = v.real.tolist()
            out["values_imag"] = v.imag.tolist()
        else:
            out["values"] = v.tolist()
        return out


def _as_samples(samples) -> tuple[np.ndarray, float]:
    if isinstance(samples, EmpiricalMeasure):
        return samples.samples, samples.eps
    arr = np.sort(np.asarray(samples, dtype=float))
    return arr, 0.0


def ecf(samples, t, chunk: int = 1 << 18) -> FourierEvaluation:
    """``(1/N) sum exp(i t xi_j)`` with ``stat_err = 1/sqrt(N)``."""
    xs, err = _as_samples(samples)
    if xs.size < 2:
        raise ValidationError("ecf needs at least 2 samples")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    re = np.zeros(ts.size)
    im = np.zeros(ts.size)
    for start in range(0, xs.size, chunk):
        block = np.multiply.outer(ts, xs[start:start + chunk])
        re += np.cos(block).sum(axis=1)
        im += np.sin(block).sum(axis=1)
    value = (re + 1j * im) / xs.size
    value[ts == 0] = 1.0
    shape = np.shape(t)
    return FourierEvaluation(np.reshape(ts, shape), np.reshape(value, shape),
                             1.0 / math.sqrt(xs.size), np.reshape(err * np.abs(ts), shape))


def _symmetric_marginal(pairs) -> list[tuple[float, float]]:
    table = {}
    for x, w in pairs:
        table[round(x, 12)] = table.get(round(x, 12), 0.0) + w
    for x, w in table.items():
        if abs(table.get(round(-x, 12), 0.0) - w) > 1e-12:
            raise ValidationError("horizontal marginal must be symmetric")
    return sorted(table.items())


def _product_parts(mu: StepMeasure):
    wm, _ = walk_measure(mu)
    pf = wm.product_form
    if pf is None or wm.gamma is None:
        raise ValidationError("exact product formula needs a product measure with mu_z on gamma Z")
    gamma = abs(wm.gamma)
    levels = []
    for z, w in pf.mu_z:
        k = z / gamma
        if abs(k - round(k)) > 1e-9:
            raise ValidationError("vertical marginal is not on gamma Z")
        levels.append((int(round(k)), w))
    return levels, _symmetric_marginal(pf.mu_x), gamma


def _occupation_bound(levels) -> float:
    """Upper bound on ``E n(zeta, k)`` used in the truncation estimate."""
    ks = sorted({k for k, _ in levels})
    if len(ks) == 2 and ks[0] == -ks[1]:
        return return_probability(levels).M
    if min(ks) >= 0:
        # levels are never revisited except through zero steps
        w0 = dict(levels).get(0, 0.0)
        return 1.0 / (1.0 - w0)
    st = return_probability(levels, "montecarlo", n_paths=100_000, seed=0)
    return 1.0 / max(1e-12, 1.0 - (st.p_ret + 5 * st.p_ret_stderr))


def pisot_frequencies(cert: PisotCertificate, ls) -> np.ndarray:
    """``t_l = 2 pi beta^l``."""
    return np.array([2 * math.pi * cert.beta ** l for l in ls])


def _level_factors(xw, gamma, ts, levels, cert=None, ls=None):
    """``F(t beta^k)`` for every frequency (columns) and level (rows)."""
    beta = math.exp(-gamma)
    xs = np.array([x for x, _ in xw])
    ws = np.array([w for _, w in xw])
    out = np.empty((len(levels), len(ts)))
    if ls is None:
        for i, k in enumerate(levels):
            arg = np.multiply.outer(ts * beta ** k, xs)
            out[i] = np.cos(arg) @ ws
        return out
    if np.any(np.abs(xs - np.rint(xs)) > 1e-12):
        raise ValidationError("Pisot phases need integer horizontal atoms")
    for i, k in enumerate(levels):
        for j, l in enumerate(ls):
            n = int(l) + int(k)
            if n >= 0:
                phase = cert.beta ** n
            else:
                # 2 pi x beta^n = 2 pi x (s_|n| + remainder); drop the integer part
                _, phase = beta_power(cert, n)
            out[i, j] = float(np.cos(2 * math.pi * xs * phase) @ ws)
    return out


def exact_ft_product(mu: StepMeasure, t, N_paths: int, rng: np.random.Generator,
                     eps: float = 1e-6, delta: float = 1e-6, cert: PisotCertificate | None = None,
                     ls=None) -> FourierEvaluation:
    """Monte Carlo over vertical paths of the conditional product formula.

    With ``cert`` and integer ``ls`` the frequencies are ``t_l = 2 pi beta^l`` and
    phases at negative exponents come from the integer power sums.
    """
    levels, xw, gamma = _product_parts(mu)
    beta = math.exp(-gamma)
    if ls is not None:
        if cert is None:
            raise ValidationError("Pisot frequencies need a certificate")
        ls = [int(l) for l in np.atleast_1d(ls)]
        ts = pisot_frequencies(cert, ls)
    else:
        ts = np.atleast_1d(np.asarray(t, dtype=float))
    shape = np.shape(ts) if ls is not None else np.shape(t)
    x_max = max(abs(x) for x, _ in xw)
    M = _occupation_bound(levels)
    tmax = float(np.max(np.abs(ts))) if ts.size else 0.0
    # levels above K contribute at most M x_max^2 t^2 beta^{2(K+1)} / (2 (1 - beta^2))
    if tmax == 0 or x_max == 0:
        K = 0
    else:
        need = M * x_max ** 2 * tmax ** 2 / (2 * (1 - beta ** 2) * eps)
        K = max(0, math.ceil(math.log(need) / (2 * gamma)) - 1)
    prof = occupation_matrix(levels, N_paths, rng, K, delta)
    counts = prof.counts.astype(float)
    lv = list(prof.levels)
    F = _level_factors(xw, gamma, ts, lv, cert, ls)
    zero = F == 0
    neg = (F < 0).astype(float)
    logF = np.log(np.where(zero, 1.0, np.abs(F)))
    vals = np.exp(counts @ logF)
    parity = np.rint(counts @ neg).astype(np.int64) % 2
    vals = np.where(parity == 1, -vals, vals)
    vals = np.where(counts @ zero.astype(float) > 0, 0.0, vals)
    value = vals.mean(axis=0)
    stat = vals.std(axis=0, ddof=1) / math.sqrt(N_paths) if N_paths > 1 else np.ones(ts.size)
    tail = M * x_max ** 2 * ts ** 2 * beta ** (2 * (K + 1)) / (2 * (1 - beta ** 2))
    trunc = tail + 2 * delta
    return FourierEvaluation(np.reshape(ts, shape), np.reshape(value, shape),
                             np.reshape(stat, shape), np.reshape(trunc, shape))


@dataclass
class SingularityCertificate:
    beta: float
    q0: float
    q1: float
    M: float
    theta: float
    L: int
    c: float
    log_c: float
    table: list = field(default_factory=list)   # [(k, factor, log factor)] for |k| < L
    tail_log: float = 0.0                        # sum over |k| >= L
    tail_terms: int = 0

    @property
    def floor(self) -> float:
        """Predicted lower bound ``c^M`` for ``nu^(t_l)``."""
        return math.exp(self.M * self.log_c)

    def to_json(self) -> dict:
        return {"beta": self.beta, "q0": self.q0, "q1": self.q1, "M": self.M, "theta": self.theta,
                "L": self.L, "c": self.c, "log_c": self.log_c, "floor": self.floor,
                "tail_log": self.tail_log, "tail_terms": self.tail_terms,
                "factors": [{"k": k, "factor": f, "log": lg} for k, f, lg in self.table]}


def _cos_2pi_beta_power(cert: PisotCertificate, k: int) -> float:
    if k >= 0:
        return math.cos(2 * math.pi * cert.beta ** k)
    _, rem = beta_power(cert, k)
    return math.cos(2 * math.pi * rem)


def erdos_certificate(cert: PisotCertificate, q0: float, q1: float, M: float,
                      rel_tol: float = 1e-12) -> SingularityCertificate:
    """Lower bound ``c`` with ``nu^(t_l)^{1/M} >= c`` along ``t_l = 2 pi beta^l``.

    Factors with ``|k| >= L`` are bounded below by ``1 - 2 q1 theta^|k|``; their
    infinite product is summed in log space until the geometric tail bound on
    the omitted log terms drops below ``rel_tol``, which bounds the relative
    error of ``c``.
    """
    if not q0 > 0.5:
        raise ValidationError(f"need q0 > 1/2, got {q0}")
    if q1 < 0 or abs(q0 + 2 * q1 - 1) > 1e-12:
        raise ValidationError("need q0 + 2 q1 = 1 with q1 >= 0")
    if M < 1:
        raise ValidationError("M must be >= 1")
    theta, L = cert.theta, cert.L
    table = []
    for k in range(-(L - 1), L) if L > 0 else []:
        f = 2 * q1 * _cos_2pi_beta_power(cert, k) + q0
        table.append((k, f, math.log(f)))
    head = math.fsum(lg for _, _, lg in table)
    terms = []
    n = L
    while True:
        a = 2 * q1 * theta ** n
        mult = 1 if n == 0 else 2      # k = n and k = -n
        terms.append(mult * math.log1p(-a))
        # tail beyond n: sum_{m>n} 2 |log(1 - a_m)| <= 2 a_{n+1} / ((1 - theta)(1 - a_{n+1}))
        a_next = 2 * q1 * theta ** (n + 1)
        bound = 2 * a_next / ((1 - theta) * (1 - a_next)) if a_next < 1 else math.inf
        if bound <= rel_tol or a_next == 0:
            break
        n += 1
    tail = math.fsum(terms)
    log_c = head + tail
    c = math.exp(log_c)
    if not c > 0:
        raise ArithmeticError("certificate constant is not positive")
    return SingularityCertificate(cert.beta, q0, q1, M, theta, L, c, log_c, table, tail, len(terms))


def singularity_probe(mu: StepMeasure, cert: PisotCertificate, l_range, N_paths: int,
                      seed: int, eps: float = 1e-6, delta: float = 1e-6) -> dict:
    """Evaluate ``nu^(t_l)`` along the Pisot frequencies and compare with ``c^M``."""
    levels, xw, _ = _product_parts(mu)
    weights = dict(xw)
    q0 = weights.get(0.0, 0.0)
    q1 = weights.get(1.0, 0.0)
    if set(weights) - {0.0, 1.0, -1.0}:
        raise ValidationError("singularity probe needs mu_x supported on {-1, 0, 1}")
    M = _occupation_bound(levels)
    certificate = erdos_certificate(cert, q0, q1, M)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(2,)))
    ls = [int(l) for l in l_range]
    fe = exact_ft_product(mu, None, N_paths, rng, eps, delta, cert=cert, ls=ls)
    vals = np.atleast_1d(fe.value).astype(float)
    stat = np.atleast_1d(fe.stat_err)
    floor = certificate.floor
    lower = vals - 3 * stat
    ok = bool(np.all(vals >= floor - 3 * stat))
    strong = bool(vals.min() > 0.5 * floor)
    return {
        "op": "certify-singular",
        "l": ls,
        "t": np.atleast_1d(fe.t).tolist(),
        "values": vals.tolist(),
        "stat_err": stat.tolist(),
        "trunc_err": np.atleast_1d(fe.trunc_err).tolist(),
        "min_value_minus_3se": float(lower.min()),
        "floor": floor,
        "all_above_floor": ok,
        "min_above_half_floor": strong,
        "certificate": certificate.to_json(),
        "verdict": "singular-signature" if ok and strong else "inconclusive",
    }


@dataclass
class DecayFit:
    slope: float | None
    ci: tuple | None
    n_points: int
    resolved: bool
    label: str

    def to_json(self) -> dict:
        return {"slope": self.slope, "ci95": list(self.ci) if self.ci else None,
                "n_points": self.n_points, "resolved": self.resolved, "label": self.label}


def decay_exponent_fit(t, values, errors=None, min_points: int = 10,
                       decay_threshold: float = -0.1) -> DecayFit:
    """Least-squares slope of ``log|nu^|`` against ``log t`` (an estimate of ``-k``).

    Points whose modulus does not exceed ``errors`` are discarded. With fewer
    than ``min_points`` left, or when the 95% interval does not lie below
    ``decay_threshold``, the result is ``no decay resolved``.
    """
    t = np.asarray(t, dtype=float)
    mod = np.abs(np.asarray(values))
    err = np.zeros_like(mod) if errors is None else np.broadcast_to(np.asarray(errors, float), mod.shape)
    keep = (mod > err) & (t > 0) & (mod > 0)
    n = int(keep.sum())
    if n < min_points:
        return DecayFit(None, None, n, False, "no decay resolved")
    fit = stats.linregress(np.log(t[keep]), np.log(mod[keep]))
    half = float(stats.t.ppf(0.975, n - 2) * fit.stderr)
    ci = (float(fit.slope - half), float(fit.slope + half))
    resolved = ci[1] < decay_threshold
    return DecayFit(float(fit.slope), ci, n, resolved,
                    f"decay ~ t^{fit.slope:.3f}" if resolved else "no decay resolved")


@dataclass
class DimensionEstimate:
    frostman: float
    correlation: float
    r_grid: np.ndarray
    probe_slopes: np.ndarray = field(repr=False, default=None)
    correlation_curve: np.ndarray = field(repr=False, default=None)

    @property
    def disagreement(self) -> float:
        return abs(self.frostman - self.correlation)

    @property
    def flagged(self) -> bool:
        return self.disagreement > 0.1

    def to_json(self) -> dict:
        return {"frostman": self.frostman, "correlation": self.correlation,
                "r": self.r_grid.tolist(), "disagreement": self.disagreement,
                "flagged": self.flagged,
                "correlation_curve": None if self.correlation_curve is None
                else self.correlation_curve.tolist()}


MIN_DIMENSION_SAMPLES = 10_000


def default_r_grid(xs: np.ndarray, err: float = 0.0, points: int = 12, k_neighbors: int = 20,
                   rng: np.random.Generator | None = None) -> np.ndarray | None:
    """Log-spaced radii from the k-th neighbour scale up to 1% of the IQR."""
    q1, q3 = np.quantile(xs, [0.25, 0.75])
    iqr = q3 - q1
    if iqr <= 0:
        return None
    r_hi = 0.01 * iqr
    rng = rng or np.random.default_rng(0)
    idx = rng.choice(xs.size, size=min(xs.size, 2000), replace=False)
    lo = np.clip(idx - k_neighbors, 0, xs.size - 1)
    hi = np.clip(idx + k_neighbors, 0, xs.size - 1)
    knn = np.minimum(xs[idx] - xs[lo], xs[hi] - xs[idx])
    r_lo = max(10 * err, float(np.median(knn)), r_hi / 300)
    if r_lo >= r_hi / 3:
        r_lo = r_hi / 3
    return np.geomspace(r_lo, r_hi, points)


def _neighbour_counts(xs: np.ndarray, centres: np.ndarray, r: float) -> np.ndarray:
    return np.searchsorted(xs, centres + r, side="right") - np.searchsorted(xs, centres - r, side="left")


def local_dimension(samples, r_grid=None, probe_count: int = 2000, seed: int = 0,
                    pair_sample: int | None = 200_000) -> DimensionEstimate:
    """Frostman local slope averaged over probe points, and the correlation slope.

    Counts exclude the probe itself. Only radii at least ten times the
    truncation error are used.
    """
    xs, err = _as_samples(samples)
    if xs.size < MIN_DIMENSION_SAMPLES:
        raise ValidationError(f"need at least {MIN_DIMENSION_SAMPLES} samples, got {xs.size}")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(3,)))
    if r_grid is None:
        r_grid = default_r_grid(xs, err, rng=rng)
        if r_grid is None:
            return DimensionEstimate(0.0, 0.0, np.array([]))
    r_grid = np.asarray(sorted(r_grid), dtype=float)
    r_grid = r_grid[r_grid >= 10 * err]
    if r_grid.size < 3:
        raise ValidationError("need at least 3 radii above 10x the sample error; resample with a smaller eps")
    logr = np.log(r_grid)
    N = xs.size

    probes = xs[rng.choice(N, size=min(probe_count, N), replace=False)]
    counts = np.stack([_neighbour_counts(xs, probes, r) - 1 for r in r_grid], axis=1)
    slopes = []
    for row in counts:
        ok = row > 0
        if ok.sum() >= 3:
            slopes.append(np.polyfit(logr[ok], np.log(row[ok] / (N - 1)), 1)[0])
    frostman = float(np.mean(slopes)) if slopes else 0.0

    # pair correlation C(r) = fraction of ordered pairs within r, from a subsample of centres
    centres = xs if pair_sample is None or pair_sample >= N else xs[rng.choice(N, pair_sample, replace=False)]
    curve = np.array([(_neighbour_counts(xs, centres, r) - 1).sum() / (centres.size * (N - 1))
                      for r in r_grid])
    ok = curve > 0
    corr = float(np.polyfit(logr[ok], np.log(curve[ok]), 1)[0]) if ok.sum() >= 3 else 0.0
    return DimensionEstimate(frostman, corr, r_grid, np.array(slopes), curve)


def atom_diagnostic(samples, width: float | None = None) -> float:
    """Largest fraction of samples inside one window of ``width`` (default 10x the error)."""
    xs, err = _as_samples(samples)
    w = 10 * err if width is None else width
    ends = np.searchsorted(xs, xs + w, side="right")
    return float((ends - np.arange(xs.size)).max() / xs.size)


def report(op: str, config: dict, measure: dict | None = None, **payload) -> dict:
    """Uniform JSON report envelope; ``config`` is embedded for reproducibility."""
    out = {"op": op, "config": config}
    if measure is not None:
        out["measure"] = measure
    out.update(payload)
    out.setdefault("verdict", "inconclusive")
    return out
