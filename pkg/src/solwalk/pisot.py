"""Pisot numbers: certification, exact power sums, and the constants (theta, L).

If ``alpha`` is a root of a monic integer polynomial whose other roots lie
strictly inside the unit disk, the power sums ``s_k`` of all roots are
integers and ``|alpha^k - s_k| <= (r-1) delta^k``. With ``beta = 1/alpha``
this gives ``|cos(2 pi beta^k) - 1| <= theta^|k|`` for ``|k| >= L``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath

from .errors import NotPisotError, PrecisionError, ValidationError

ROOT_TOL = 1e-13
UNIT_MARGIN = 1e-9
CHECK_RANGE = 60          # |k| range over which L is verified
PRECISION_BUDGET = 120    # largest |k| served by cosine_closeness


def parse_poly(text: str) -> list[int]:
    """``"1,-1,-1"`` -> ``[1, -1, -1]`` (highest degree first)."""
    try:
        return [int(tok) for tok in text.replace(" ", "").split(",") if tok]
    except ValueError as exc:
        raise ValidationError(f"bad polynomial {text!r}: {exc}") from exc


def _roots(poly):
    dps = 50
    with mpmath.workdps(dps):
        roots = mpmath.polyroots([mpmath.mpf(c) for c in poly], maxsteps=500, extraprec=200)
        # polyroots returns a bare number for degree 1
        roots = roots if isinstance(roots, (list, tuple)) else [roots]
        residual = max(abs(mpmath.polyval(poly, r)) for r in roots)
        scale = max(1, *(abs(c) for c in poly))
        if residual > ROOT_TOL * scale * max(1, max(abs(r) for r in roots)) ** len(poly):
            raise ArithmeticError(f"root finding residual {residual}")
        return [mpmath.mpc(r) for r in roots]


@dataclass(frozen=True)
class PisotCertificate:
    poly: tuple
    alpha: float
    delta: float
    theta_tilde: float
    theta: float
    L: int
    conjugates: tuple = field(repr=False)   # the other roots, as complex

    @property
    def degree(self) -> int:
        return len(self.poly) - 1

    @property
    def beta(self) -> float:
        return 1.0 / self.alpha

    @property
    def gamma(self) -> float:
        return math.log(self.alpha)

    def to_json(self) -> dict:
        return {
            "poly": list(self.poly),
            "alpha": self.alpha,
            "beta": self.beta,
            "delta": self.delta,
            "theta_tilde": self.theta_tilde,
            "theta": self.theta,
            "L": self.L,
        }


def power_sums(poly, kmax: int) -> list[int]:
    """Exact ``[s_0, ..., s_kmax]``, ``s_k`` = sum of k-th powers of the roots.

    Newton's identities in integer arithmetic; for ``n > r`` they reduce to the
    linear recurrence with the polynomial's coefficients.
    """
    if kmax < 0:
        raise ValidationError("power sums need k >= 0")
    poly = [int(c) for c in poly]
    if poly[0] != 1:
        raise ValidationError("polynomial must be monic")
    r = len(poly) - 1
    c = poly[1:]  # c[i-1] multiplies X^{r-i}
    s = [r]
    for n in range(1, kmax + 1):
        total = sum(c[i - 1] * s[n - i] for i in range(1, min(n - 1, r) + 1))
        if n <= r:
            total += n * c[n - 1]
        s.append(-total)
    return s


def power_sum(poly, k: int) -> int:
    return power_sums(poly, k)[k]


def refine_root(poly, approx, bits: int):
    """Newton-polish a simple real root to ``bits`` of precision."""
    with mpmath.workprec(bits + 32):
        x = mpmath.mpf(approx)
        dpoly = [c * (len(poly) - 1 - i) for i, c in enumerate(poly[:-1])]
        for _ in range(2 + int(math.log2(max(bits, 2)))):
            x = x - mpmath.polyval(list(poly), x) / mpmath.polyval(dpoly, x)
        return +x


def _alpha_power_residual(alpha, poly, k: int) -> mpmath.mpf:
    """``alpha^k - s_k`` in precision wide enough to keep the residual.

    With ``2 k log2(alpha) + 128`` bits the absolute error is about
    ``alpha^-k 2^-128``, far below ``theta^k`` since ``theta > 1/alpha``.
    """
    bits = max(120, int(2 * k * math.log2(max(float(alpha), 2.0))) + 128)
    a = refine_root(poly, alpha, bits)
    with mpmath.workprec(bits):
        return a ** k - power_sum(poly, k)


def _cos_gap(phase_fraction) -> float:
    # |cos(2 pi u) - 1| = 2 sin^2(pi u), no cancellation for small u
    return float(2 * mpmath.sin(mpmath.pi * phase_fraction) ** 2)


def certify_pisot(poly) -> PisotCertificate:
    poly = tuple(int(c) for c in poly)
    if len(poly) < 2:
        raise ValidationError("polynomial degree must be >= 1")
    if poly[0] != 1:
        raise ValidationError(f"polynomial must be monic, leading coefficient {poly[0]}")
    roots = _roots(poly)
    big = [z for z in roots if abs(z) >= 1 - UNIT_MARGIN]
    if len(big) != 1:
        raise NotPisotError(f"{len(big)} roots on or outside the unit circle")
    lead = big[0]
    if abs(lead.imag) > ROOT_TOL or lead.real <= 1:
        raise NotPisotError(f"dominant root {complex(lead)} is not a real number > 1")
    alpha = lead.real
    others = [z for z in roots if z is not lead]
    delta = float(max((abs(z) for z in others), default=0.0))
    r = len(poly) - 1
    # (r-1) delta^k <= theta_tilde^k must hold eventually; for r > 2 the
    # square root absorbs the (r-1) factor once k >= 2 log(r-1)/log(1/delta)
    theta_tilde = delta if r <= 2 else math.sqrt(delta)
    beta = 1.0 / float(alpha)
    theta = (1.0 + max(beta, theta_tilde)) / 2.0
    L = _smallest_L(alpha, poly, theta)
    return PisotCertificate(poly, float(alpha), delta, theta_tilde, theta, L,
                            tuple(complex(z) for z in others))


def _gap_values(alpha_mp, poly, kmax):
    """``{k: |cos(2 pi beta^k) - 1|}`` for ``|k| <= kmax``."""
    out = {0: 0.0}
    with mpmath.workdps(30):
        beta_mp = 1 / mpmath.mpf(alpha_mp)
        for k in range(1, kmax + 1):
            out[k] = _cos_gap(beta_mp ** k)
    for k in range(1, kmax + 1):
        out[-k] = _cos_gap(_alpha_power_residual(alpha_mp, poly, k))
    return out


def _smallest_L(alpha_mp, poly, theta) -> int:
    gaps = _gap_values(alpha_mp, poly, CHECK_RANGE)
    L = CHECK_RANGE + 1
    # scan downward: L is the smallest value with every |k| in [L, 60] passing
    for n in range(CHECK_RANGE, -1, -1):
        bound = theta ** n
        if gaps[n] <= bound and gaps[-n] <= bound:
            L = n
        else:
            break
    if L > CHECK_RANGE:
        raise NotPisotError("cosine closeness fails up to |k| = 60")
    return L


def cosine_closeness(cert: PisotCertificate, k: int, check: bool = True) -> float:
    """``|cos(2 pi beta^k) - 1|`` in extended precision, checked against ``theta^|k|``."""
    if abs(k) > PRECISION_BUDGET:
        raise PrecisionError(f"|k| = {abs(k)} exceeds precision budget {PRECISION_BUDGET}")
    if check and abs(k) < cert.L:
        raise ValidationError(f"|k| = {abs(k)} below certified L = {cert.L}")
    if k >= 0:
        with mpmath.workdps(30):
            value = _cos_gap((1 / refine_root(cert.poly, cert.alpha, 120)) ** k)
    else:
        value = _cos_gap(_alpha_power_residual(cert.alpha, cert.poly, -k))
    if check and value > cert.theta ** abs(k):
        raise ArithmeticError(f"closeness bound violated at k={k}: {value} > theta^|k|")
    return value


def beta_power(cert: PisotCertificate, k: int) -> tuple[int, float]:
    """``beta^k`` split as ``(integer part witness, fractional remainder)``.

    For ``k < 0`` the witness is the power sum ``s_|k|`` and the remainder is
    ``alpha^|k| - s_|k|`` (tiny); for ``k >= 0`` the witness is 0.
    """
    if k >= 0:
        return 0, cert.beta ** k
    n = -k
    residual = sum(z ** n for z in cert.conjugates)
    return power_sum(cert.poly, n), -float(residual.real)
