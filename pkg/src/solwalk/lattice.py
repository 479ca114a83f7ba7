"""Cocompact lattices Gamma_T = Z x|_T Z^2 of Sol.

Elements ``(r, p, q)`` multiply as ``(r, v)(r', v') = (r + r', v + T^r v')``.
Convolution powers of finitely supported measures are computed exactly on
the integer coordinates; weights are floats by default, or integer
numerators over a common denominator when every input weight is rational.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import BudgetExceededError, ValidationError
from .sol_group import SolElement

DEFAULT_ATOM_BUDGET = 10_000_000
# int64 safety margin for the vectorised path
_INT_SAFE = 2**62


class LatticeElement(NamedTuple):
    r: int
    p: int
    q: int


LATTICE_IDENTITY = LatticeElement(0, 0, 0)


def _mat_mul(a, b):
    return (
        (a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]),
        (a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]),
    )


@dataclass(frozen=True)
class LatticeSpec:
    T: tuple
    gamma: float = field(init=False)
    B: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        (a, b), (c, d) = self.T
        tr = a + d
        if a * d - b * c != 1:
            raise ValidationError(f"det T must be 1, got {a * d - b * c}")
        if tr <= 2:
            raise ValidationError(f"trace T must exceed 2, got {tr}")
        lam = (tr + math.sqrt(tr * tr - 4)) / 2
        object.__setattr__(self, "gamma", math.log(lam))
        object.__setattr__(self, "B", _eigenbasis(np.array(self.T, dtype=float), lam))

    @property
    def trace(self) -> int:
        return self.T[0][0] + self.T[1][1]

    def power(self, n: int):
        """Exact ``T^n`` as nested tuples; negative ``n`` via the adjugate."""
        cache = self.__dict__.setdefault("_powers", {})
        if n not in cache:
            (a, b), (c, d) = self.T
            base = self.T if n >= 0 else ((d, -b), (-c, a))
            result = ((1, 0), (0, 1))
            for _ in range(abs(n)):
                result = _mat_mul(result, base)
            cache[n] = result
        return cache[n]

    def to_json(self) -> dict:
        return {"T": [list(row) for row in self.T]}

    @classmethod
    def from_json(cls, data: dict) -> "LatticeSpec":
        return make_lattice(data["T"])


def _eigenbasis(T: np.ndarray, lam: float) -> np.ndarray:
    # rows: left eigenvectors for 1/lam (contracting) then lam (expanding)
    rows = []
    for ev in (1.0 / lam, lam):
        # v^T (T - ev I) = 0  <=>  (T - ev I)^T v = 0
        m = (T - ev * np.eye(2)).T
        v = np.array([-m[0, 1], m[0, 0]]) if abs(m[0, 0]) + abs(m[0, 1]) > 1e-14 else np.array([-m[1, 1], m[1, 0]])
        v = v / np.linalg.norm(v)
        first = v[np.nonzero(np.abs(v) > 1e-15)[0][0]]
        rows.append(v if first > 0 else -v)
    return np.array(rows)


def make_lattice(T) -> LatticeSpec:
    T = tuple(tuple(int(v) for v in row) for row in T)
    if len(T) != 2 or any(len(row) != 2 for row in T):
        raise ValidationError("T must be a 2x2 integer matrix")
    return LatticeSpec(T)


def lat_multiply(s: LatticeSpec, a: LatticeElement, b: LatticeElement) -> LatticeElement:
    (m00, m01), (m10, m11) = s.power(a.r)
    return LatticeElement(a.r + b.r, a.p + m00 * b.p + m01 * b.q, a.q + m10 * b.p + m11 * b.q)


def lat_inverse(s: LatticeSpec, a: LatticeElement) -> LatticeElement:
    (m00, m01), (m10, m11) = s.power(-a.r)
    return LatticeElement(-a.r, -(m00 * a.p + m01 * a.q), -(m10 * a.p + m11 * a.q))


def lat_power(s: LatticeSpec, a: LatticeElement, n: int) -> LatticeElement:
    base = a if n >= 0 else lat_inverse(s, a)
    out = LATTICE_IDENTITY
    for _ in range(abs(n)):
        out = lat_multiply(s, out, base)
    return out


def embed(s: LatticeSpec, a: LatticeElement) -> SolElement:
    x, y = s.B @ np.array([float(a.p), float(a.q)])
    return SolElement(a.r * s.gamma, float(x), float(y))


class LatticeMeasure:
    """Finitely supported probability measure on Gamma_T.

    ``atoms`` maps :class:`LatticeElement` to a positive weight (float or
    ``Fraction``). Weights must sum to one.
    """

    def __init__(self, spec: LatticeSpec, atoms: dict):
        merged: dict = {}
        for elem, w in atoms.items():
            elem = LatticeElement(*(int(v) for v in elem))
            if w <= 0:
                raise ValidationError(f"non-positive weight {w} at {elem}")
            merged[elem] = merged.get(elem, 0) + w
        total = sum(merged.values())
        if abs(float(total) - 1.0) > 1e-9:
            raise ValidationError(f"weights sum to {float(total)}, expected 1")
        self.spec = spec
        self.atoms = merged

    def __len__(self):
        return len(self.atoms)

    @property
    def is_rational(self) -> bool:
        return all(isinstance(w, (Fraction, int)) for w in self.atoms.values())

    def drift(self) -> float:
        return self.spec.gamma * float(sum(w * e.r for e, w in self.atoms.items()))

    def entropy(self) -> float:
        return _entropy(np.array([float(w) for w in self.atoms.values()]))

    def to_sol_atoms(self) -> list[tuple[SolElement, float]]:
        return [(embed(self.spec, e), float(w)) for e, w in sorted(self.atoms.items())]

    def to_json(self) -> dict:
        return {
            "kind": "lattice",
            "T": self.spec.to_json()["T"],
            "atoms": [
                {"r": e.r, "p": e.p, "q": e.q, "w": str(w) if isinstance(w, Fraction) else float(w)}
                for e, w in sorted(self.atoms.items())
            ],
        }


def _entropy(weights: np.ndarray) -> float:
    w = weights[weights > 0]
    return -math.fsum(w * np.log(w))


@dataclass
class ConvolutionPower:
    """Distribution of a product of ``k`` independent steps.

    Arrays are sorted lexicographically by ``(r, p, q)``. When ``denominator``
    is set, ``numerators / denominator`` are the exact weights.
    """
    k: int
    coords: np.ndarray           # (n, 3) int64
    weights: np.ndarray          # float64
    numerators: np.ndarray | None = None
    denominator: int | None = None

    def __len__(self):
        return len(self.weights)

    def entropy(self) -> float:
        if self.numerators is not None:
            n = self.numerators.astype(float)
            # H = log D - (1/D) sum n log n
            return math.log(self.denominator) - math.fsum(n * np.log(n)) / self.denominator
        return _entropy(self.weights)

    def as_measure(self, spec: LatticeSpec) -> LatticeMeasure:
        if self.numerators is not None:
            ws = [Fraction(int(n), self.denominator) for n in self.numerators]
        else:
            ws = list(self.weights)
        return LatticeMeasure(spec, {LatticeElement(*map(int, c)): w for c, w in zip(self.coords, ws)})


def _common_denominator(weights) -> int:
    d = 1
    for w in weights:
        d = d * Fraction(w).denominator // math.gcd(d, Fraction(w).denominator)
    return d


def _initial_power(mu: LatticeMeasure) -> ConvolutionPower:
    items = sorted(mu.atoms.items())
    coords = np.array([list(e) for e, _ in items], dtype=np.int64).reshape(-1, 3)
    weights = np.array([float(w) for _, w in items])
    num = den = None
    if mu.is_rational:
        den = _common_denominator(w for _, w in items)
        num = np.array([int(Fraction(w) * den) for _, w in items], dtype=np.int64)
    return ConvolutionPower(1, coords, weights, num, den)


def _step(spec: LatticeSpec, cur: ConvolutionPower, base: ConvolutionPower) -> ConvolutionPower:
    r = cur.coords[:, 0]
    rmin, rmax = int(r.min()), int(r.max())
    biggest = max(abs(v) for n in range(rmin, rmax + 1) for row in spec.power(n) for v in row)
    if 2 * biggest * (int(np.abs(base.coords).max()) + 1) + int(np.abs(cur.coords).max()) >= _INT_SAFE:
        raise OverflowError("lattice coordinates exceed int64 range")
    mats = np.array([spec.power(n) for n in range(rmin, rmax + 1)], dtype=np.int64)
    m = mats[r - rmin]  # (n, 2, 2)
    blocks = []
    for bc in base.coords:
        moved = np.einsum("nij,j->ni", m, bc[1:])
        blocks.append(np.column_stack([r + bc[0], cur.coords[:, 1:] + moved]))
    coords = np.concatenate(blocks)
    weights = np.concatenate([cur.weights * w for w in base.weights])
    uniq, inv = np.unique(coords, axis=0, return_inverse=True)
    inv = inv.ravel()
    out_w = np.bincount(inv, weights=weights, minlength=len(uniq))
    num = den = None
    if cur.numerators is not None and base.numerators is not None:
        den = cur.denominator * base.denominator
        if den < _INT_SAFE:
            raw = np.concatenate([cur.numerators * n for n in base.numerators])
            num = np.zeros(len(uniq), dtype=np.int64)
            np.add.at(num, inv, raw)
            out_w = num / den
        else:
            den = None
    if num is None:
        out_w /= out_w.sum()
    return ConvolutionPower(cur.k + 1, uniq, out_w, num, den)


def convolution_power(s: LatticeSpec, mu: LatticeMeasure, k: int,
                      budget: int = DEFAULT_ATOM_BUDGET) -> ConvolutionPower:
    """Exact law of the product of ``k`` independent ``mu``-steps."""
    return convolution_powers(s, mu, k, budget)[-1]


def convolution_powers(s: LatticeSpec, mu: LatticeMeasure, kmax: int,
                       budget: int = DEFAULT_ATOM_BUDGET) -> list[ConvolutionPower]:
    """``[mu^{*1}, ..., mu^{*kmax}]``; raises with the reached prefix on budget overflow."""
    if kmax < 1:
        raise ValidationError("k must be >= 1")
    base = _initial_power(mu)
    out = [base]
    while out[-1].k < kmax:
        cur = out[-1]
        if len(cur) * len(base) > budget:
            raise BudgetExceededError(
                f"atom budget {budget} exceeded at k={cur.k + 1}", reached_k=cur.k, partial=out)
        out.append(_step(s, cur, base))
    return out


def entropy_sequence(s: LatticeSpec, mu: LatticeMeasure, kmax: int,
                     budget: int = DEFAULT_ATOM_BUDGET) -> list[tuple[int, float]]:
    """``[(k, H(mu^{*k}) / k)]`` for every ``k <= kmax`` that fits the budget."""
    try:
        powers = convolution_powers(s, mu, kmax, budget)
    except BudgetExceededError as exc:
        powers = exc.partial
    return [(p.k, p.entropy() / p.k) for p in powers]
