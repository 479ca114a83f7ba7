"""Finitely supported step distributions on Sol and the standard constructions."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from . import lattice as lat
from .errors import NotPisotError, ValidationError, ZeroDriftError
from .pisot import PisotCertificate, certify_pisot
from .sol_group import SolElement, inverse

MERGE_TOL = 1e-12
LOAD_TOL = 1e-9


class YRule(enum.Enum):
    ZERO = "zero"
    INDEPENDENT_SIGN = "independent-sign"


@dataclass(frozen=True)
class ProductForm:
    """Marginals of a product measure mu_z x mu_x x mu_y (lists of (value, weight))."""
    mu_z: tuple
    mu_x: tuple
    mu_y: tuple
    gamma: float | None = None


class StepMeasure:
    """A finitely supported probability measure on Sol.

    Atoms are held as parallel arrays ``z, x, y, w``. ``gamma`` is set when the
    vertical marginal lives on ``gamma * Z``; ``lattice`` keeps the exact
    source measure for measures pushed forward from Gamma_T.
    """

    def __init__(self, atoms, product_form: ProductForm | None = None,
                 gamma: float | None = None, lattice_measure=None, name: str = "atoms"):
        arr = np.array([(g.z, g.x, g.y, w) for g, w in atoms], dtype=float).reshape(-1, 4)
        if len(arr) == 0:
            raise ValidationError("empty measure")
        if np.any(arr[:, 3] <= 0):
            raise ValidationError("weights must be positive")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("non-finite atom")
        total = arr[:, 3].sum()
        if abs(total - 1.0) > LOAD_TOL:
            raise ValidationError(f"weights sum to {total}, expected 1")
        arr[:, 3] /= total
        self.z, self.x, self.y, self.w = (np.ascontiguousarray(arr[:, i]) for i in range(4))
        self.product_form = product_form
        self.gamma = gamma if gamma is not None else (product_form.gamma if product_form else None)
        self.lattice_measure = lattice_measure
        self.name = name
        self.certificate: PisotCertificate | None = None

    def __len__(self):
        return len(self.w)

    def atoms(self) -> list[tuple[SolElement, float]]:
        return [(SolElement(float(a), float(b), float(c)), float(d))
                for a, b, c, d in zip(self.z, self.x, self.y, self.w)]

    def marginal(self, coord: str) -> list[tuple[float, float]]:
        vals = getattr(self, coord)
        return _merge_1d(vals, self.w)

    def vertical_levels(self) -> list[tuple[int, float]]:
        """mu_z as (integer multiple of gamma, weight); needs a vertical lattice."""
        if self.gamma is None:
            raise ValidationError("measure has no vertical lattice gamma*Z")
        levels = self.z / self.gamma
        k = np.rint(levels)
        if np.max(np.abs(levels - k)) > 1e-9:
            raise ValidationError("vertical atoms are not on gamma*Z")
        return [(int(a), b) for a, b in _merge_1d(k, self.w)]

    def mirrored(self) -> "StepMeasure":
        """Image under the automorphism (z, x, y) -> (-z, y, x).

        Swaps the two boundary lines, so a negative-drift walk can reuse the
        positive-drift machinery.
        """
        pf = None
        if self.product_form is not None:
            pf = ProductForm(tuple((-z, w) for z, w in self.product_form.mu_z),
                             self.product_form.mu_y, self.product_form.mu_x, self.product_form.gamma)
        atoms = [(SolElement(-a, c, b), d) for a, b, c, d in zip(self.z, self.x, self.y, self.w)]
        return StepMeasure(atoms, pf, self.gamma, None, self.name + "-mirrored")

    def to_json(self) -> dict:
        if self.lattice_measure is not None:
            return self.lattice_measure.to_json()
        if self.product_form is not None:
            pf = self.product_form
            out = {
                "kind": "product",
                "name": self.name,
                "gamma": pf.gamma,
                "mu_z": [{"z": z, "w": w} for z, w in pf.mu_z],
                "mu_x": [{"x": x, "w": w} for x, w in pf.mu_x],
                "mu_y": [{"y": y, "w": w} for y, w in pf.mu_y],
            }
            if self.certificate is not None:
                out["pisot_poly"] = list(self.certificate.poly)
            return out
        return {
            "kind": "atoms",
            "gamma": self.gamma,
            "atoms": [{"z": g.z, "x": g.x, "y": g.y, "w": w} for g, w in self.atoms()],
        }


def _merge_1d(vals, weights):
    order = np.argsort(vals, kind="stable")
    out: list[list[float]] = []
    for v, w in zip(vals[order], weights[order]):
        if out and abs(v - out[-1][0]) <= MERGE_TOL * max(1.0, abs(v)):
            out[-1][1] += w
        else:
            out.append([float(v), float(w)])
    return [(v, w) for v, w in out]


def product_measure(mu_z, mu_x, mu_y=((0.0, 1.0),), gamma=None, name="product") -> StepMeasure:
    mu_z, mu_x, mu_y = (tuple((float(v), float(w)) for v, w in m) for m in (mu_z, mu_x, mu_y))
    atoms = [(SolElement(z, x, y), wz * wx * wy)
             for z, wz in mu_z for x, wx in mu_x for y, wy in mu_y]
    return StepMeasure(atoms, ProductForm(mu_z, mu_x, mu_y, gamma), gamma, name=name)


def from_lattice(mu: "lat.LatticeMeasure") -> StepMeasure:
    return StepMeasure(mu.to_sol_atoms(), gamma=mu.spec.gamma, lattice_measure=mu, name="lattice")


def drift(mu) -> float:
    if isinstance(mu, lat.LatticeMeasure):
        return mu.drift()
    return math.fsum(mu.w * mu.z)


def shannon_entropy(mu) -> float:
    """Entropy in nats over distinct atoms (coincident atoms merged first)."""
    if isinstance(mu, lat.LatticeMeasure):
        return mu.entropy()
    order = np.lexsort((mu.y, mu.x, mu.z))
    pts = np.column_stack([mu.z, mu.x, mu.y])[order]
    w = mu.w[order]
    merged = []
    for p, wi in zip(pts, w):
        if merged and np.all(np.abs(p - merged[-1][0]) <= MERGE_TOL * np.maximum(1.0, np.abs(p))):
            merged[-1][1] += wi
        else:
            merged.append([p, wi])
    ws = np.array([m[1] for m in merged])
    return -math.fsum(ws * np.log(ws))


def _y_marginal(y_rule: YRule):
    if y_rule is YRule.ZERO:
        return ((0.0, 1.0),)
    return ((1.0, 0.5), (-1.0, 0.5))


def make_solomyak(gamma: float, p: float, y_rule: YRule = YRule.ZERO) -> StepMeasure:
    """mu_z = p d_gamma + (1-p) d_-gamma, mu_x = (d_1 + d_-1)/2, drift (2p-1) gamma."""
    if not gamma > 0:
        raise ValidationError("gamma must be positive")
    if not 0.5 < p < 1:
        raise ValidationError(f"need 1/2 < p < 1, got {p}")
    return product_measure(((gamma, p), (-gamma, 1 - p)), ((1.0, 0.5), (-1.0, 0.5)),
                           _y_marginal(y_rule), gamma, name="solomyak")


def certify_inverse(beta: float, max_degree: int = 4, max_coeff: int = 100) -> PisotCertificate:
    """Find and certify a Pisot polynomial for ``1/beta`` (integer relation search)."""
    if not 0 < beta < 1:
        raise NotPisotError(f"beta={beta} not in (0, 1)")
    for n in range(1, max_degree + 1):
        with mpmath.workdps(15):
            coeffs = mpmath.findpoly(mpmath.mpf(1) / beta, n, maxcoeff=max_coeff)
        if coeffs:
            coeffs = [int(c) for c in coeffs]
            if coeffs[0] < 0:
                coeffs = [-c for c in coeffs]
            if coeffs[0] != 1:
                continue
            try:
                cert = certify_pisot(coeffs)
            except (ValidationError, ArithmeticError):
                continue
            if abs(cert.beta - beta) <= 1e-12:
                return cert
    raise NotPisotError(f"no Pisot certificate found for 1/beta with beta={beta}")


def make_erdos(beta, mu_z, q0: float, q1: float, y_rule: YRule = YRule.ZERO,
               cert: PisotCertificate | None = None) -> StepMeasure:
    """Product measure with mu_x = q1 d_1 + q1 d_-1 + q0 d_0 and mu_z on gamma Z.

    ``mu_z`` is a list of ``(level, weight)`` with integer levels in units of
    ``gamma = -log beta``; ``1/beta`` must be a certified Pisot number.
    """
    if not q0 > 0.5:
        raise ValidationError(f"need q0 > 1/2, got {q0}")
    if q1 < 0 or abs(q0 + 2 * q1 - 1) > 1e-12:
        raise ValidationError("need q0 + 2 q1 = 1 with q1 >= 0")
    if cert is None:
        cert = certify_inverse(float(beta))
    elif abs(cert.beta - float(beta)) > 1e-12:
        raise ValidationError(f"certificate is for beta={cert.beta}, not {beta}")
    gamma = cert.gamma
    levels = [(int(k), float(w)) for k, w in mu_z]
    mean = sum(k * w for k, w in levels)
    if not mean > 0:
        raise ValidationError("vertical marginal must have positive mean")
    mu_x = [(0.0, q0)] + ([(1.0, q1), (-1.0, q1)] if q1 > 0 else [])
    m = product_measure([(k * gamma, w) for k, w in levels], mu_x, _y_marginal(y_rule), gamma,
                        name="erdos")
    m.certificate = cert
    return m


def make_singular_by_speed(base: "lat.LatticeMeasure", g: "lat.LatticeElement", l: int) -> "lat.LatticeMeasure":
    """mu_l = (base + delta_{g^l}) / 2."""
    g = lat.LatticeElement(*g)
    if g.r == 0:
        raise ValidationError("g must have a non-zero vertical component")
    if l < 1:
        raise ValidationError("l must be >= 1")
    gl = lat.lat_power(base.spec, g, l)
    half = Fraction(1, 2) if base.is_rational else 0.5
    atoms = {e: w * half for e, w in base.atoms.items()}
    atoms[gl] = atoms.get(gl, 0) + half
    return lat.LatticeMeasure(base.spec, atoms)


@dataclass
class DimensionBound:
    value: float          # min(1, raw)
    raw: float            # min_k H(mu^{*k}) / (k |alpha|)
    per_k: list           # [(k, H(mu^{*k}) / (k |alpha|))]


def dimension_bound(mu, kmax: int = 1, budget: int = lat.DEFAULT_ATOM_BUDGET) -> DimensionBound:
    """Entropy/speed upper bound on the dimension of the harmonic measure."""
    if isinstance(mu, StepMeasure) and mu.lattice_measure is not None:
        mu = mu.lattice_measure
    alpha = drift(mu)
    if abs(alpha) < 1e-15:
        raise ZeroDriftError("dimension bound undefined for zero drift")
    if isinstance(mu, lat.LatticeMeasure):
        seq = lat.entropy_sequence(mu.spec, mu, kmax, budget)
        per_k = [(k, h / abs(alpha)) for k, h in seq]
    else:
        per_k = [(1, shannon_entropy(mu) / abs(alpha))]
    raw = min(v for _, v in per_k)
    return DimensionBound(min(1.0, raw), raw, per_k)


def is_nondegenerate(mu, kmax: int = 6, budget: int = 2_000_000) -> bool:
    """Sufficient check that the semigroup generated by the support is a group.

    True when every support atom has its inverse in the support of some
    ``mu^{*k}``, ``k <= kmax`` (inverse closure of the support is the k=1 case).
    Lattice measures are checked exactly; real measures with tolerance.
    """
    if isinstance(mu, StepMeasure) and mu.lattice_measure is not None:
        mu = mu.lattice_measure
    if isinstance(mu, lat.LatticeMeasure):
        needed = {lat.lat_inverse(mu.spec, e) for e in mu.atoms}
        try:
            powers = lat.convolution_powers(mu.spec, mu, kmax, budget)
        except lat.BudgetExceededError as exc:
            powers = exc.partial
        for p in powers:
            present = {lat.LatticeElement(*map(int, c)) for c in p.coords}
            needed -= present
            if not needed:
                return True
        return False
    pts = np.column_stack([mu.z, mu.x, mu.y])
    for g, _ in mu.atoms():
        gi = np.array(inverse(g))
        if not np.any(np.all(np.abs(pts - gi) <= MERGE_TOL * np.maximum(1.0, np.abs(gi)), axis=1)):
            return False
    return True


def measure_from_json(data: dict) -> StepMeasure:
    kind = data.get("kind")
    if kind == "product":
        def pairs(key, coord):
            return [(float(a[coord]), float(a["w"])) for a in data.get(key, [])] or [(0.0, 1.0)]
        parts = [pairs("mu_z", "z"), pairs("mu_x", "x"), pairs("mu_y", "y")]
        for part in parts:
            if abs(sum(w for _, w in part) - 1) > LOAD_TOL:
                raise ValidationError("marginal weights must sum to 1")
        m = product_measure(*parts, gamma=data.get("gamma"), name=data.get("name", "product"))
        if data.get("pisot_poly"):
            m.certificate = certify_pisot(data["pisot_poly"])
        return m
    if kind == "lattice":
        spec = lat.make_lattice(data["T"])
        atoms = {}
        for a in data["atoms"]:
            key = lat.LatticeElement(int(a["r"]), int(a["p"]), int(a["q"]))
            atoms[key] = atoms.get(key, 0) + _weight(a["w"])
        return from_lattice(lat.LatticeMeasure(spec, atoms))
    if kind == "atoms":
        atoms = [(SolElement(float(a["z"]), float(a["x"]), float(a["y"])), float(a["w"]))
                 for a in data["atoms"]]
        return StepMeasure(atoms, gamma=data.get("gamma"))
    raise ValidationError(f"unknown measure kind {kind!r}")


def _weight(w):
    # exact fractions survive a JSON round trip as strings like "1/12"
    if isinstance(w, str):
        return Fraction(w)
    return float(w)
