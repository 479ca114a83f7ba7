"""Command-line front end.

Every subcommand writes a JSON report (stdout, or ``--report``) that embeds
the configuration it ran with. Exit codes: 0 success, 2 invalid input,
3 numeric failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bernoulli_conv as bc
from . import boundary_sampler as bs
from . import harmonic_analysis as ha
from . import io
from . import lattice as lat
from . import pisot
from . import step_measure as sm
from .errors import ValidationError

DEFAULT_MEASURE = "measure.json"
DEFAULT_SAMPLES = "samples.csv"


# ---------------------------------------------------------------- parsing helpers

def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from exc


def _levels(text: str) -> list[tuple[int, float]]:
    """``"1:0.7,-1:0.3"`` -> ``[(1, 0.7), (-1, 0.3)]``."""
    out = []
    for tok in str(text).replace(" ", "").split(","):
        try:
            k, w = tok.split(":")
            out.append((int(k), float(w)))
        except ValueError as exc:
            raise ValidationError(f"bad level:weight pair {tok!r}") from exc
    return out


def parse_grid(text) -> np.ndarray:
    """``"a:b:n:log"``, ``"a:b:n"`` (linear) or a comma list."""
    if isinstance(text, (list, tuple)):
        return np.asarray(text, dtype=float)
    text = str(text).replace(" ", "")
    try:
        if ":" in text:
            parts = text.split(":")
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if len(parts) > 3 and parts[3] == "log":
                return np.geomspace(a, b, n)
            return np.linspace(a, b, n)
        return np.array([float(v) for v in text.split(",") if v])
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"bad grid {text!r}") from exc


def _int_range(text) -> list[int]:
    """``"-1:-12"`` (inclusive, either direction) or a comma list."""
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text).replace(" ", "")
    if ":" in text and not text.startswith(":"):
        a, b = (int(v) for v in text.split(":"))
        step = 1 if b >= a else -1
        return list(range(a, b + step, step))
    return _ints(text)


def _check_unit(name, value):
    if not 0 < value < 1:
        raise ValidationError(f"{name} must lie in (0, 1), got {value}")


def _seed(value) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise ValidationError("seed must be a 64-bit unsigned integer")
    return seed


# ---------------------------------------------------------------- commands

def _load_measure(path) -> sm.StepMeasure:
    return sm.measure_from_json(io.read_json(path))


def _base_lattice_measure(T) -> lat.LatticeMeasure:
    spec = lat.make_lattice(T)
    gens = [(0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1), (1, 0, 0), (-1, 0, 0)]
    return lat.LatticeMeasure(spec, {lat.LatticeElement(*g): Fraction(1, 6) for g in gens})


def _matrix(text) -> tuple:
    v = _ints(text) if not isinstance(text, (list, tuple)) else [int(x) for row in text for x in
                                                                 (row if isinstance(row, (list, tuple)) else [row])]
    if len(v) != 4:
        raise ValidationError("T needs four integers a,b,c,d")
    return ((v[0], v[1]), (v[2], v[3]))


def cmd_construct(args) -> dict:
    preset = args.preset
    y_rule = sm.YRule(args.y_rule)
    if preset == "solomyak":
        mu = sm.make_solomyak(args.gamma, args.p, y_rule)
        doc = mu.to_json()
    elif preset == "erdos":
        cert = pisot.certify_pisot(pisot.parse_poly(args.poly))
        mu = sm.make_erdos(cert.beta, _levels(args.mu_z), args.q0, args.q1, y_rule, cert=cert)
        doc = mu.to_json()
    elif preset in ("lattice", "speed-singular"):
        base = _base_lattice_measure(_matrix(args.T))
        if preset == "speed-singular":
            base = sm.make_singular_by_speed(base, lat.LatticeElement(*_ints(args.g)), args.l)
        mu = sm.from_lattice(base)
        doc = base.to_json()
    else:
        raise ValidationError(f"unknown preset {preset!r}")
    io.write_json(args.output or DEFAULT_MEASURE, doc)
    return {"measure": doc, "drift": sm.drift(mu), "entropy": sm.shannon_entropy(mu),
            "atoms": len(mu), "output": str(args.output or DEFAULT_MEASURE)}


def cmd_sample(args) -> dict:
    _check_unit("eps", args.eps)
    _check_unit("delta", args.delta)
    mu = _load_measure(args.measure)
    em = bs.sample_batch(mu, args.n, args.seed, args.eps, args.delta, threads=args.threads)
    out = args.output or DEFAULT_SAMPLES
    io.write_samples(out, em.samples, args.format)
    return {"measure": mu.to_json(), "samples": em.describe(), "output": str(out),
            "atom_diagnostic": ha.atom_diagnostic(em)}


def cmd_speed(args) -> dict:
    mu = _load_measure(args.measure)
    mean, lo, hi, se = bs.speed_estimate(mu, args.steps, args.trials, args.seed)
    return {"measure": mu.to_json(), "alpha": abs(sm.drift(mu)), "mean_Sn_over_n": mean,
            "stderr": se, "sandwich_lo": lo, "sandwich_hi": hi}


def _samples_for(args) -> bs.EmpiricalMeasure:
    xs = io.read_samples(args.samples)
    return bs.EmpiricalMeasure(xs, eps=args.sample_eps)


def _decay_verdict(fe: ha.FourierEvaluation):
    fit = ha.decay_exponent_fit(fe.t, fe.value, fe.total_err)
    return fit, ("ac-signature" if fit.resolved else "inconclusive")


def cmd_ecf(args) -> dict:
    em = _samples_for(args)
    fe = ha.ecf(em, parse_grid(args.t))
    fit, verdict = _decay_verdict(fe)
    return {**fe.to_json(), "N": em.N, "decay_fit": fit.to_json(), "verdict": verdict}


def cmd_fourier_exact(args) -> dict:
    mu = _load_measure(args.measure)
    rng = bs.block_rng(args.seed, 0)
    if args.l is not None:
        cert = mu.certificate or sm.certify_inverse(math.exp(-abs(mu.gamma)))
        fe = ha.exact_ft_product(mu, None, args.paths, rng, args.eps, args.delta, cert=cert,
                                 ls=_int_range(args.l))
    else:
        fe = ha.exact_ft_product(mu, parse_grid(args.t), args.paths, rng, args.eps, args.delta)
    fit, verdict = _decay_verdict(fe)
    return {"measure": mu.to_json(), **fe.to_json(), "decay_fit": fit.to_json(), "verdict": verdict}


def cmd_certify_singular(args) -> dict:
    mu = _load_measure(args.measure)
    cert = mu.certificate
    if args.poly:
        cert = pisot.certify_pisot(pisot.parse_poly(args.poly))
    if cert is None:
        cert = sm.certify_inverse(math.exp(-abs(mu.gamma)))
    rep = ha.singularity_probe(mu, cert, _int_range(args.l), args.paths, args.seed,
                               args.eps, args.delta)
    rep.pop("op", None)
    return {"measure": mu.to_json(), **rep}


def cmd_dimension(args) -> dict:
    em = _samples_for(args)
    r = parse_grid(args.r) if args.r else None
    est = ha.local_dimension(em, r, args.probes, args.seed)
    out = {"N": em.N, **est.to_json()}
    verdict = "inconclusive"
    if args.measure:
        mu = _load_measure(args.measure)
        bound = sm.dimension_bound(mu, args.kmax)
        out["dimension_bound"] = {"value": bound.value, "raw": bound.raw, "per_k": bound.per_k}
        out["measure"] = mu.to_json()
    if not est.flagged and max(est.frostman, est.correlation) < 0.9:
        verdict = "singular-signature"
    out["verdict"] = verdict
    return out


def cmd_entropy(args) -> dict:
    mu = _load_measure(args.measure)
    bound = sm.dimension_bound(mu, args.kmax, args.budget)
    return {"measure": mu.to_json(), "alpha": sm.drift(mu),
            "entropy_over_k": [{"k": k, "H_over_k_alpha": v, "H_over_k": v * abs(sm.drift(mu))}
                               for k, v in bound.per_k],
            "dimension_bound": bound.value, "raw_bound": bound.raw}


def cmd_pisot(args) -> dict:
    cert = pisot.certify_pisot(pisot.parse_poly(args.poly))
    return {"certificate": cert.to_json()}


def cmd_stationarity(args) -> dict:
    mu = _load_measure(args.measure)
    em = _samples_for(args)
    rep = bs.stationarity_check(mu, em, args.n_resample, args.seed)
    return {"measure": mu.to_json(), **rep.to_json()}


def cmd_bernoulli(args) -> dict:
    fe = bc.ft_bernoulli(args.lam, parse_grid(args.t), args.eps)
    fit, verdict = _decay_verdict(fe)
    return {"lambda": args.lam, "support": list(bc.support_interval(args.lam)), **fe.to_json(),
            "decay_fit": fit.to_json(), "verdict": verdict}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults (flags win)")
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap; results do not depend on it")
    common.add_argument("--report", help="write the JSON report here instead of stdout")

    accuracy = argparse.ArgumentParser(add_help=False)
    accuracy.add_argument("--eps", type=float, default=1e-6)
    accuracy.add_argument("--delta", type=float, default=1e-6)

    measure = argparse.ArgumentParser(add_help=False)
    measure.add_argument("--measure", default=DEFAULT_MEASURE)

    samples = argparse.ArgumentParser(add_help=False)
    samples.add_argument("--samples", default=DEFAULT_SAMPLES)
    samples.add_argument("--sample-eps", type=float, default=0.0,
                         help="per-sample truncation error of the sample file")

    p = argparse.ArgumentParser(prog="solwalk", description="Random walks on Sol and their harmonic measures.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", parents=[common], help="write a preset step measure")
    c.add_argument("--preset", required=True, choices=["solomyak", "erdos", "speed-singular", "lattice"])
    c.add_argument("--gamma", type=float, default=math.log(2))
    c.add_argument("--p", type=float, default=0.7)
    c.add_argument("--y-rule", default="zero", choices=[r.value for r in sm.YRule])
    c.add_argument("--poly", default="1,-3,1", help="Pisot polynomial for 1/beta")
    c.add_argument("--mu-z", default="1:0.7,-1:0.3", help="level:weight pairs")
    c.add_argument("--q0", type=float, default=0.6)
    c.add_argument("--q1", type=float, default=0.2)
    c.add_argument("--T", default="2,1,1,1")
    c.add_argument("--g", default="1,0,0")
    c.add_argument("--l", type=int, default=1)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_construct)

    s = sub.add_parser("sample", parents=[common, accuracy, measure], help="sample the boundary point")
    s.add_argument("-n", type=int, default=100_000)
    s.add_argument("--format", choices=["csv", "bin"], default="csv")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("speed", parents=[common, measure], help="empirical speed and distance sandwich")
    s.add_argument("--steps", type=int, default=10_000)
    s.add_argument("--trials", type=int, default=1000)
    s.set_defaults(func=cmd_speed)

    s = sub.add_parser("ecf", parents=[common, samples], help="empirical characteristic function")
    s.add_argument("--t", default="10:10000:20:log")
    s.set_defaults(func=cmd_ecf)

    s = sub.add_parser("fourier-exact", parents=[common, accuracy, measure],
                       help="product-formula Fourier transform")
    s.add_argument("--t", default="10:10000:20:log")
    s.add_argument("--l", help="Pisot frequency exponents, e.g. -1:-12 (overrides --t)")
    s.add_argument("--paths", type=int, default=100_000)
    s.set_defaults(func=cmd_fourier_exact)

    s = sub.add_parser("certify-singular", parents=[common, accuracy, measure],
                       help="Erdos certificate and probe along t_l")
    s.add_argument("--l", default="-1:-12")
    s.add_argument("--paths", type=int, default=100_000)
    s.add_argument("--poly", help="override the Pisot polynomial")
    s.set_defaults(func=cmd_certify_singular)

    s = sub.add_parser("dimension", parents=[common, samples], help="local and correlation dimension")
    s.add_argument("--r", help="radius grid; default is data driven")
    s.add_argument("--probes", type=int, default=2000)
    s.add_argument("--measure", help="also report the entropy/speed bound of this measure")
    s.add_argument("--kmax", type=int, default=1)
    s.set_defaults(func=cmd_dimension)

    s = sub.add_parser("entropy", parents=[common, measure], help="H(mu^k)/k and the dimension bound")
    s.add_argument("--kmax", type=int, default=4)
    s.add_argument("--budget", type=int, default=lat.DEFAULT_ATOM_BUDGET)
    s.set_defaults(func=cmd_entropy)

    s = sub.add_parser("pisot", parents=[common], help="certify a Pisot polynomial")
    s.add_argument("--poly", required=True)
    s.set_defaults(func=cmd_pisot)

    s = sub.add_parser("stationarity", parents=[common, measure, samples], help="KS test of mu * nu = nu")
    s.add_argument("--n-resample", type=int)
    s.set_defaults(func=cmd_stationarity)

    s = sub.add_parser("bernoulli", parents=[common], help="Fourier transform of b_lambda")
    s.add_argument("--lam", type=float, default=0.5)
    s.add_argument("--t", default="1:100:50:log")
    s.add_argument("--eps", type=float, default=1e-12)
    s.set_defaults(func=cmd_bernoulli)
    return p


def _config_of(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config", "report")}


def parse(argv=None) -> argparse.Namespace:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    head, _ = pre.parse_known_args(argv)
    choices = parser._subparsers._group_actions[0].choices
    if head.config and head.command in choices:
        cfg = {k.replace("-", "_"): v for k, v in io.read_json(head.config).items()}
        sub = choices[head.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        # config supplies defaults (and satisfies required options); flags win
        for action in sub._actions:
            if action.dest in cfg:
                action.required = False
        sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def run(argv=None) -> int:
    try:
        args = parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        payload = args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, OverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    doc = {"op": args.command, "config": _config_of(args), **payload}
    doc.setdefault("verdict", "inconclusive")
    text = io.dumps(doc)
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
