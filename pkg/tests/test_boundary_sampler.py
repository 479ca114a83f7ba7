import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from solwalk import boundary_sampler as bs
from solwalk import step_measure as sm
from solwalk.errors import NonConvergenceError, NumericRangeError, ZeroDriftError
from solwalk.sol_group import BoundarySide, SolElement, multiply_fold


def test_step_first_and_abelian():
    st = bs.step(bs.WalkState(), SolElement(0.4, 1.5, -2))
    assert st.as_element() == (0.4, 1.5, -2)
    st = bs.WalkState()
    for x, y in [(1, 2), (3, -1), (0.5, 0.5)]:
        st = bs.step(st, SolElement(0, x, y))
    assert (st.U, st.V) == (4.5, 1.5)


def test_step_matches_multiply_fold():
    rng = np.random.default_rng(0)
    incs = [SolElement(*v) for v in rng.uniform(-1, 1, size=(100, 3))]
    st, prod = bs.multiply_fold_check(incs)
    oracle = multiply_fold(incs)
    assert st.n == 100
    assert np.allclose(st.as_element(), oracle, rtol=1e-10, atol=1e-10)
    assert np.allclose(prod, oracle, rtol=1e-12, atol=1e-12)


def test_step_overflow():
    with pytest.raises(NumericRangeError):
        bs.step(bs.WalkState(S=-800.0), SolElement(0, 1, 0))


def test_deterministic_ascent_stopping_step():
    gamma, eps = 0.5, 1e-8
    mu = sm.product_measure([(gamma, 1.0)], [(1, 0.5), (-1, 0.5)])
    s = bs.sample_xi(mu, np.random.default_rng(1), eps=eps, delta=1e-3)
    assert s.steps == math.ceil(math.log(1 / ((1 - math.exp(-gamma)) * eps)) / gamma)
    assert s.err_bound == eps and s.err_confidence == 1.0
    assert s.side is BoundarySide.PLUS


def test_deterministic_ascent_error_is_certain():
    gamma, eps = 0.7, 1e-6
    mu = sm.product_measure([(gamma, 1.0)], [(1, 0.5), (-1, 0.5)])
    stop, long, _ = bs.extended_comparison(mu, 500, 2, eps, 1e-3)
    assert np.all(np.abs(stop - long) <= eps)


def test_zero_horizontal_part():
    mu = sm.product_measure([(1, 0.7), (-1, 0.3)], [(0, 1)])
    s = bs.sample_xi(mu, np.random.default_rng(0), 1e-6, 1e-6)
    assert (s.xi, s.err_bound, s.steps) == (0.0, 0.0, 1)


def test_zero_drift_rejected():
    mu = sm.product_measure([(1, 0.5), (-1, 0.5)], [(1, 0.5), (-1, 0.5)])
    with pytest.raises(ZeroDriftError):
        bs.sample_xi(mu, np.random.default_rng(0))


def test_batch_of_one_is_sample_xi(solomyak):
    one = bs.sample_batch(solomyak, 1, 77, 1e-8, 1e-6)
    single = bs.sample_xi(solomyak, bs.block_rng(77, 0), 1e-8, 1e-6)
    assert one.samples[0] == single.xi


def test_batch_determinism_and_order(solomyak):
    a = bs.sample_batch(solomyak, 70_000, 5, 1e-8, 1e-6, threads=1)
    b = bs.sample_batch(solomyak, 70_000, 5, 1e-8, 1e-6, threads=3)
    c = bs.sample_batch(solomyak, 70_000, 6, 1e-8, 1e-6, threads=1)
    assert a.samples.tobytes() == b.samples.tobytes()
    assert a.samples.tobytes() != c.samples.tobytes()
    assert np.all(np.diff(a.samples) >= 0)
    assert a.N == 70_000 and a.seed == 5


def moments(mu_z, mu_x):
    ex = sum(x * w for x, w in mu_x)
    ex2 = sum(x * x * w for x, w in mu_x)
    e1 = sum(w * math.exp(-z) for z, w in mu_z)
    e2 = sum(w * math.exp(-2 * z) for z, w in mu_z)
    mean = ex / (1 - e1)
    # xi = x + e^{-z} xi' with independent parts
    second = (ex2 + 2 * ex * e1 * mean) / (1 - e2)
    return mean, second - mean ** 2


def test_mean_matches_geometric_identity():
    mu_z = [(1.0, 0.9), (-0.5, 0.1)]
    mu_x = [(0.0, 0.5), (2.0, 0.5)]
    mu = sm.product_measure(mu_z, mu_x)
    em = bs.sample_batch(mu, 200_000, 1, 1e-9, 1e-6)
    mean, var = moments(mu_z, mu_x)
    assert abs(em.samples.mean() - mean) <= 4 * math.sqrt(var / em.N)
    assert em.samples.var() == pytest.approx(var, rel=0.05)


def test_negative_drift_samples_minus_line():
    mu_z = [(-1.0, 0.9), (0.5, 0.1)]
    mu = sm.product_measure(mu_z, [(5.0, 1.0)], [(0.0, 0.5), (2.0, 0.5)])
    em = bs.sample_batch(mu, 100_000, 2, 1e-9, 1e-6)
    assert em.side is BoundarySide.MINUS
    # xi' = sum y_j e^{S_{j-1}} uses the y marginal and e^{+z}
    mean, var = moments([(-z, w) for z, w in mu_z], [(0.0, 0.5), (2.0, 0.5)])
    assert abs(em.samples.mean() - mean) <= 4 * math.sqrt(var / em.N)


def test_step_cap_failure(monkeypatch):
    monkeypatch.setattr(bs, "STEP_CAP", 64)
    mu = sm.product_measure([(1.0, 0.501), (-1.0, 0.499)], [(1, 0.5), (-1, 0.5)])
    with pytest.raises(NonConvergenceError):
        bs.sample_batch(mu, 2000, 0, 1e-6, 1e-6)


def test_truncation_soundness_small(solomyak):
    stop, long, steps = bs.extended_comparison(solomyak, 2000, 4, 1e-6, 1e-6)
    assert np.mean(np.abs(stop - long) > 1e-6) <= 10 * 1e-6
    assert steps.min() >= 1


def test_stopping_rule_fields(solomyak):
    rule = bs.stopping_rule(solomyak, 1e-6, 1e-6)
    theta = math.log(7 / 3) / math.log(2)
    assert rule.s == pytest.approx(min(1, theta / 2))
    assert rule.phi_s < 1
    expected = math.log(1 / 1e-6) + math.log(1 / ((1 - rule.phi_s) * 1e-6)) / rule.s
    assert rule.level == pytest.approx(expected)


def test_speed_vertical_geodesic():
    g = 0.8
    mu = sm.StepMeasure([(SolElement(g, 0, 0), 1.0)])
    mean, lo, hi, _ = bs.speed_estimate(mu, 50, 10, 0)
    assert (mean, lo, hi) == pytest.approx((g, g, g), abs=1e-12)


def test_speed_solomyak_and_mirror(solomyak):
    alpha = 0.4 * math.log(2)
    mean, lo, hi, se = bs.speed_estimate(solomyak, 2000, 300, 1)
    assert abs(mean - alpha) <= 3.5 * se
    assert lo <= hi
    mirrored = solomyak.mirrored()
    mean2, _, _, se2 = bs.speed_estimate(mirrored, 2000, 300, 1)
    assert abs(mean2 - alpha) <= 3.5 * se2


def test_v_over_exp_s_stays_bounded():
    mu = sm.make_solomyak(math.log(2), 0.7, sm.YRule.INDEPENDENT_SIGN)
    rng = np.random.default_rng(8)
    finals = []
    for _ in range(200):
        st = bs.WalkState()
        idx = rng.choice(len(mu), size=400, p=mu.w)
        for i in idx:
            st = bs.step(st, SolElement(mu.z[i], mu.x[i], mu.y[i]))
        finals.append(abs(st.V) * math.exp(-st.S))
    assert np.median(finals) < 10


def test_stationarity_point_mass():
    mu = sm.product_measure([(1, 0.7), (-1, 0.3)], [(0, 1)])
    em = bs.sample_batch(mu, 2000, 0)
    rep = bs.stationarity_check(mu, em)
    assert rep.distance == 0 and rep.passes


def test_stationarity_and_power(solomyak):
    em = bs.sample_batch(solomyak, 100_000, 12, 1e-8, 1e-6)
    assert bs.stationarity_check(solomyak, em, seed=1).passes
    shifted = bs.EmpiricalMeasure(em.samples + 0.5)
    assert not bs.stationarity_check(solomyak, shifted, seed=1).passes


def test_self_similarity_of_product_form(solomyak):
    em = bs.sample_batch(solomyak, 100_000, 21, 1e-8, 1e-6)
    rng = np.random.default_rng(4)
    half = em.N // 2
    perm = rng.permutation(em.N)
    ref, other = em.samples[perm[:half]], em.samples[perm[half:]]
    z = rng.choice([math.log(2), -math.log(2)], size=other.size, p=[0.7, 0.3])
    x = rng.choice([1.0, -1.0], size=other.size)
    res = stats.ks_2samp(ref, x + np.exp(-z) * other)
    assert res.pvalue > 1e-3


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=40), st.lists(st.floats(-5, 5), min_size=1, max_size=40))
def test_resolved_ks_reduces_to_ks(a, b):
    a, b = np.array(a), np.array(b)
    assert bs.resolved_ks(a, b, 0.0) == pytest.approx(stats.ks_2samp(a, b, method="asymp").statistic, abs=1e-12)
    assert bs.resolved_ks(a, b, 0.1) <= bs.resolved_ks(a, b, 0.0) + 1e-12


def test_resolved_ks_ignores_subresolution_shift():
    atoms = np.repeat(np.arange(5.0), 1000)
    shifted = atoms + 1e-9
    assert stats.ks_2samp(atoms, shifted).statistic == pytest.approx(0.2)
    assert bs.resolved_ks(atoms, shifted, 2e-9) == 0
    assert bs.resolved_ks(atoms, atoms + 1e-3, 2e-9) == pytest.approx(0.2)


def test_stationarity_rejects_wrong_law(solomyak):
    em = bs.sample_batch(solomyak, 100_000, 1, 1e-8, 1e-6)
    rep = bs.stationarity_check(sm.make_solomyak(math.log(2), 0.6), em, seed=2)
    assert not rep.passes and rep.distance == rep.raw_ks


def test_stationarity_on_clustered_lattice_law(golden, base_measure):
    from solwalk import lattice as lat
    mu = sm.from_lattice(sm.make_singular_by_speed(base_measure, lat.LatticeElement(1, 0, 0), 8))
    em = bs.sample_batch(mu, 100_000, 66)
    rep = bs.stationarity_check(mu, em, seed=6)
    assert rep.passes and rep.resolution > 0
    assert not bs.stationarity_check(mu, bs.EmpiricalMeasure(em.samples + 0.5, eps=em.eps), seed=6).passes
