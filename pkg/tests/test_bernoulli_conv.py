import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from solwalk import bernoulli_conv as bc
from solwalk.errors import ValidationError
from solwalk.harmonic_analysis import ecf

lams = st.floats(0.05, 0.95)
ts = st.floats(-50, 50)


def test_closed_form_half():
    t = np.linspace(0.1, 40, 400)
    got = bc.ft_bernoulli(0.5, t).value
    assert np.max(np.abs(got - np.sin(2 * t) / (2 * t))) <= 1e-11


@pytest.mark.parametrize("m", [2, 3, 4])
def test_closed_form_roots_of_half(m):
    lam = 0.5 ** (1 / m)
    t = np.linspace(0.1, 30, 300)
    got = bc.ft_bernoulli(lam, t).value
    assert np.max(np.abs(got - bc.sinc_product(lam, t))) <= 1e-11
    assert np.all(np.abs(got) <= bc.decay_bound(lam, t) + 1e-11)


def test_interleaving_identity():
    lam = 2 ** (-1 / 3)
    t = np.linspace(0, 20, 200)
    prod = np.ones_like(t)
    for j in range(3):
        prod *= bc.ft_bernoulli(0.5, t * lam ** j).value
    assert np.max(np.abs(bc.ft_bernoulli(lam, t).value - prod)) <= 1e-11


@given(lams, ts)
def test_ft_bounded(lam, t):
    assert abs(float(bc.ft_bernoulli(lam, t).value)) <= 1


@given(lams, ts)
def test_self_similarity(lam, t):
    eps = 1e-12
    lhs = float(bc.ft_bernoulli(lam, t, eps).value)
    rhs = math.cos(t) * float(bc.ft_bernoulli(lam, lam * t, eps).value)
    assert abs(lhs - rhs) <= 2 * eps


def test_ft_truncation_reported():
    ev = bc.ft_bernoulli(0.9, [0.0, 5.0, -5.0], eps=1e-8)
    assert ev.value[0] == 1 and ev.trunc_err[0] == 0
    assert np.all(ev.trunc_err <= 1e-8)
    assert ev.value[1] == ev.value[2]


def test_terms_needed():
    K = bc.terms_needed(0.5, 1e-6)
    assert 0.5 ** (K + 1) / 0.5 <= 1e-6 < 0.5 ** K / 0.5
    with pytest.raises(ValidationError):
        bc.terms_needed(1.0, 1e-6)
    with pytest.raises(ValidationError):
        bc.terms_needed(0.5, 0)


def test_support_and_samples():
    assert bc.support_interval(0.5) == (-2.0, 2.0)
    rng = np.random.default_rng(0)
    for lam in (0.3, 0.6, 0.9):
        lo, hi = bc.support_interval(lam)
        xs = bc.sample_b_batch(lam, 20_000, rng)
        assert xs.min() >= lo and xs.max() <= hi
    assert abs(bc.sample_b(0.3, rng)) <= 1 / 0.7


def test_half_is_uniform():
    xs = bc.sample_b_batch(0.5, 100_000, np.random.default_rng(1))
    assert stats.kstest(xs, stats.uniform(-2, 4).cdf).pvalue > 1e-3


def test_cantor_case_has_gaps():
    # lambda = 1/3 lives on a scaled middle-thirds Cantor set
    xs = bc.sample_b_batch(1 / 3, 50_000, np.random.default_rng(2))
    assert not np.any(np.abs(xs) < 0.5 - 1e-9)


def test_ecf_matches_product():
    N = 200_000
    xs = bc.sample_b_batch(0.7, N, np.random.default_rng(3))
    t = np.linspace(0, 10, 41)
    emp = ecf(xs, t)
    exact = bc.ft_bernoulli(0.7, t).value
    assert np.max(np.abs(emp.value.real - exact)) <= 4 / math.sqrt(N)
    assert np.max(np.abs(emp.value.imag)) <= 4 / math.sqrt(N)


def test_half_power_index():
    assert bc.half_power_index(0.5) == 1
    assert bc.half_power_index(2 ** -0.25) == 4
    assert bc.half_power_index(0.6) is None
    with pytest.raises(ValidationError):
        bc.sinc_product(0.6, 1.0)


def test_density_half_is_flat():
    grid = np.linspace(-1.9, 1.9, 77)
    est = bc.density_estimate(0.5, grid, eps=1e-3)
    assert np.max(np.abs(est.values - 0.25)) <= 2e-3
    assert not est.heuristic


def test_density_smooth_case():
    lam = 2 ** -0.25
    lo, hi = bc.support_interval(lam)
    grid = np.linspace(lo - 0.5, hi + 0.5, 801)
    est = bc.density_estimate(lam, grid, eps=1e-4)
    assert np.trapezoid(est.values, grid) == pytest.approx(1, abs=1e-3)
    assert est.values.min() >= -1e-3
    outside = (grid < lo) | (grid > hi)
    assert np.max(np.abs(est.values[outside])) <= 1e-3
    # the density is C^2: second differences stay bounded as the grid refines
    h = grid[1] - grid[0]
    d2 = np.diff(est.values, 2) / h ** 2
    assert np.max(np.abs(d2)) < 5


def test_density_symmetric():
    grid = np.linspace(-3, 3, 61)
    est = bc.density_estimate(0.75, grid, eps=1e-3)
    assert np.allclose(est.values, est.values[::-1], atol=1e-9)
    assert est.heuristic


def test_density_pisot_warning():
    golden = 2 / (1 + 5 ** 0.5)
    with pytest.warns(RuntimeWarning, match="Pisot"):
        est = bc.density_estimate(golden, [0.0], eps=1e-2)
    assert est.pisot_warning
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not bc.density_estimate(2 ** -0.5, [0.0], eps=1e-2).pisot_warning


def test_density_rejects_small_lambda():
    with pytest.raises(ValidationError):
        bc.density_estimate(0.4, [0.0])
