import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from solwalk import vertical_walk as vw
from solwalk.errors import ValidationError, ZeroDriftError

TWO_ATOM = [(1, 0.7), (-1, 0.3)]


def test_lundberg_two_atom_closed_form():
    assert vw.lundberg_exponent(TWO_ATOM) == pytest.approx(math.log(7 / 3), abs=1e-12)


@given(st.floats(0.51, 0.99))
def test_lundberg_root_property(p):
    th = vw.lundberg_exponent([(1, p), (-1, 1 - p)])
    assert th == pytest.approx(math.log(p / (1 - p)), rel=1e-9, abs=1e-12)
    assert vw.laplace([(1, p), (-1, 1 - p)], th) == pytest.approx(1, abs=1e-10)


def test_lundberg_general_and_limits():
    mu = [(2, 0.5), (-1, 0.3), (-3, 0.2)]
    assert vw.laplace(mu, vw.lundberg_exponent(mu)) == pytest.approx(1, abs=1e-10)
    assert vw.lundberg_exponent([(1, 1.0)]) == math.inf
    assert vw.lundberg_exponent([(1, 0.5 + 1e-4), (-1, 0.5 - 1e-4)]) < 1e-3
    with pytest.raises(ZeroDriftError):
        vw.lundberg_exponent([(1, 0.5), (-1, 0.5)])


def test_truncation_margin():
    pol = vw.TruncationPolicy.for_levels(TWO_ATOM, 1e-6)
    assert pol.margin == math.ceil(math.log(1e6) / math.log(7 / 3))
    assert vw.TruncationPolicy.for_levels([(1, 1.0)], 1e-6).margin == 0


def test_return_probability_exact():
    st_ = vw.return_probability(TWO_ATOM)
    assert st_.p_ret == pytest.approx(0.6)
    assert st_.M == pytest.approx(2.5)
    assert st_.M == pytest.approx(1 / (1 - st_.p_ret), abs=1e-9)
    near_one = vw.return_probability([(1, 0.999999), (-1, 0.000001)])
    assert near_one.p_ret < 1e-5 and near_one.M == pytest.approx(1, abs=1e-5)
    neg = vw.return_probability([(-1, 0.7), (1, 0.3)])
    assert neg.alpha < 0 and neg.p_ret == pytest.approx(0.6)
    with pytest.raises(ValidationError):
        vw.return_probability([(1, 0.5), (-2, 0.2), (2, 0.3)], "exact2atom")
    with pytest.raises(ZeroDriftError):
        vw.return_probability([(1, 0.5), (-1, 0.5)])


def test_return_probability_monte_carlo_matches_exact():
    mc = vw.return_probability(TWO_ATOM, "montecarlo", n_paths=10**6, seed=3)
    assert abs(mc.p_ret - 0.6) <= 3 * mc.p_ret_stderr


def hitting_oracle(mu, low=-60, high=80):
    """P(walk from 0 revisits 0) by solving the hitting equations on [low, high)."""
    states = list(range(low, high))
    idx = {v: i for i, v in enumerate(states)}
    A = np.eye(len(states))
    b = np.zeros(len(states))
    for v in states:
        i = idx[v]
        if v == 0:
            b[i] = 1.0
            continue
        for k, w in mu:
            u = max(v + k, low)   # far below: the walk comes back up, reuse the lowest state
            if u < high:
                A[i, idx[u]] -= w
    h = np.linalg.solve(A, b)
    return sum(w * h[idx[k]] for k, w in mu)


def test_monte_carlo_on_general_walk():
    mu = [(2, 0.5), (-1, 0.4), (0, 0.1)]
    mc = vw.return_probability(mu, "montecarlo", n_paths=200_000, seed=1)
    assert abs(mc.p_ret - hitting_oracle(mu)) <= 4 * mc.p_ret_stderr


def test_occupation_deterministic_ascent():
    counts = vw.occupation_counts([(1, 1.0)], np.random.default_rng(0), (-3, 10))
    assert all(counts[k] == 1 for k in range(0, 11))
    assert all(counts[k] == 0 for k in range(-3, 0))


def test_occupation_means():
    prof = vw.occupation_matrix(TWO_ATOM, 200_000, np.random.default_rng(5), 6)
    means = prof.counts.mean(axis=0)
    se = prof.counts.std(axis=0) / math.sqrt(200_000)
    for k, m, s in zip(prof.levels, means, se):
        if k >= 0:
            assert abs(m - 2.5) <= 4 * s
        else:
            assert m <= 2.5 + 4 * s
    # every path crosses every level between 0 and kmax
    assert np.all(prof.counts[:, -7:] >= 1)


def test_occupation_reproducible():
    a = vw.occupation_matrix(TWO_ATOM, 1000, np.random.default_rng(9), 5)
    b = vw.occupation_matrix(TWO_ATOM, 1000, np.random.default_rng(9), 5)
    assert np.array_equal(a.counts, b.counts) and a.kmin == b.kmin


def test_stats_json():
    d = vw.return_probability(TWO_ATOM).to_json()
    assert d["M"] == pytest.approx(2.5) and d["method"] == "exact2atom"
