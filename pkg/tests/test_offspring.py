import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from causalab.offspring import (
    law_from_spec,
    make_custom,
    make_geometric_critical,
    make_poisson,
    make_stable,
    size_biased,
)

from oracles import geometric_pmf

ALL_LAWS = [make_geometric_critical(), make_poisson(), make_stable(1.5, 0.5), make_stable(1.3, 0.6),
            make_stable(1.7, 0.3)]


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.name)
def test_law_invariants(law):
    assert abs(law.total_mass - 1.0) <= 1e-12
    assert abs(law.mean - 1.0) <= 1e-10
    assert np.all(law.pmf >= 0)
    assert law.is_critical()


def test_geometric_values():
    law = make_geometric_critical()
    assert law.pmf[0] == 0.5
    assert law.mean == pytest.approx(1.0, abs=1e-12)
    k = np.arange(10_001)
    assert law.variance == pytest.approx(np.sum(k * k * geometric_pmf(k)) - 1.0, abs=1e-12)
    assert law.beta == 1.0


def test_stable_values():
    law = make_stable(1.5, 0.5)
    assert law.pmf[0] == 0.5
    assert law.pmf[1] == pytest.approx(0.25, abs=1e-15)
    # (-1)^k binom(alpha, k) from the generalised binomial formula
    for k in range(2, 8):
        binom = math.gamma(1.5 + 1) / (math.gamma(k + 1) * math.gamma(1.5 - k + 1))
        assert law.pmf[k] == pytest.approx(0.5 * (-1) ** k * binom, rel=1e-12)
    assert law.beta == pytest.approx(2.0)


def test_stable_rejects_large_gamma():
    with pytest.raises(ValueError):
        make_stable(1.5, 0.7)
    with pytest.raises(ValueError):
        make_stable(2.0, 0.1)


def test_stable_tail_stabilises():
    law = make_stable(1.3, 0.6)
    ks = np.array([10**3, 10**4, 10**5, 10**6])
    scaled = ks**1.3 * law.tail(ks)
    assert np.all(scaled > 0)
    assert np.ptp(scaled) / scaled.mean() < 0.02
    assert scaled[-1] == pytest.approx(law.tail_constant, rel=1e-3)


def test_size_biased_geometric():
    bar = size_biased(make_geometric_critical())
    assert bar.pmf[0] == 0.0
    assert bar.pmf[1] == 0.25


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.name)
def test_size_biased_total_mass(law):
    bar = size_biased(law)
    assert bar.pmf[0] == 0.0
    assert abs(bar.total_mass - 1.0) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.49), st.integers(2, 6))
def test_size_biased_custom_laws(p0, k):
    # mass p0 at 0 balanced by mass p0 / (k - 1) at k keeps the mean at one
    pmf = np.zeros(k + 1)
    pmf[0], pmf[k] = p0, p0 / (k - 1)
    pmf[1] = 1.0 - pmf[0] - pmf[k]
    law = make_custom(pmf)
    bar = size_biased(law)
    assert bar.pmf[0] == 0.0
    assert abs(bar.total_mass - 1.0) <= 1e-12


def test_deterministic_law_samples_one():
    law = make_custom([0.0, 1.0])
    rng = np.random.default_rng(0)
    assert np.all(law.sample(rng, 1000) == 1)
    assert law.sample(rng) == 1


def test_geometric_sample_mean():
    law = make_geometric_critical()
    x = law.sample(np.random.default_rng(1), 10**6)
    assert abs(x.mean() - 1.0) <= 3 * math.sqrt(2.0) / 1000


def test_geometric_ks():
    law = make_geometric_critical()
    x = law.sample(np.random.default_rng(2), 10**6)
    ecdf = np.cumsum(np.bincount(x, minlength=40)[:40]) / len(x)
    assert np.max(np.abs(ecdf - law.cdf[:40])) <= 0.002


def test_stable_frequencies():
    law = make_stable(1.5, 0.5)
    n = 10**6
    x = law.sample(np.random.default_rng(3), n)
    freq = np.bincount(x[x <= 10], minlength=11) / n
    se = np.sqrt(law.pmf[:11] * (1 - law.pmf[:11]) / n)
    assert np.all(np.abs(freq - law.pmf[:11]) <= 4 * se)


def test_stable_tail_draws_follow_pareto():
    # beyond the table the draws come from the analytic tail
    law = make_stable(1.5, 0.5, cutoff=64)
    x = law.sample(np.random.default_rng(4), 10**6)
    big = x[x >= 65]
    expect = law.tail_mass * 10**6
    assert abs(len(big) - expect) <= 4 * math.sqrt(expect)
    # Pareto tail from 65: P(X >= 2 * 65 | X >= 65) = 2^-alpha
    p = 2**-1.5
    assert abs(np.mean(big >= 130) - p) <= 4 * math.sqrt(p * (1 - p) / len(big))


def test_sample_sum_matches_repeated_draws():
    law = make_stable(1.7, 0.3)
    rng = np.random.default_rng(5)
    s = law.sample_sum(rng, np.full(20_000, 3))
    ref = law.sample(rng, (60_000)).reshape(20_000, 3).sum(axis=1)
    cap = 30
    res = stats.chisquare(np.bincount(np.minimum(s, cap), minlength=cap + 1) + 1,
                          np.bincount(np.minimum(ref, cap), minlength=cap + 1) + 1)
    assert res.pvalue > 1e-4


def test_law_from_spec():
    assert law_from_spec("geometric").name == "geometric"
    assert law_from_spec("poisson1").name == "poisson1"
    s = law_from_spec("stable(1.5,0.5)")
    assert s.tail_exponent == 1.5
    c = law_from_spec({"kind": "custom", "pmf": [0.25, 0.5, 0.25]})
    assert c.mean == pytest.approx(1.0)
    with pytest.raises(ValueError):
        law_from_spec("binomial")
    with pytest.raises(ValueError):
        law_from_spec({"kind": "custom", "pmf": [0.5, 0.0, 0.5, 0.0, 0.0, 0.1]})


def test_height_tail_geometric_closed_form():
    law = make_geometric_critical()
    # f_n(0) = n / (n + 1) for the critical geometric law
    for n in (1, 10, 100):
        assert law.height_tail(n) == pytest.approx(1 / (n + 1), rel=1e-12)
