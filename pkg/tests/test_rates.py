import math

import pytest
from hypothesis import given, settings, strategies as st

from sparsephase.rates import (PROBLEMS, classify_regime, condition_a1, lower_bound_radius, rate_value, rates_table,
                               second_moment_certificate)


@pytest.mark.parametrize("n, p, first", [(50, 5000, 4), (50, 200, 8)])
def test_rule_of_thumb_thresholds(n, p, first):
    for k in range(1, 16):
        assert (classify_regime(k, n, p).regime == "UltraHigh") == (k >= first)


def test_classical_example():
    assert classify_regime(1, 10**6, 10).regime == "Classical"


@given(n=st.integers(1, 500), p=st.integers(3, 10**5), data=st.data())
@settings(max_examples=80, deadline=None)
def test_regime_monotone_in_k(n, p, data):
    # k log(p/k) increases on k <= p/e, the range where sparse regimes live
    k = data.draw(st.integers(1, max(1, int(p / math.e) - 1)))
    if classify_regime(k, n, p).regime == "UltraHigh":
        assert classify_regime(k + 1, n, p).regime == "UltraHigh"


def test_rate_branches():
    assert rate_value("TestKnownVar", 1, 10**4, 10).value == pytest.approx(math.log(10) / 10**4)
    assert rate_value("PredictionFixed", 50, 50, 10**6).value == 1.0
    k, p = 2, 2 * math.e ** 5
    n = 10
    assert rate_value("PredictionRandom", k, n, p).value == pytest.approx(math.e)


def test_rate_caps_are_continuous():
    # PredictionFixed cap at k log(p/k) = n
    k, n = 3, 12
    p = k * math.exp(n / k)
    assert rate_value("PredictionFixed", k, n, p).value == pytest.approx(1.0)
    # TestKnownVar branch point at k log p = sqrt(n)
    n = 400
    p = math.exp(20 / 2)
    assert rate_value("TestKnownVar", 2, n, p).value == pytest.approx(1 / math.sqrt(n))


def test_rate_formula_ids_and_forms():
    table = rates_table(3, 50, 5000)
    assert [r[0] for r in table[:5]] == list(PROBLEMS)
    a = rate_value("TestUnknownVar", 3, 50, 5000).value
    b = rate_value("TestUnknownVar", 3, 50, 5000, log_form="log_ep_over_k").value
    assert 0 < b < a
    with pytest.raises(ValueError):
        rate_value("TestUnknownVar", 3, 50, 5000, log_form="other")
    with pytest.raises(ValueError):
        rate_value("Nope", 1, 1, 1)


def test_inverse_fixed_branches():
    assert rate_value("InverseFixed", 1, 100, 10).formula_id == "k/n*log(p/k)"
    assert rate_value("InverseFixed", 10, 50, 5000).formula_id == "exp(k/n*log(p/k))"


@given(k=st.integers(1, 50), n=st.integers(1, 1000), p=st.integers(50, 10**6))
@settings(max_examples=60, deadline=None)
def test_rates_are_nonnegative(k, n, p):
    for problem in PROBLEMS:
        assert rate_value(problem, k, n, p).value >= 0


def test_second_moment_null_prior():
    assert second_moment_certificate(0.0, 3, 20, 100, 1.0).second_moment_bound == pytest.approx(1.0)


@pytest.mark.parametrize("rho2, n, p", [(0.1, 20, 50), (0.5, 10, 1000), (2.0, 5, 7)])
def test_second_moment_k1_closed_form(rho2, n, p):
    value = second_moment_certificate(rho2, 1, n, p, 1.0).second_moment_bound
    assert value == pytest.approx((1 - 1 / p) + (1 + rho2) ** n / p, rel=1e-12)


def test_second_moment_increasing_in_radius():
    values = [second_moment_certificate(r2, 4, 30, 1000, 1.0).second_moment_bound for r2 in
              [0.0, 0.05, 0.1, 0.2, 0.4, 0.8]]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_second_moment_rejects_bad_input():
    with pytest.raises(ValueError):
        second_moment_certificate(-1.0, 1, 5, 10, 1.0)
    with pytest.raises(ValueError):
        second_moment_certificate(1.0, 1, 5, 10, 2.5)


def test_small_dimension_branch():
    p = math.exp(3) * 10
    cert = lower_bound_radius(1, 1000, p, 0.1, 0.1)
    assert not cert.condition_A1
    assert cert.regime_formula == "SmallDim"
    assert cert.rho_squared == pytest.approx(math.log(1 + p) / 2000)


def test_condition_a1_boundary_is_included():
    p = math.exp(5)
    assert condition_a1(1, 1, p)
    cert = lower_bound_radius(1, 1, p, 0.1, 0.1)
    assert cert.condition_A1
    large = -1 + (p / (2 * math.e)) * 4.0 ** -2
    small = 0.5 * math.log1p(p)
    assert cert.rho_squared == pytest.approx(max(large, small))


def test_certificate_at_moderate_dimension():
    cert = lower_bound_radius(5, 50, 5000, 0.25, 0.25)
    assert cert.eta == pytest.approx(1.0)
    ref = second_moment_certificate(cert.rho_squared, 5, 50, 5000, cert.eta)
    assert cert.second_moment_bound == pytest.approx(ref.second_moment_bound)
    assert cert.satisfied


def test_lower_bound_radius_preconditions():
    with pytest.raises(ValueError):
        lower_bound_radius(1, 10, 100, 0.3, 0.3)
    with pytest.raises(ValueError):
        lower_bound_radius(5, 10, 100, 0.1, 0.1)
