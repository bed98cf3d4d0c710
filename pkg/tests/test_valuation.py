import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bertrand_edgeworth.demand import make_bernoulli, make_explicit, make_poisson
from bertrand_edgeworth.errors import DegenerateDemandError, InvalidParameterError, NoFixedPointError
from bertrand_edgeworth.valuation import (
    MarketParams,
    ValueTable,
    infinite_horizon,
    infinite_horizon_value,
    monopolist_value,
    option_value,
    reservation_price,
    value_iteration,
)

from oracles import exact_reservation, exact_values


def params(demand, n=2, t=3, pbar=40.0, delta=0.9):
    return MarketParams(n, t, pbar, delta, demand)


HALF = params(make_bernoulli(0.5))
POISSON = params(make_poisson(0.5))


def test_monopolist_small_horizons():
    assert monopolist_value(0, HALF) == 0.0
    assert monopolist_value(1, HALF) == pytest.approx(20.0, abs=1e-12)
    assert monopolist_value(2, HALF) == pytest.approx(29.0, abs=1e-12)
    assert monopolist_value(1, POISSON) == pytest.approx(15.738773611494663, abs=1e-12)


def test_option_values_hand_unrolled():
    # V(2,2) = 0.45 * V(2,1) + 0.45 * V(1,1) = 0.45 * 20
    assert option_value(2, 2, HALF) == pytest.approx(9.0, abs=1e-12)
    assert option_value(2, 3, HALF) == pytest.approx(17.1, abs=1e-12)
    assert option_value(3, 2, HALF) == 0.0
    assert option_value(2, 1, POISSON) == pytest.approx(3.6081604172419954, abs=1e-12)


def test_two_sellers_one_period_general():
    model = make_explicit((0.2, 0.5, 0.3))
    p = params(model)
    assert option_value(2, 1, p) == pytest.approx((1 - 0.2 - 0.5) * 40.0, abs=1e-12)


def test_reservation_prices():
    assert reservation_price(2, 2, HALF) == pytest.approx(18.0, abs=1e-12)
    assert reservation_price(2, 3, HALF) == pytest.approx(26.1, abs=1e-12)
    assert reservation_price(3, 3, HALF) == pytest.approx(8.1, abs=1e-12)
    assert reservation_price(2, 2, POISSON) == pytest.approx(20.08767022409144, abs=1e-10)
    for n in range(2, 6):
        assert reservation_price(n, 1, HALF) == 0.0


def test_reservation_price_domain():
    with pytest.raises(InvalidParameterError):
        reservation_price(1, 3, HALF)
    with pytest.raises(InvalidParameterError):
        reservation_price(2, 0, HALF)
    no_demand = params(make_explicit((1.0,)))
    with pytest.raises(DegenerateDemandError):
        reservation_price(2, 2, no_demand)


def test_table_is_read_only_and_csv_shape():
    table = ValueTable(params(make_bernoulli(0.5), n=1, t=2))
    with pytest.raises(ValueError):
        table.values[1, 1] = 3.0
    lines = table.to_csv().splitlines()
    assert lines[0] == "n,t,value,reservation_price"
    assert lines[2] == "1,1,20.0,"


def test_params_validation():
    with pytest.raises(InvalidParameterError):
        params(make_bernoulli(0.5), n=0)
    with pytest.raises(InvalidParameterError):
        params(make_bernoulli(0.5), delta=0.0)
    with pytest.raises(InvalidParameterError):
        params(make_bernoulli(0.5), pbar=-1.0)


demands = st.one_of(
    st.floats(0.05, 0.95).map(make_bernoulli),
    st.floats(0.1, 3.0).map(make_poisson),
    st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5).map(lambda xs: make_explicit([x / sum(xs) for x in xs])),
)


@settings(max_examples=40, deadline=None)
@given(demand=demands, delta=st.floats(0.5, 0.99), n=st.integers(1, 4), t=st.integers(1, 6))
def test_table_matches_exact_recursion(demand, delta, n, t):
    p = params(demand, n=n, t=t, delta=delta)
    exact, _, _ = exact_values(demand.pmf, delta, 40.0, n, t)
    table = ValueTable(p)
    for (k, s), v in exact.items():
        assert table.value(k, s) == pytest.approx(float(v), rel=1e-12, abs=1e-12)
    if n >= 2:
        assert table.reservation_price(n, t) == pytest.approx(
            float(exact_reservation(demand.pmf, delta, 40.0, n, t)), rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(demand=demands, delta=st.floats(0.5, 1.0), n=st.integers(2, 5), t=st.integers(2, 8))
def test_value_monotonicity(demand, delta, n, t):
    table = ValueTable(params(demand, n=n, t=t, delta=delta))
    v = table.values[1:, :]
    assert np.all(np.diff(v, axis=1) >= -1e-12)   # more time never hurts
    assert np.all(np.diff(v, axis=0) <= 1e-12)    # more rivals never help
    assert np.all((v >= 0) & (v <= 40.0 + 1e-12))


@settings(max_examples=40, deadline=None)
@given(demand=demands, delta=st.floats(0.5, 0.99), n=st.integers(2, 5), t=st.integers(1, 8))
def test_reservation_makes_sale_and_deferral_equivalent(demand, delta, n, t):
    table = ValueTable(params(demand, n=n, t=t, delta=delta))
    q0 = demand.prob(0)
    lhs = (1 - q0) * table.reservation_price(n, t)
    rhs = table.value(n, t) - q0 * delta * table.value(n, t - 1)
    assert lhs == pytest.approx(rhs, abs=1e-10)


@pytest.mark.parametrize("demand", [make_bernoulli(q) for q in (0.2, 0.4, 0.6, 0.8)] + [make_poisson(0.5)])
def test_monopolist_closed_form_agrees_with_recursion(demand):
    p = params(demand, n=1, t=200)
    table = ValueTable(p)
    assert max(abs(monopolist_value(t, p) - table.value(1, t)) for t in range(201)) <= 1e-12


def test_infinite_horizon_closed_form():
    ih = infinite_horizon(params(make_bernoulli(0.5), n=3))
    assert ih.value(1) == pytest.approx(400 / 11, abs=1e-12)
    assert ih.reservation_price(2) == pytest.approx(360 / 11, abs=1e-12)
    assert ih.reservation_prices[0] is None
    v, r = infinite_horizon_value(1, HALF)
    assert r is None and v == pytest.approx(36.36363636363636, abs=1e-12)


@pytest.mark.parametrize("demand", [make_bernoulli(0.3), make_poisson(0.5), make_explicit((0.3, 0.4, 0.3))])
def test_value_iteration_single_seller(demand):
    p = params(demand, n=1)
    q0 = demand.prob(0)
    closed = (1 - q0) * 40.0 / (1 - q0 * 0.9)
    assert value_iteration(1, p)[0] == pytest.approx(closed, abs=1e-10)


def test_value_iteration_matches_bernoulli_closed_form():
    p = params(make_bernoulli(0.4), n=4)
    assert np.allclose(value_iteration(4, p), infinite_horizon(p).values, atol=1e-10, rtol=0)


def test_finite_horizon_approaches_limit():
    p = params(make_poisson(0.5), n=3, t=400)
    table = ValueTable(p)
    ih = infinite_horizon(p)
    for n in (1, 2, 3):
        assert table.value(n, 400) == pytest.approx(ih.value(n), abs=1e-10)


def test_undiscounted_has_no_fixed_point():
    with pytest.raises(NoFixedPointError):
        infinite_horizon(params(make_bernoulli(0.5), delta=1.0))
    with pytest.raises(NoFixedPointError):
        infinite_horizon_value(2, params(make_poisson(0.5), delta=1.0))


def test_undiscounted_monopolist_value():
    p = params(make_bernoulli(0.5), n=1, delta=1.0)
    assert monopolist_value(3, p) == pytest.approx(40.0 * (1 - 0.5**3), abs=1e-12)
    assert math.isclose(option_value(1, 3, p), monopolist_value(3, p), abs_tol=1e-12)
