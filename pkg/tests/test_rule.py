import numpy as np
import pytest

from ptmarket import MarketPeriod, feasible, rule_allocate

# noinspection PyUnresolvedReferences
from .util import approx, brute_feasible, make_period, profile, random_period


def test_single_dominant_seller():
    period = make_period([3, 4], [100], [0.08])
    x, prices = rule_allocate(period)
    approx(x, [[1, 1]])
    approx(prices, [[0.09, 0.09]])


def test_cheapest_first():
    period = make_period([5, 4], [5, 10], [0.07, 0.11])
    x, prices = rule_allocate(period)
    approx(x, [[1, 0], [0, 1]])
    approx(prices, [[0.085, 0], [0, 0.105]])


def test_midpoint_uses_buyer_reference():
    period = make_period([5, 5], [100], [0.08], ref_prices=[0.1, 0.12])
    _, prices = rule_allocate(period)
    approx(prices, [[0.09, 0.1]])


def test_partial_and_order():
    period = make_period([8, 8], [10], [0.1])
    x, _ = rule_allocate(period)
    # The buyer registered first is served first.
    approx(x, [[1, 0.25]])


def _registered(buyer_ids):
    return MarketPeriod(
        period_index=0,
        buyers=[(profile(buyer_ids[0]), 8), (profile(buyer_ids[1]), 4)],
        sellers=[(profile(2), 8, 0.07), (profile(3), 100, 0.11)],
        loss=np.zeros((2, 2)),
        l_max=0.025,
        rho_gb=0.06,
        rho_gs=0.12,
    )


def test_registration_order_matters():
    # The large buyer takes all cheap energy when it registered first.
    x, _ = rule_allocate(_registered([0, 1]))
    approx(x, [[1, 0], [0, 1]])
    # Otherwise the small buyer gets half of it first.
    x, _ = rule_allocate(_registered([1, 0]))
    approx(x, [[0.5, 1], [0.5, 0]])


def test_capacity_accounts_for_losses():
    period = make_period([10], [5.05], [0.1], loss=[[0.01]])
    x, _ = rule_allocate(period)
    approx(x, [[0.5]])
    assert feasible(x, period)


def test_excluded_pairs():
    period = make_period([5], [100, 100], [0.07, 0.09], loss=[[0.03], [0]])
    x, prices = rule_allocate(period)
    approx(x, [[0], [1]])
    assert prices[0, 0] == 0


def test_price_ties_by_id():
    period = make_period([5], [10, 10], [0.09, 0.09])
    x, _ = rule_allocate(period)
    approx(x, [[1], [0]])


def test_degenerate():
    x, prices = rule_allocate(make_period([5], [], []))
    assert x.shape == prices.shape == (0, 1)
    x, _ = rule_allocate(make_period([], [5], [0.1]))
    assert x.shape == (1, 0)


@pytest.mark.parametrize("seed", range(10))
def test_feasible(seed):
    period = random_period(seed, 6, 4)
    x, prices = rule_allocate(period)
    assert brute_feasible(x, period)
    assert feasible(x, period)
    traded = x > 0
    assert np.all(prices[traded] >= period.rho_gb)
    assert np.all(prices[traded] <= period.rho_gs)
    assert np.all(prices[~traded] == 0)
