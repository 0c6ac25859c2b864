import lab as B
import numpy as np
import pytest
from numpy.testing import assert_allclose

from ptmarket import (
    MarketPeriod,
    ProsumerProfile,
    SimulationConfig,
    make_rng,
    sample_period,
)

__all__ = [
    "approx",
    "profile",
    "make_period",
    "random_period",
    "brute_feasible",
    "small_config",
    "config",
]


def approx(x, y, **kw_args):
    assert_allclose(B.to_numpy(x), B.to_numpy(y), **kw_args)


def profile(id, k=1.0, zeta=1.0, ref_price=0.1):
    """Profile with symmetric prospect-theory parameters."""
    return ProsumerProfile(
        id=id,
        k_plus=k,
        k_minus=k,
        zeta_plus=zeta,
        zeta_minus=zeta,
        ref_price=ref_price,
    )


def make_period(demands, surpluses, prices, loss=None, ref_prices=None, **kw_args):
    """Hand-crafted period. Buyers get ids `0, ..., n_b - 1` and sellers the ids
    after."""
    n_b, n_s = len(demands), len(surpluses)
    if ref_prices is None:
        ref_prices = [0.1] * n_b
    if loss is None:
        loss = np.zeros((n_s, n_b))
    kw_args = {"l_max": 0.025, "rho_gb": 0.06, "rho_gs": 0.12, **kw_args}
    return MarketPeriod(
        period_index=0,
        buyers=[
            (profile(j, ref_price=ref), w)
            for j, (w, ref) in enumerate(zip(demands, ref_prices))
        ],
        sellers=[
            (profile(n_b + i), r, rho)
            for i, (r, rho) in enumerate(zip(surpluses, prices))
        ],
        loss=loss,
        **kw_args,
    )


def random_period(seed, n_buyers, n_sellers):
    """Period sampled like the instances of the convergence analysis."""
    return sample_period(
        SimulationConfig(), n_buyers, n_sellers, make_rng(seed, 99, n_buyers)
    )


def brute_feasible(x, period, tol=1e-9):
    """Check all constraints entry by entry."""
    x = np.asarray(x)
    for i in range(period.n_sellers):
        load = 0
        for j in range(period.n_buyers):
            if not 0 <= x[i, j] <= 1:
                return False
            if period.loss[i, j] >= period.l_max and x[i, j] != 0:
                return False
            load += (1 + period.loss[i, j]) * x[i, j] * period.demands[j]
        if load > period.surpluses[i] + tol:
            return False
    for j in range(period.n_buyers):
        if sum(x[i, j] for i in range(period.n_sellers)) > 1 + tol:
            return False
    return True


def small_config(**changes):
    """Configuration that simulates quickly."""
    values = {
        "horizon": 6,
        "n_buyers": 3,
        "n_sellers": 3,
        "pop_size": 6,
        "g_max": 20,
        "delta": 0.01,
        "alpha": 0.1,
    }
    values.update(changes)
    return SimulationConfig(**values)


@pytest.fixture()
def config():
    return small_config()
