import json

import numpy as np
import pytest

from ptmarket import (
    ACTIONS,
    PQRParams,
    PriceAgent,
    PriceGrid,
    ProsumerProfile,
    ValidationError,
    admissible_actions,
    greedy_action,
    greedy_rollout,
    make_rng,
    pqr_step,
    q_update,
    restore,
    select_action,
    seller_reward,
    snapshot,
    td_error,
    train_stationary,
)

# noinspection PyUnresolvedReferences
from .util import approx, make_period, profile


def _agent(state=3, params=PQRParams(), grid=None, p=None, seed=0, seller_id=1):
    grid = PriceGrid(0.06, 0.12, 0.01) if grid is None else grid
    p = profile(seller_id) if p is None else p
    return PriceAgent(seller_id, p, grid, params, state, make_rng(seed, 1, seller_id))


def test_grid():
    grid = PriceGrid(0.06, 0.12, 0.001)
    assert grid.size == 61
    assert grid.states[0] == 0.06
    assert grid.states[-1] == 0.12
    approx(np.diff(grid.states), 0.001 * np.ones(60))
    assert grid.index(0.09) == 30
    assert grid.price(30) == pytest.approx(0.09)
    assert grid.snap(0.0904) == 30
    assert grid.snap(0.2) == 60
    assert grid.snap(0.0) == 0
    with pytest.raises(ValueError):
        grid.index(0.0905)
    with pytest.raises(ValueError):
        grid.price(61)


@pytest.mark.parametrize(
    "args", [(0.06, 0.12, 0.007), (0.12, 0.06, 0.01), (0, 0.12, 0.01)]
)
def test_grid_validation(args):
    with pytest.raises(ValidationError):
        PriceGrid(*args)


@pytest.mark.parametrize(
    "kw_args",
    [
        {"alpha": -1},
        {"gamma": 1},
        {"delta": 0},
        {"epsilon": 1.5},
        {"epsilon_decay": 1.1},
    ],
)
def test_params_validation(kw_args):
    with pytest.raises(ValidationError):
        PQRParams(**kw_args)


def test_agent():
    agent = _agent()
    assert agent.q.shape == (7, 3)
    assert np.all(agent.q == 0)
    assert agent.price == pytest.approx(0.09)
    agent.decay()
    assert agent.epsilon == pytest.approx(0.965)


def test_admissible_actions():
    agent = _agent()
    assert admissible_actions(agent, 3) == [0, 1, 2]
    assert admissible_actions(agent, 0) == [0, 2]
    assert admissible_actions(agent, 6) == [1, 2]


def test_select_action_greedy():
    agent = _agent(params=PQRParams(epsilon=0))
    agent.q[3] = [1, 0, 0]
    assert ACTIONS[select_action(agent, 3)] == 1
    agent.q[3] = [0, 0, 1]
    assert ACTIONS[select_action(agent, 3)] == 0

    # Ties go to the first action in order.
    assert greedy_action(agent, 2) == 0
    assert greedy_action(agent, 6) == 1

    # The increase at the top of the grid is never chosen, however valuable.
    agent.q[6] = [10, 0, 0]
    assert ACTIONS[greedy_action(agent, 6)] != 1


def test_select_action_boundaries():
    agent = _agent()
    for _ in range(1000):
        assert ACTIONS[select_action(agent, 6)] != 1
        assert ACTIONS[select_action(agent, 0)] != -1


def test_select_action_uniform():
    agent = _agent()
    n = 30_000
    counts = np.bincount([select_action(agent, 3) for _ in range(n)], minlength=3)
    sigma = np.sqrt((1 / 3) * (2 / 3) / n)
    assert np.all(np.abs(counts / n - 1 / 3) < 4 * sigma)


def test_select_action_explicit_rng():
    agent = _agent()
    rng1, rng2 = make_rng(5), make_rng(5)
    a1 = [select_action(agent, 3, rng1) for _ in range(20)]
    a2 = [select_action(agent, 3, rng2) for _ in range(20)]
    assert a1 == a2
    # The agent's own generator is untouched.
    assert agent.rng.random() == make_rng(0, 1, 1).random()


def test_seller_reward():
    period = make_period([8], [10], [0.10])
    assert seller_reward(0, 0, np.zeros((1, 1)), period) == 0
    assert seller_reward(0, 0, np.ones((1, 1)), period) == pytest.approx(0.8)
    assert seller_reward(0, 0.001, np.ones((1, 1)), period) == pytest.approx(0.808)


def test_td_error():
    agent = _agent(params=PQRParams(gamma=0.9))
    assert td_error(agent, 3, 0, 4, 0.3) == pytest.approx(0.3)
    agent.q[3, 0] = 0.5
    agent.q[4] = [0.2, 1.0, 0.1]
    assert td_error(agent, 3, 0, 4, 0.2) == pytest.approx(0.6)

    agent = _agent(params=PQRParams(gamma=0))
    agent.q[3, 1] = 0.7
    assert td_error(agent, 3, 1, 2, 0) == pytest.approx(-0.7)


def test_td_error_bootstrap_admissible():
    agent = _agent(params=PQRParams(gamma=0.5))
    # The increase is inadmissible at the top and does not bootstrap.
    agent.q[6] = [10, 1, 2]
    assert td_error(agent, 5, 0, 6, 0) == pytest.approx(1)


def test_q_update():
    p = ProsumerProfile(1, 2.4, 2.2, 0.7, 0.8, 0.1)
    agent = _agent(params=PQRParams(alpha=1e-4), p=p)
    q_update(agent, 3, 0, 0)
    assert np.all(agent.q == 0)
    q_update(agent, 3, 0, 1)
    assert agent.q[3, 0] == pytest.approx(1e-4 * 2.4)
    assert np.sum(agent.q != 0) == 1

    agent = _agent(params=PQRParams(alpha=0))
    q_update(agent, 3, 0, 5)
    assert np.all(agent.q == 0)


def _market(x_second_row):
    period = make_period([10, 5], [20, 20], [0.09, 0.1])
    agents = {
        p.id: _agent(state=PriceGrid(0.06, 0.12, 0.01).index(rho), seller_id=p.id)
        for p, _, rho in period.sellers
    }
    x = np.array([[0.5, 0.2], x_second_row])
    return agents, x, period


def test_pqr_step():
    agents, x, period = _market([0.1, 0.3])
    prices, rewards = pqr_step(agents, x, period)
    for i, (p, _, rho) in enumerate(period.sellers):
        agent = agents[p.id]
        assert prices[i] == agent.price
        moves = abs(agent.price - rho) / 0.01
        assert moves == pytest.approx(round(moves), abs=1e-9)
        assert round(moves) <= 1
        assert agent.epsilon == pytest.approx(0.965)
        sold = x[i] @ period.demands
        assert rewards[i] == pytest.approx(prices[i] * sold)


def test_pqr_step_greedy_ties():
    period = make_period([10], [20], [0.09])
    agents = {1: _agent(params=PQRParams(epsilon=0), seller_id=1)}
    x = np.array([[0.5]])
    prices = []
    for _ in range(3):
        (price,), _ = pqr_step(agents, x, period.with_prices([agents[1].price]))
        prices.append(price)
    # Every visited price is new, so ties send the price up.
    approx(prices, [0.1, 0.11, 0.12])


def test_pqr_step_isolation():
    agents1, x1, period = _market([0.1, 0.3])
    agents2, x2, _ = _market([0.4, 0.0])
    pqr_step(agents1, x1, period)
    pqr_step(agents2, x2, period)
    seller = period.seller_profiles[0].id
    approx(agents1[seller].q, agents2[seller].q, rtol=0, atol=0)
    assert agents1[seller].state == agents2[seller].state


def test_pqr_step_stays_on_grid():
    period = make_period([10], [20], [0.12])
    agents = {1: _agent(state=6, seller_id=1, params=PQRParams(epsilon_decay=1))}
    grid = agents[1].grid
    for _ in range(200):
        period = period.with_prices([agents[1].price])
        pqr_step(agents, np.array([[0.5]]), period)
        assert grid.states[agents[1].state] == agents[1].price
        assert 0.06 <= agents[1].price <= 0.12


def test_pqr_step_price_mismatch():
    agents, x, period = _market([0.1, 0.3])
    agents[period.seller_profiles[0].id].state = 0
    with pytest.raises(RuntimeError):
        pqr_step(agents, x, period)


def test_exploration_decay():
    agent = _agent(params=PQRParams(epsilon_decay=0.9))
    epsilons = []
    train_stationary(agent, np.ones(7), 0)
    for _ in range(5):
        train_stationary(agent, np.ones(7), 1)
        epsilons.append(agent.epsilon)
    approx(epsilons, 0.9 ** np.arange(1, 6))


def test_train_stationary_shape():
    with pytest.raises(ValueError):
        train_stationary(_agent(), np.ones(3), 10)


def test_reduction_to_q_learning():
    grid = PriceGrid(0.06, 0.12, 0.01)
    params = PQRParams(alpha=0.1, gamma=0.9, delta=0.01)
    agent = _agent(params=params, grid=grid)
    sold = np.linspace(20, 5, grid.size)
    s0 = agent.state
    actions = train_stationary(agent, sold, 1000)

    # Plain tabular Q-learning along the same trajectory.
    q = np.zeros((grid.size, 3))
    s = s0
    for a in actions:
        s_new = s + ACTIONS[a]
        r = (grid.price(s) + ACTIONS[a] * grid.delta) * sold[s]
        allowed = [
            b for b, move in enumerate(ACTIONS) if 0 <= s_new + move < grid.size
        ]
        target = r + params.gamma * q[s_new, allowed].max()
        q[s, a] += params.alpha * (target - q[s, a])
        s = s_new

    approx(agent.q, q, rtol=0, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize(
    "sold, optimum",
    [
        # Fixed demand: the highest price maximises revenue.
        ([10, 10, 10], 2),
        # Price-dependent demand with its revenue maximiser in the middle.
        ([20, 16, 4], 1),
    ],
)
def test_train_stationary_optimal(seed, sold, optimum):
    grid = PriceGrid(0.06, 0.12, 0.03)
    sold = np.array(sold, dtype=float)
    assert np.argmax(grid.states * sold) == optimum

    p = ProsumerProfile(0, 2.3, 2.4, 0.75, 0.8, 0.1)
    params = PQRParams(alpha=0.05, gamma=0.9, delta=0.03, epsilon_decay=1)
    agent = _agent(state=0, params=params, grid=grid, p=p, seed=seed)
    train_stationary(agent, sold, 30_000)

    for s in range(grid.size):
        path = greedy_rollout(agent, s, 4)
        assert path[-1] == optimum
        assert path[-2] == optimum


@pytest.mark.xfail(
    reason="Exploration falls below 1% within 130 steps at a decay of 0.965 per step. "
    "The zero-initialised Q-table and the tie order then keep the greedy policy "
    "raising the price, so it ends between 0.09 and 0.12 instead of at 0.08.",
    strict=False,
)
@pytest.mark.parametrize("seed", range(5))
def test_train_stationary_optimal_decaying(seed):
    grid = PriceGrid(0.06, 0.12, 0.01)
    sold = np.maximum(32 - 200 * grid.states, 0)
    optimum = int(np.argmax(grid.states * sold))
    assert grid.price(optimum) == pytest.approx(0.08)

    p = ProsumerProfile(0, 2.3, 2.4, 0.75, 0.8, 0.1)
    params = PQRParams(alpha=1e-2, gamma=0.9, delta=0.01, epsilon_decay=0.965)
    agent = _agent(state=grid.size - 1, params=params, grid=grid, p=p, seed=seed)
    train_stationary(agent, sold, 5_000)

    for s in range(grid.size):
        assert greedy_rollout(agent, s, 2 * grid.size)[-1] == optimum


def test_snapshot_restore():
    agent = _agent(p=ProsumerProfile(1, 2.4, 2.2, 0.7, 0.8, 0.1))
    train_stationary(agent, np.linspace(10, 5, 7), 50)
    restored = restore(json.loads(json.dumps(snapshot(agent))))

    approx(restored.q, agent.q, rtol=0, atol=0)
    assert restored.epsilon == agent.epsilon
    assert restored.state == agent.state
    assert restored.grid == agent.grid
    assert restored.profile == agent.profile

    # Both continue identically.
    sold = np.linspace(10, 5, 7)
    assert train_stationary(agent, sold, 50) == train_stationary(restored, sold, 50)
    approx(restored.q, agent.q, rtol=0, atol=0)


def test_restore_errors():
    d = snapshot(_agent())
    with pytest.raises(ValidationError):
        restore({**d, "version": 0})
    with pytest.raises(ValidationError):
        restore({**d, "q": [[0, 0, 0]]})
    with pytest.raises(ValidationError):
        restore({k: v for k, v in d.items() if k != "grid"})
