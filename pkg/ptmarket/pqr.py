from dataclasses import asdict, dataclass

import lab as B
import numpy as np

from .market import ProsumerProfile, seller_value
from .util import ValidationError

__all__ = [
    "ACTIONS",
    "PQRParams",
    "PriceGrid",
    "PriceAgent",
    "admissible_actions",
    "select_action",
    "greedy_action",
    "greedy_rollout",
    "seller_reward",
    "td_error",
    "q_update",
    "pqr_step",
    "train_stationary",
    "SNAPSHOT_VERSION",
    "snapshot",
    "restore",
]

#: Price moves in units of the grid step: increase, decrease, and no change. The order
#: is also the order in which ties are broken.
ACTIONS = (1, -1, 0)


@dataclass(frozen=True)
class PQRParams:
    """Parameters of the risk-sensitive Q-learning price agents.

    Args:
        alpha (float, optional): Learning rate. Defaults to `1e-4`.
        gamma (float, optional): Discount factor. Defaults to `0.9`.
        delta (float, optional): Price step. Defaults to `0.001`.
        epsilon (float, optional): Initial exploration probability. Defaults to `1`.
        epsilon_decay (float, optional): Factor applied to the exploration probability
            after every period. Defaults to `0.965`.
    """

    alpha: float = 1e-4
    gamma: float = 0.9
    delta: float = 0.001
    epsilon: float = 1.0
    epsilon_decay: float = 0.965

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValidationError(f"Learning rate {self.alpha} must be non-negative.")
        if not 0 <= self.gamma < 1:
            raise ValidationError(f"Discount factor {self.gamma} not in [0, 1).")
        if not self.delta > 0:
            raise ValidationError(f"Price step {self.delta} must be positive.")
        if not 0 <= self.epsilon <= 1:
            raise ValidationError(f"Exploration {self.epsilon} not in [0, 1].")
        if not 0 <= self.epsilon_decay <= 1:
            raise ValidationError(f"Decay {self.epsilon_decay} not in [0, 1].")


@dataclass(frozen=True)
class PriceGrid:
    """Prices from `rho_gb` to `rho_gs` in steps of `delta`.

    Args:
        rho_gb (float): Lowest price.
        rho_gs (float): Highest price.
        delta (float): Step.
    """

    rho_gb: float
    rho_gs: float
    delta: float

    def __post_init__(self):
        if not 0 < self.rho_gb < self.rho_gs:
            raise ValidationError("Price grid requires 0 < rho_gb < rho_gs.")
        steps = (self.rho_gs - self.rho_gb) / self.delta
        if abs(steps - round(steps)) > 1e-6:
            raise ValidationError(
                f"Price step {self.delta} does not divide "
                f"[{self.rho_gb}, {self.rho_gs}]."
            )

    @property
    def size(self):
        """int: Number of prices."""
        return int(round((self.rho_gs - self.rho_gb) / self.delta)) + 1

    @property
    def states(self):
        """vector: All prices."""
        return np.array([self.price(m) for m in range(self.size)])

    def price(self, m):
        """Price of grid index `m`.

        Args:
            m (int): Index.

        Returns:
            float: Price. The last index gives exactly `rho_gs`.
        """
        if not 0 <= m < self.size:
            raise ValueError(f"Grid index {m} is out of range [0, {self.size}).")
        if m == self.size - 1:
            return self.rho_gs
        return self.rho_gb + m * self.delta

    def index(self, price):
        """Grid index of a price on the grid.

        Args:
            price (float): Price.

        Returns:
            int: Index.
        """
        m = self.snap(price)
        if abs(self.price(m) - price) > 1e-9:
            raise ValueError(f"Price {price} does not lie on the grid.")
        return m

    def snap(self, price):
        """Index of the grid price closest to `price`.

        Args:
            price (float): Price.

        Returns:
            int: Index.
        """
        m = int(round((price - self.rho_gb) / self.delta))
        return min(max(m, 0), self.size - 1)


class PriceAgent:
    """Tabular risk-sensitive Q-learner that sets the price of one seller.

    Args:
        seller_id (int): Id of the seller.
        profile (:class:`.ProsumerProfile`): Seller, whose prospect-theory parameters
            transform the TD errors.
        grid (:class:`.PriceGrid`): Price grid.
        params (:class:`.PQRParams`): Learning parameters.
        state (int): Grid index of the current price.
        rng (:class:`numpy.random.Generator`): Random number generator owned by the
            agent.
    """

    def __init__(self, seller_id, profile, grid, params, state, rng):
        self.seller_id = seller_id
        self.profile = profile
        self.grid = grid
        self.alpha = params.alpha
        self.gamma = params.gamma
        self.epsilon = params.epsilon
        self.epsilon_decay = params.epsilon_decay
        self.state = int(state)
        self.rng = rng
        self.q = np.zeros((grid.size, len(ACTIONS)), dtype=np.float64)

    @property
    def price(self):
        """float: Current price."""
        return self.grid.price(self.state)

    def decay(self):
        """Decay the exploration probability once."""
        self.epsilon *= self.epsilon_decay


def admissible_actions(agent, s):
    """Actions that keep the price on the grid.

    Args:
        agent (:class:`.PriceAgent`): Agent.
        s (int): Grid index of the price.

    Returns:
        list[int]: Indices into :data:`.ACTIONS`.
    """
    return [a for a, move in enumerate(ACTIONS) if 0 <= s + move < agent.grid.size]


def greedy_action(agent, s):
    """Admissible action with the highest value, ties broken in the order of
    :data:`.ACTIONS`.

    Args:
        agent (:class:`.PriceAgent`): Agent.
        s (int): Grid index of the price.

    Returns:
        int: Index into :data:`.ACTIONS`.
    """
    actions = admissible_actions(agent, s)
    return actions[int(np.argmax(agent.q[s, actions]))]


def select_action(agent, s, rng=None):
    """Epsilon-greedy action selection over the admissible actions.

    Args:
        agent (:class:`.PriceAgent`): Agent.
        s (int): Grid index of the price.
        rng (:class:`numpy.random.Generator`, optional): Random number generator.
            Defaults to the agent's generator.

    Returns:
        int: Index into :data:`.ACTIONS`.
    """
    rng = agent.rng if rng is None else rng
    if rng.random() < agent.epsilon:
        actions = admissible_actions(agent, s)
        return actions[int(rng.integers(len(actions)))]
    return greedy_action(agent, s)


def greedy_rollout(agent, s, steps):
    """Follow the greedy policy without learning.

    Args:
        agent (:class:`.PriceAgent`): Agent.
        s (int): Initial grid index.
        steps (int): Number of steps.

    Returns:
        list[int]: Visited grid indices, starting with `s`.
    """
    path = [s]
    for _ in range(steps):
        s = s + ACTIONS[greedy_action(agent, s)]
        path.append(s)
    return path


def seller_reward(i, change, x, period):
    """Revenue of seller `i` at its price after a price change.

    Args:
        i (int): Index of the seller in the period.
        change (float): Price change.
        x (matrix): Executed allocation.
        period (:class:`.MarketPeriod`): Period.

    Returns:
        float: Revenue.
    """
    sold = B.sum(np.asarray(x)[i, :] * period.demands)
    return float((period.prices[i] + change) * sold)


def td_error(agent, s, a, s_new, r):
    """Temporal-difference error of a transition.

    Args:
        agent (:class:`.PriceAgent`): Agent.
        s (int): Grid index before the transition.
        a (int): Index of the action.
        s_new (int): Grid index after the transition.
        r (float): Reward.

    Returns:
        float: TD error. The bootstrap maximises over the actions admissible at
            `s_new`.
    """
    bootstrap = B.max(agent.q[s_new, admissible_actions(agent, s_new)])
    return float(r + agent.gamma * bootstrap - agent.q[s, a])


def q_update(agent, s, a, y):
    """Move `Q(s, a)` by the learning rate times the perceived TD error.

    Args:
        agent (:class:`.PriceAgent`): Agent, which is updated in place.
        s (int): Grid index.
        a (int): Index of the action.
        y (float): TD error.

    Returns:
        :class:`.PriceAgent`: The agent.
    """
    agent.q[s, a] += agent.alpha * seller_value(y, agent.profile)
    return agent


def _transition(agent, reward):
    # One learning step from the agent's current state. `reward` maps the price change
    # to the reward.
    s = agent.state
    a = select_action(agent, s)
    s_new = s + ACTIONS[a]
    r = reward(ACTIONS[a] * agent.grid.delta)
    q_update(agent, s, a, td_error(agent, s, a, s_new, r))
    agent.state = s_new
    return a, r


def pqr_step(agents, x, period):
    """Update the prices of all sellers of a period.

    Every seller learns from its own row of the allocation only, using its own random
    number generator, in the order of the sellers in the period. Afterwards the
    exploration probability of every agent is decayed once.

    Args:
        agents (dict[int, :class:`.PriceAgent`]): Agents by prosumer id. Must include
            all sellers of the period.
        x (matrix): Executed allocation.
        period (:class:`.MarketPeriod`): Period. Posted prices must equal the agents'
            prices.

    Returns:
        tuple[vector, vector]: New prices and rewards of the sellers of the period.
    """
    prices = np.empty(period.n_sellers)
    rewards = np.empty(period.n_sellers)
    for i, profile in enumerate(period.seller_profiles):
        agent = agents[profile.id]
        if agent.grid.index(period.prices[i]) != agent.state:
            raise RuntimeError(
                f"Posted price {period.prices[i]} of seller {profile.id} differs "
                f"from the price {agent.price} of its agent."
            )

        def reward(change, i=i):
            return seller_reward(i, change, x, period)

        _, rewards[i] = _transition(agent, reward)
        prices[i] = agent.price
    for agent in agents.values():
        agent.decay()
    return prices, rewards


def train_stationary(agent, sold, steps):
    """Train an agent in an environment where the energy sold at every price is fixed.

    Args:
        agent (:class:`.PriceAgent`): Agent, which is updated in place.
        sold (vector): Energy sold at every grid price.
        steps (int): Number of steps. The exploration probability decays after every
            step.

    Returns:
        list[int]: Actions taken.
    """
    sold = np.asarray(sold, dtype=np.float64)
    if B.shape(sold) != (agent.grid.size,):
        raise ValueError(
            f"Expected sold energy for {agent.grid.size} prices, "
            f"got shape {B.shape(sold)}."
        )
    actions = []
    for _ in range(steps):
        def reward(change, s=agent.state):
            return (agent.grid.price(s) + change) * sold[s]

        a, _ = _transition(agent, reward)
        actions.append(a)
        agent.decay()
    return actions


#: Version of the format produced by :func:`.snapshot`.
SNAPSHOT_VERSION = 1


def snapshot(agent):
    """Capture everything needed to continue learning exactly where an agent is.

    Args:
        agent (:class:`.PriceAgent`): Agent.

    Returns:
        dict: Snapshot consisting of only built-in types.
    """
    return {
        "version": SNAPSHOT_VERSION,
        "seller_id": agent.seller_id,
        "profile": asdict(agent.profile),
        "grid": asdict(agent.grid),
        "alpha": agent.alpha,
        "gamma": agent.gamma,
        "epsilon": agent.epsilon,
        "epsilon_decay": agent.epsilon_decay,
        "state": agent.state,
        "q": agent.q.tolist(),
        "rng": agent.rng.bit_generator.state,
    }


def restore(d):
    """Reconstruct an agent from a snapshot.

    Args:
        d (dict): Snapshot produced by :func:`.snapshot`.

    Returns:
        :class:`.PriceAgent`: Agent.
    """
    if d.get("version") != SNAPSHOT_VERSION:
        raise ValidationError(
            f"Unsupported agent snapshot version {d.get('version')}; "
            f"expected {SNAPSHOT_VERSION}."
        )
    try:
        grid = PriceGrid(**d["grid"])
        params = PQRParams(
            alpha=d["alpha"],
            gamma=d["gamma"],
            delta=grid.delta,
            epsilon=d["epsilon"],
            epsilon_decay=d["epsilon_decay"],
        )
        bit_generator = getattr(np.random, d["rng"]["bit_generator"])()
        bit_generator.state = d["rng"]
        agent = PriceAgent(
            d["seller_id"],
            ProsumerProfile(**d["profile"]),
            grid,
            params,
            d["state"],
            np.random.Generator(bit_generator),
        )
        q = np.array(d["q"], dtype=np.float64)
    except (KeyError, TypeError, AttributeError) as e:
        raise ValidationError(f"Malformed agent snapshot: {e!r}.") from e
    if B.shape(q) != B.shape(agent.q):
        raise ValidationError(
            f"Q-table of shape {B.shape(q)} does not match the price grid, which "
            f"requires shape {B.shape(agent.q)}."
        )
    if not 0 <= agent.state < grid.size:
        raise ValidationError(f"Price index {agent.state} lies outside the grid.")
    agent.q = q
    return agent
