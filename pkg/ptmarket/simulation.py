import time
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import lab as B
import numpy as np
import pandas as pd
import wbml.out as out

from .debate import debate_run, normalise_trace
from .market import (
    MarketPeriod,
    buyer_costs,
    buyer_values,
    energy_flows,
    feasible,
    sample_profiles,
)
from .pqr import PriceAgent, pqr_step
from .rule import rule_allocate
from .traces import classify_prosumers, synth_traces
from .util import ValidationError, make_rng, moving_average, package_version

__all__ = [
    "MarketState",
    "PeriodResult",
    "SimulationReport",
    "RECORD_COLUMNS",
    "Comparison",
    "build_state",
    "synthetic_traces",
    "sample_period",
    "run_period",
    "run_simulation",
    "compare",
    "advantage_by_size",
    "convergence",
]

# Random number streams derived from the master seed.
_STREAM_STATE = 0
_STREAM_AGENT = 1
_STREAM_DEBATE = 2
_STREAM_TRACES = 3
_STREAM_INSTANCE = 4
_STREAM_CONVERGENCE = 5

#: Window of the moving averages in the reports.
WINDOW = 10


class MarketState:
    """Everything that carries over from one period to the next.

    Args:
        ids (list[str]): Prosumer ids in registration order.
        profiles (list[:class:`.ProsumerProfile`]): Profiles in registration order.
            The id of a profile is its registration index.
        loss (matrix): Loss fraction between every pair of prosumers.
        agents (dict[int, :class:`.PriceAgent`]): Price agent of every prosumer.
        t (int, optional): Next period. Defaults to `0`.
    """

    def __init__(self, ids, profiles, loss, agents, t=0):
        self.ids = list(ids)
        self.profiles = list(profiles)
        self.loss = np.array(loss, dtype=np.float64)
        self.agents = agents
        self.t = t

    def __len__(self):
        return len(self.ids)

    @property
    def prices(self):
        """vector: Posted price of every prosumer."""
        return np.array([self.agents[i].price for i in range(len(self))])

    @property
    def grid(self):
        """:class:`.PriceGrid`: Price grid shared by the agents."""
        return self.agents[0].grid


def _grid_range(grid, bounds):
    # Grid indices of the prices within `bounds`.
    lo = int(np.ceil((bounds[0] - grid.rho_gb) / grid.delta - 1e-9))
    hi = int(np.floor((bounds[1] - grid.rho_gb) / grid.delta + 1e-9))
    lo, hi = max(lo, 0), min(hi, grid.size - 1)
    if lo > hi:
        raise ValidationError(f"No price of the grid lies in {list(bounds)}.")
    return lo, hi


def build_state(config, ids):
    """Build the initial state of a simulation.

    Profiles, losses, and initial prices all come from the stream of the master seed
    reserved for the state, and every agent gets its own stream keyed by its
    registration index.

    Args:
        config (:class:`.SimulationConfig`): Configuration.
        ids (list[str]): Prosumer ids in registration order.

    Returns:
        :class:`.MarketState`: State at the first period.
    """
    n = len(ids)
    if n == 0:
        raise ValidationError("A market needs at least one prosumer.")
    rng = make_rng(config.seed, _STREAM_STATE)
    profiles = sample_profiles(n, config.profile_ranges, rng)
    loss = rng.choice(np.array(config.losses), size=(n, n))
    grid = config.price_grid
    states = rng.integers(
        *_grid_range(grid, config.seller_price_range), endpoint=True, size=n
    )
    agents = {
        i: PriceAgent(
            i,
            profiles[i],
            grid,
            config.pqr_params,
            states[i],
            make_rng(config.seed, _STREAM_AGENT, i),
        )
        for i in range(n)
    }
    return MarketState(ids, profiles, loss, agents)


def synthetic_traces(config):
    """Generate the synthetic traces that a configuration describes.

    Args:
        config (:class:`.SimulationConfig`): Configuration.

    Returns:
        :class:`.TraceSet`: Traces covering the horizon.
    """
    return synth_traces(
        config.n_buyers,
        config.n_sellers,
        config.horizon,
        make_rng(config.seed, _STREAM_TRACES),
        config.synth_params,
    )


def sample_period(config, n_buyers, n_sellers, rng, period_index=0):
    """Sample a single period with fresh prosumers.

    Demands scatter around the daily consumption and surpluses around the daily net
    production of the configuration, so that local supply is scarce.

    Args:
        config (:class:`.SimulationConfig`): Configuration.
        n_buyers (int): Number of buyers.
        n_sellers (int): Number of sellers.
        rng (:class:`numpy.random.Generator`): Random number generator.
        period_index (int, optional): Index of the period. Defaults to `0`.

    Returns:
        :class:`.MarketPeriod`: Period.
    """
    profiles = sample_profiles(n_buyers + n_sellers, config.profile_ranges, rng)
    grid = config.price_grid
    demands = rng.uniform(0.5, 1.5, size=n_buyers) * config.consumption_base
    net = max(config.production_base - config.seller_consumption_base, 1.0)
    surpluses = rng.uniform(0.5, 1.5, size=n_sellers) * net
    states = rng.integers(
        *_grid_range(grid, config.seller_price_range), endpoint=True, size=n_sellers
    )
    return MarketPeriod(
        period_index=period_index,
        buyers=[(profiles[j], float(demands[j])) for j in range(n_buyers)],
        sellers=[
            (profiles[n_buyers + i], float(surpluses[i]), grid.price(int(states[i])))
            for i in range(n_sellers)
        ],
        loss=rng.choice(np.array(config.losses), size=(n_sellers, n_buyers)),
        l_max=config.l_max,
        rho_gb=config.rho_gb,
        rho_gs=config.rho_gs,
    )


@dataclass(frozen=True, eq=False)
class PeriodResult:
    """Outcome of one trading period.

    Buyers and sellers are listed in registration order, and the allocation has the
    sellers as rows and the buyers as columns. Seller rewards are what the price agents
    learn from; under the rule baseline they equal the revenues.
    """

    period_index: int
    buyer_ids: Tuple[str, ...]
    buyer_demands: np.ndarray
    buyer_costs: np.ndarray
    buyer_values: np.ndarray
    seller_ids: Tuple[str, ...]
    seller_surpluses: np.ndarray
    seller_prices: np.ndarray
    next_prices: np.ndarray
    seller_revenues: np.ndarray
    seller_rewards: np.ndarray
    posted_prices: np.ndarray
    allocation: np.ndarray
    fitness: float
    local_energy: float
    losses: float
    grid_import: float
    grid_export: float


def run_period(state, traces, config, trace=False):
    """Clear the next period of a simulation and move the state forward.

    Args:
        state (:class:`.MarketState`): State, which is updated in place.
        traces (:class:`.TraceSet`): Traces.
        config (:class:`.SimulationConfig`): Configuration.
        trace (bool, optional): Report the progress of the allocation solver.
            Defaults to `False`.

    Returns:
        :class:`.PeriodResult`: Outcome of the period.
    """
    t = state.t
    buyers, sellers = classify_prosumers(traces, t)
    b_inds = np.array([i for i, _ in buyers], dtype=int)
    s_inds = np.array([i for i, _ in sellers], dtype=int)
    posted = state.prices
    period = MarketPeriod(
        period_index=t,
        buyers=[(state.profiles[i], w) for i, w in buyers],
        sellers=[(state.profiles[i], r, posted[i]) for i, r in sellers],
        loss=state.loss[np.ix_(s_inds, b_inds)],
        l_max=config.l_max,
        rho_gb=config.rho_gb,
        rho_gs=config.rho_gs,
    )

    if config.strategy == "debate_pqr":
        rng = make_rng(config.seed, _STREAM_DEBATE, t)
        x, _ = debate_run(period, config.debate_params, rng, trace=trace)
        prices = np.broadcast_to(period.prices[:, None], B.shape(x))
        # Every agent decays, including those without surplus this period.
        next_prices, rewards = pqr_step(
            {p.id: state.agents[p.id] for p in period.seller_profiles}, x, period
        )
        for i in set(state.agents) - set(s_inds.tolist()):
            state.agents[i].decay()
    elif config.strategy == "rule":
        x, prices = rule_allocate(period)
        next_prices = period.prices.copy()
        rewards = None
    else:  # pragma: no cover
        raise RuntimeError(f'Unknown strategy "{config.strategy}".')

    if not feasible(x, period):
        raise RuntimeError(f"Allocation of period {t} is infeasible.")
    flows = energy_flows(x, period)
    if B.any(flows["unsold"] < -1e-6):
        raise RuntimeError(f"Energy is not conserved in period {t}.")

    costs = buyer_costs(x, period, prices)
    values = buyer_values(costs, period)
    revenues = B.sum(prices * flows["delivered"], axis=1)
    state.t += 1
    return PeriodResult(
        period_index=t,
        buyer_ids=tuple(state.ids[i] for i in b_inds),
        buyer_demands=period.demands,
        buyer_costs=np.asarray(costs, dtype=np.float64),
        buyer_values=np.asarray(values, dtype=np.float64),
        seller_ids=tuple(state.ids[i] for i in s_inds),
        seller_surpluses=period.surpluses,
        seller_prices=period.prices,
        next_prices=np.asarray(next_prices, dtype=np.float64),
        seller_revenues=np.asarray(revenues, dtype=np.float64),
        seller_rewards=np.asarray(revenues if rewards is None else rewards),
        posted_prices=posted,
        allocation=np.asarray(x, dtype=np.float64),
        fitness=float(B.sum(values)) if period.n_buyers > 0 else 0.0,
        local_energy=float(B.sum(flows["sold"])),
        losses=float(B.sum(flows["lost"])),
        grid_import=float(B.sum(flows["imported"])),
        grid_export=float(B.sum(flows["unsold"])),
    )


class SimulationReport:
    """Results of a simulation.

    Args:
        config (:class:`.SimulationConfig`): Configuration, which suffices to re-run
            the simulation together with the traces.
        ids (list[str]): Prosumer ids in registration order.
        results (list[:class:`.PeriodResult`]): Outcome of every simulated period.
        traces (str, optional): Source of the traces. Defaults to `"synthetic"`.
        version (str, optional): Version of the package that produced the results.
        wall_time (float, optional): Wall time of the run in seconds. This is never
            written to files.
    """

    def __init__(
        self, config, ids, results, traces="synthetic", version=None, wall_time=None
    ):
        if len(results) == 0:
            raise ValidationError("A report requires at least one period.")
        self.config = config
        self.ids = list(ids)
        self.results = list(results)
        self.traces = traces
        self.version = package_version() if version is None else version
        self.wall_time = wall_time

    @property
    def seed(self):
        return self.config.seed

    @property
    def strategy(self):
        return self.config.strategy

    @cached_property
    def periods(self):
        """:class:`pandas.DataFrame`: Aggregates of every period."""
        rs = self.results
        frame = pd.DataFrame(
            {
                "period": [r.period_index for r in rs],
                "n_buyers": [len(r.buyer_ids) for r in rs],
                "n_sellers": [len(r.seller_ids) for r in rs],
                "fitness": [r.fitness for r in rs],
                "seller_reward": [float(B.sum(r.seller_rewards)) for r in rs],
                "buyer_cost": [float(B.sum(r.buyer_costs)) for r in rs],
                "seller_revenue": [float(B.sum(r.seller_revenues)) for r in rs],
                "local_energy": [r.local_energy for r in rs],
                "losses": [r.losses for r in rs],
                "grid_import": [r.grid_import for r in rs],
                "grid_export": [r.grid_export for r in rs],
                "mean_price": [float(np.mean(r.posted_prices)) for r in rs],
            }
        )
        frame["cumulative_reward"] = frame["seller_reward"].cumsum()
        frame["fitness_ma"] = moving_average(frame["fitness"].to_numpy(), WINDOW)
        frame["seller_reward_ma"] = moving_average(frame["seller_reward"].to_numpy(), WINDOW)
        return frame

    @cached_property
    def totals(self):
        """dict: Totals over all periods, together with the scalability summaries."""
        periods = self.periods
        totals = {"periods": len(periods)}
        for name in [
            "fitness",
            "seller_reward",
            "buyer_cost",
            "seller_revenue",
            "local_energy",
            "losses",
            "grid_import",
            "grid_export",
        ]:
            totals[name] = float(periods[name].sum())
        totals["mean_fitness"] = float(periods["fitness"].mean())
        totals["mean_buyers"] = float(periods["n_buyers"].mean())
        totals["mean_sellers"] = float(periods["n_sellers"].mean())
        totals["max_buyers"] = int(periods["n_buyers"].max())
        totals["max_sellers"] = int(periods["n_sellers"].max())
        return totals

    @property
    def total_buyer_value(self):
        """float: Summed perceived value of all buyers over all periods."""
        return self.totals["fitness"]

    @property
    def cumulative_reward(self):
        """float: Summed reward of all sellers over all periods."""
        return self.totals["seller_reward"]

    @cached_property
    def price_trajectories(self):
        """:class:`pandas.DataFrame`: Posted price of every prosumer at the start of
        every period, with the periods as rows and the prosumers as columns."""
        return pd.DataFrame(
            np.stack([r.posted_prices for r in self.results]),
            index=pd.Index([r.period_index for r in self.results], name="period"),
            columns=self.ids,
        )

    @cached_property
    def records(self):
        """:class:`pandas.DataFrame`: One record per period and participating
        prosumer. Fields that do not apply to a role are missing."""
        rows = []
        for r in self.results:
            delivered = r.allocation * r.buyer_demands[None, :]
            bought = B.sum(delivered, axis=0)
            sold = B.sum(delivered, axis=1)
            for j, prosumer in enumerate(r.buyer_ids):
                rows.append(
                    {
                        "period": r.period_index,
                        "prosumer_id": prosumer,
                        "role": "buyer",
                        "energy_kwh": r.buyer_demands[j],
                        "traded_kwh": bought[j],
                        "cost": r.buyer_costs[j],
                        "value": r.buyer_values[j],
                    }
                )
            for i, prosumer in enumerate(r.seller_ids):
                rows.append(
                    {
                        "period": r.period_index,
                        "prosumer_id": prosumer,
                        "role": "seller",
                        "energy_kwh": r.seller_surpluses[i],
                        "traded_kwh": sold[i],
                        "price": r.seller_prices[i],
                        "next_price": r.next_prices[i],
                        "revenue": r.seller_revenues[i],
                        "reward": r.seller_rewards[i],
                    }
                )
        return pd.DataFrame(rows, columns=RECORD_COLUMNS)


#: Columns of :attr:`.SimulationReport.records`.
RECORD_COLUMNS = [
    "period",
    "prosumer_id",
    "role",
    "energy_kwh",
    "traded_kwh",
    "price",
    "next_price",
    "cost",
    "value",
    "revenue",
    "reward",
]


def _check_traces(config, traces, state):
    if traces.horizon < config.horizon:
        raise ValidationError(
            f"Traces cover {traces.horizon} periods, but the horizon is "
            f"{config.horizon}."
        )
    if state.ids != traces.ids:
        raise ValidationError("The state belongs to a different set of prosumers.")
    grid = config.price_grid
    if state.grid != grid:
        raise ValidationError(
            f"The state uses price grid {state.grid}, but the configuration "
            f"specifies {grid}."
        )
    if not 0 <= state.t < config.horizon:
        raise ValidationError(
            f"The state is at period {state.t}, which is not before the horizon "
            f"{config.horizon}."
        )


def run_simulation(config, traces, state=None, trace=False, source="synthetic"):
    """Simulate the market over the horizon.

    Args:
        config (:class:`.SimulationConfig`): Configuration.
        traces (:class:`.TraceSet`): Traces covering the horizon.
        state (:class:`.MarketState`, optional): State to continue from. Defaults to
            a fresh state. The state is updated in place.
        trace (bool, optional): Report progress. Defaults to `False`.
        source (str, optional): Source of the traces for the report. Defaults to
            `"synthetic"`.

    Returns:
        :class:`.SimulationReport`: Report of the simulated periods.
    """
    state = build_state(config, traces.ids) if state is None else state
    _check_traces(config, traces, state)

    start = time.perf_counter()
    remaining = config.horizon - state.t
    report_every = max(remaining // 10, 1)
    results = []
    while state.t < config.horizon:
        results.append(run_period(state, traces, config))
        if trace and (len(results) % report_every == 0 or len(results) == remaining):
            with out.Section(f"Period {state.t}/{config.horizon}"):
                out.kv("Buyers", len(results[-1].buyer_ids))
                out.kv("Sellers", len(results[-1].seller_ids))
                out.kv("Fitness", results[-1].fitness)
    wall_time = time.perf_counter() - start

    report = SimulationReport(
        config, traces.ids, results, traces=source, wall_time=wall_time
    )
    if trace:
        out.kv("Wall time", wall_time)
    return report


def _delta(a, b):
    # Percentage change from `b` to `a`. `None` if undefined.
    if b == 0:
        return 0.0 if a == 0 else None
    return 100 * (a - b) / abs(b)


@dataclass(frozen=True)
class Comparison:
    """Both strategies run on identical inputs.

    Args:
        debate_pqr (:class:`.SimulationReport`): Allocation by DEbATE and pricing by
            PQR.
        rule (:class:`.SimulationReport`): Rule baseline.
    """

    debate_pqr: SimulationReport
    rule: SimulationReport

    @property
    def deltas(self):
        """dict: Percentage improvement of DEbATE and PQR over the baseline of the
        total buyer value and of the cumulative seller reward. Undefined deltas are
        `None`."""
        return {
            "buyer_value": _delta(
                self.debate_pqr.total_buyer_value, self.rule.total_buyer_value
            ),
            "seller_reward": _delta(
                self.debate_pqr.cumulative_reward, self.rule.cumulative_reward
            ),
        }

    @property
    def totals(self):
        """dict: Total buyer value and cumulative seller reward of both strategies,
        with the baseline under keys ending in `_rule`."""
        return {
            "buyer_value": self.debate_pqr.total_buyer_value,
            "buyer_value_rule": self.rule.total_buyer_value,
            "seller_reward": self.debate_pqr.cumulative_reward,
            "seller_reward_rule": self.rule.cumulative_reward,
        }

    def summary(self):
        """Summarise the comparison.

        Returns:
            dict: Totals per strategy and the percentage deltas.
        """
        return {
            "seed": self.debate_pqr.seed,
            "horizon": self.debate_pqr.config.horizon,
            "debate_pqr": {
                "buyer_value": self.debate_pqr.total_buyer_value,
                "seller_reward": self.debate_pqr.cumulative_reward,
            },
            "rule": {
                "buyer_value": self.rule.total_buyer_value,
                "seller_reward": self.rule.cumulative_reward,
            },
            "deltas": self.deltas,
        }


def compare(config, traces, trace=False, source="synthetic"):
    """Run DEbATE with PQR and the rule baseline on identical inputs.

    Args:
        config (:class:`.SimulationConfig`): Configuration. The strategy is ignored.
        traces (:class:`.TraceSet`): Traces covering the horizon.
        trace (bool, optional): Report progress. Defaults to `False`.
        source (str, optional): Source of the traces for the reports.

    Returns:
        :class:`.Comparison`: Both reports.
    """
    reports = {}
    for strategy in ["debate_pqr", "rule"]:
        if trace:
            out.kv("Strategy", strategy)
        reports[strategy] = run_simulation(
            config.override(strategy=strategy), traces, trace=trace, source=source
        )
    return Comparison(**reports)


_RESULT_COLUMNS = [
    "size",
    "buyer_value",
    "buyer_value_rule",
    "seller_reward",
    "seller_reward_rule",
]


def advantage_by_size(results, min_wins):
    """Advantage of DEbATE with PQR over the baseline per system size.

    Args:
        results (:class:`pandas.DataFrame`): One row per comparison with the system
            size in `size` and the totals of :attr:`.Comparison.totals`.
        min_wins (int): Number of comparisons per size that DEbATE with PQR must win
            on both totals.

    Returns:
        tuple[:class:`pandas.DataFrame`, bool]: Per size, the number of runs, the wins
            on both totals, and the mean advantages. Second, whether every size has
            enough wins and the mean buyer advantage does not decrease with the size.
    """
    missing = [c for c in _RESULT_COLUMNS if c not in results.columns]
    if missing:
        raise ValidationError(f"Results lack the columns {', '.join(missing)}.")
    results = results.assign(
        buyer_advantage=results["buyer_value"] - results["buyer_value_rule"],
        seller_advantage=results["seller_reward"] - results["seller_reward_rule"],
    )
    table = results.groupby("size").agg(
        runs=("buyer_advantage", "count"),
        buyer_wins=("buyer_advantage", lambda x: int((x > 0).sum())),
        seller_wins=("seller_advantage", lambda x: int((x > 0).sum())),
        buyer_advantage=("buyer_advantage", "mean"),
        seller_advantage=("seller_advantage", "mean"),
    )
    enough = (table["buyer_wins"] >= min_wins) & (table["seller_wins"] >= min_wins)
    increasing = np.all(np.diff(table["buyer_advantage"].to_numpy()) >= 0)
    return table, bool(enough.all() and increasing)


def convergence(config, sizes, seeds, g_max=None, normalise=True, trace=False):
    """Best-fitness traces of DEbATE on sampled periods of various sizes.

    Args:
        config (:class:`.SimulationConfig`): Configuration.
        sizes (list[int]): Sizes. A period of size `n` has `n` buyers and `n`
            sellers.
        seeds (list[int]): Seeds. Every seed gives a different period and run.
        g_max (int, optional): Number of generations. Defaults to the configuration.
        normalise (bool, optional): Normalise every trace to [0, 1] before
            averaging. Defaults to `True`.
        trace (bool, optional): Report progress. Defaults to `False`.

    Returns:
        :class:`pandas.DataFrame`: For every size, the best fitness averaged over the
            seeds, with one row per generation.
    """
    config = config.override(g_max=g_max)
    params = config.debate_params
    traces = {}
    for n in sizes:
        if n < 1:
            raise ValidationError(f"Sizes must be positive, got {n}.")
        histories = []
        for seed in seeds:
            period = sample_period(config, n, n, make_rng(seed, _STREAM_INSTANCE, n))
            _, history = debate_run(
                period, params, make_rng(seed, _STREAM_CONVERGENCE, n)
            )
            histories.append(normalise_trace(history) if normalise else history)
            if trace:
                with out.Section(f"Size {n}, seed {seed}"):
                    out.kv("Final fitness", history[-1])
        traces[f"size_{n}"] = np.mean(histories, axis=0)
    frame = pd.DataFrame(traces)
    frame.insert(0, "generation", np.arange(1, params.g_max + 1))
    return frame
