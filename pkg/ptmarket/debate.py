import itertools
from dataclasses import dataclass

import lab as B
import numpy as np
import wbml.out as out

from .market import (
    TOLERANCE,
    buyer_value,
    empty_allocation,
    market_fitness,
)
from .util import ValidationError, make_rng

__all__ = [
    "DebateParams",
    "Population",
    "init_population",
    "mutate_crossover",
    "repair",
    "debate_run",
    "grid_search",
    "normalise_trace",
]


@dataclass(frozen=True)
class DebateParams:
    """Parameters of the differential-evolution allocation solver.

    Args:
        pop_size (int, optional): Population size. Defaults to `20`.
        g_max (int, optional): Number of generations. Defaults to `10_000`.
        cr (float, optional): Crossover probability. Defaults to `0.9`.
        f (float, optional): Differential weight. Defaults to `0.5`.
        seed (int, optional): Seed. Defaults to `0`.
    """

    pop_size: int = 20
    g_max: int = 10_000
    cr: float = 0.9
    f: float = 0.5
    seed: int = 0

    def __post_init__(self):
        # Three distinct donors and the target must exist.
        if self.pop_size < 4:
            raise ValidationError("Population size must be at least 4.")
        if self.g_max < 1:
            raise ValidationError("Number of generations must be at least 1.")
        if not 0 <= self.cr <= 1:
            raise ValidationError(f"Crossover probability {self.cr} not in [0, 1].")
        if not 0 <= self.f <= 2:
            raise ValidationError(f"Differential weight {self.f} not in [0, 2].")


class Population:
    """Feasible candidate allocations and their fitnesses.

    Args:
        candidates (list[matrix]): Candidates.
        fitness (vector): Fitness of every candidate.
    """

    def __init__(self, candidates, fitness):
        self.candidates = list(candidates)
        self.fitness = np.array(fitness, dtype=np.float64)

    def __len__(self):
        return len(self.candidates)

    def best(self):
        """Best candidate. Ties go to the lowest index.

        Returns:
            tuple[matrix, float]: Candidate and its fitness.
        """
        k = int(np.argmax(self.fitness))
        return self.candidates[k], float(self.fitness[k])


class _Kernel:
    # Arrays of a period laid out for the inner loop of `debate_run`. The gap
    # `ref_price * w - y` of every buyer is `base - w * (premium @ x)`, where `premium`
    # is the saving of every seller with respect to the grid.

    def __init__(self, period):
        self.excluded = period.excluded
        self.any_excluded = bool(period.excluded.any())
        self.coefficients = (1 + period.loss) * period.demands[None, :]
        self.surpluses = period.surpluses
        self.demands = period.demands
        self.premium = period.prices - period.rho_gs
        ref_price, k_plus, k_minus, self.zeta_plus, self.zeta_minus = (
            period._buyer_parameters
        )
        self.base = (ref_price - period.rho_gs) * period.demands
        self.k_plus, self.k_minus = k_plus, -k_minus

    def repair(self, x):
        # In place.
        if self.any_excluded:
            x[self.excluded] = 0
        load = (self.coefficients * x).sum(axis=1)
        over = load > self.surpluses
        if over.any():
            x[over] *= (self.surpluses[over] / load[over])[:, None]
        total = x.sum(axis=0)
        over = total > 1
        if over.any():
            x[:, over] /= total[over]

    def fitness(self, x):
        gap = self.base - self.demands * (self.premium @ x)
        gain = gap > 0
        scale = np.where(gain, self.k_plus, self.k_minus)
        curvature = np.where(gain, self.zeta_plus, self.zeta_minus)
        return float((scale * np.abs(gap) ** curvature).sum())


def repair(x, period):
    """Project an allocation with entries in `[0, 1]` onto the feasible set.

    First, pairs with too much loss are zeroed. Second, every seller whose capacity is
    exceeded has its row scaled down to exactly its capacity. Third, every buyer whose
    fractions sum to more than one has its column normalised. The last step only
    shrinks entries, so it cannot violate the capacities again.

    Args:
        x (matrix): Allocation.
        period (:class:`.MarketPeriod`): Period.

    Returns:
        matrix: Feasible allocation.
    """
    x = np.array(x, dtype=np.float64)
    _Kernel(period).repair(x)
    return x


def init_population(period, params, rng):
    """Generate an initial population by uniform sampling followed by repair.

    Args:
        period (:class:`.MarketPeriod`): Period.
        params (:class:`.DebateParams`): Parameters.
        rng (:class:`numpy.random.Generator`): Random number generator.

    Returns:
        :class:`.Population`: Population of `params.pop_size` feasible candidates.
    """
    if period.degenerate:
        candidates = [empty_allocation(period) for _ in range(params.pop_size)]
        return Population(candidates, [market_fitness(x, period) for x in candidates])
    kernel = _Kernel(period)
    shape = (period.n_sellers, period.n_buyers)
    candidates, fitness = [], []
    for _ in range(params.pop_size):
        x = rng.random(shape)
        kernel.repair(x)
        fitness.append(kernel.fitness(x))
        candidates.append(x)
    return Population(candidates, fitness)


def _mutant(x_a, x_b, x_c, f):
    return np.minimum(np.maximum(x_a + f * (x_b - x_c), 0), 1)


def mutate_crossover(x_k, x_a, x_b, x_c, params, rng):
    """Create a trial allocation from a target and three donors.

    Every component is recombined with probability `params.cr`, and one uniformly
    chosen component is always recombined. A recombined component is
    `x_a + F (x_b - x_c)` clipped to `[0, 1]`; the others are copied from `x_k`.

    Args:
        x_k (matrix): Target.
        x_a (matrix): Base donor.
        x_b (matrix): First difference donor.
        x_c (matrix): Second difference donor.
        params (:class:`.DebateParams`): Parameters.
        rng (:class:`numpy.random.Generator`): Random number generator.

    Returns:
        matrix: Trial allocation.
    """
    shape = B.shape(x_k)
    cross = rng.random(shape) < params.cr
    forced = rng.integers(np.prod(shape, dtype=int))
    cross.flat[forced] = True
    return np.where(cross, _mutant(x_a, x_b, x_c, params.f), x_k)


def _generation_draws(rng, n, shape, cr):
    # Crossover masks, forced components, and donors for all targets of a generation.
    # Donors are three distinct indices different from the target: the first three
    # of a random permutation of the other indices.
    cross = rng.random((n,) + shape) < cr
    forced = rng.integers(int(np.prod(shape)), size=n)
    cross.reshape(n, -1)[np.arange(n), forced] = True
    donors = np.argsort(rng.random((n, n - 1)), axis=1)[:, :3]
    donors += donors >= np.arange(n)[:, None]
    return cross, donors.tolist()


def debate_run(period, params, rng=None, trace=False):
    """Maximise the summed perceived value of the buyers of a period.

    The population is updated in place: a trial replaces its target as soon as it is
    strictly fitter, so later targets in the same generation may draw donors that
    were replaced earlier in that generation. The random numbers of a generation are
    drawn before its first trial.

    Args:
        period (:class:`.MarketPeriod`): Period.
        params (:class:`.DebateParams`): Parameters.
        rng (:class:`numpy.random.Generator`, optional): Random number generator.
            Defaults to a generator seeded with `params.seed`.
        trace (bool, optional): Report progress. Defaults to `False`.

    Returns:
        tuple[matrix, vector]: Best allocation and the best fitness after every
            generation.
    """
    rng = make_rng(params.seed) if rng is None else rng

    if period.degenerate:
        x = empty_allocation(period)
        return x, np.full(params.g_max, market_fitness(x, period))

    kernel = _Kernel(period)
    population = init_population(period, params, rng)
    candidates = np.stack(population.candidates)
    fitness = population.fitness
    history = np.empty(params.g_max, dtype=np.float64)
    n, f = len(population), params.f
    shape = (period.n_sellers, period.n_buyers)

    report_every = max(params.g_max // 10, 1)

    for g in range(params.g_max):
        cross, donors = _generation_draws(rng, n, shape, params.cr)
        for k, (a, b, c) in enumerate(donors):
            trial = np.where(
                cross[k],
                _mutant(candidates[a], candidates[b], candidates[c], f),
                candidates[k],
            )
            kernel.repair(trial)
            trial_fitness = kernel.fitness(trial)
            if trial_fitness > fitness[k]:
                candidates[k] = trial
                fitness[k] = trial_fitness
        history[g] = fitness.max()

        if trace and ((g + 1) % report_every == 0 or g == 0):
            with out.Section(f"DEbATE generation {g + 1}/{params.g_max}"):
                out.kv("Best fitness", history[g])

    return candidates[int(np.argmax(fitness))].copy(), history


def _simplex_columns(n, step, allowed):
    # All columns on a grid with spacing `step` whose entries sum to at most one and
    # which vanish where trade is not allowed.
    m = int(round(1 / step))
    ranges = [range(m + 1) if a else range(1) for a in allowed]
    cols = [c for c in itertools.product(*ranges) if sum(c) <= m]
    return np.array(cols, dtype=np.float64).reshape(-1, n) / m


def grid_search(period, step=0.01):
    """Exhaustively search a grid over the feasible allocations.

    Every buyer's column is enumerated on the simplex; all buyers but the last are
    enumerated jointly, and the last buyer is handled in a vectorised fashion. This is
    practical for at most two buyers at the default resolution.

    Args:
        period (:class:`.MarketPeriod`): Period.
        step (float, optional): Grid spacing. Defaults to `0.01`.

    Returns:
        tuple[matrix, float]: Best allocation on the grid and its fitness.
    """
    if period.degenerate:
        x = empty_allocation(period)
        return x, market_fitness(x, period)

    n_s, n_b = period.n_sellers, period.n_buyers
    columns, values, loads = [], [], []
    for j, (profile, w) in enumerate(period.buyers):
        cols = _simplex_columns(n_s, step, ~period.excluded[:, j])
        # The cost and value of buyer `j` only depend on column `j`.
        costs = (cols @ period.prices + period.rho_gs * (1 - B.sum(cols, axis=1))) * w
        columns.append(cols)
        values.append(np.array([buyer_value(y, w, profile) for y in costs]))
        loads.append(cols * ((1 + period.loss[:, j]) * w)[None, :])

    best, best_x = -np.inf, None
    for choice in itertools.product(*(range(len(c)) for c in columns[:-1])):
        load = sum((loads[j][c] for j, c in enumerate(choice)), np.zeros(n_s))
        value = sum(values[j][c] for j, c in enumerate(choice))
        ok = np.all(load[None, :] + loads[-1] <= period.surpluses + TOLERANCE, axis=1)
        if not B.any(ok):
            continue
        total = np.where(ok, value + values[-1], -np.inf)
        i = int(np.argmax(total))
        if total[i] > best:
            best = float(total[i])
            best_x = np.stack(
                [columns[j][c] for j, c in enumerate(choice)] + [columns[-1][i]],
                axis=1,
            )
    return best_x, market_fitness(best_x, period)


def normalise_trace(history):
    """Normalise a best-fitness trace to start at zero and end at one.

    Args:
        history (vector): Best fitness after every generation.

    Returns:
        vector: Normalised trace. A constant trace is normalised to ones.
    """
    history = np.asarray(history, dtype=np.float64)
    span = history[-1] - history[0]
    if span == 0:
        return np.ones_like(history)
    return (history - history[0]) / span
