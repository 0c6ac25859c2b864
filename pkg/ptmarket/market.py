from dataclasses import dataclass, replace
from functools import cached_property
from typing import Tuple

import lab as B
import numpy as np

from .util import ValidationError

__all__ = [
    "ProsumerProfile",
    "ProfileRanges",
    "MarketPeriod",
    "empty_allocation",
    "buyer_total_cost",
    "buyer_costs",
    "buyer_value",
    "buyer_values",
    "seller_value",
    "market_fitness",
    "constraint_violations",
    "feasible",
    "energy_flows",
    "sample_profiles",
]

#: Absolute slack on the capacity and demand constraints.
TOLERANCE = 1e-9


@dataclass(frozen=True)
class ProsumerProfile:
    """Identity and personal prospect-theory parameters of a prosumer.

    Args:
        id (int): Registration ordinal.
        k_plus (float): Scale of perceived gains.
        k_minus (float): Scale of perceived losses.
        zeta_plus (float): Curvature of perceived gains, in `(0, 1]`.
        zeta_minus (float): Curvature of perceived losses, in `(0, 1]`.
        ref_price (float): Reference price per kWh.
    """

    id: int
    k_plus: float
    k_minus: float
    zeta_plus: float
    zeta_minus: float
    ref_price: float

    def __post_init__(self):
        if self.k_plus < 0 or self.k_minus < 0:
            raise ValidationError(
                f"Prosumer {self.id}: loss-aversion parameters must be non-negative."
            )
        for name in ["zeta_plus", "zeta_minus"]:
            if not 0 < getattr(self, name) <= 1:
                raise ValidationError(
                    f"Prosumer {self.id}: {name} must lie in (0, 1], "
                    f"but is {getattr(self, name)}."
                )


@dataclass(frozen=True, eq=False)
class MarketPeriod:
    """One trading period.

    Args:
        period_index (int): Index of the period.
        buyers (tuple): Tuples `(profile, demand)` with demand in kWh.
        sellers (tuple): Tuples `(profile, surplus, price)` with surplus in kWh and
            price per kWh.
        loss (matrix): Loss fractions with sellers as rows and buyers as columns.
        l_max (float): Pairs with a loss at least this large cannot trade.
        rho_gb (float): Price at which the grid buys energy.
        rho_gs (float): Price at which the grid sells energy.
    """

    period_index: int
    buyers: Tuple
    sellers: Tuple
    loss: np.ndarray
    l_max: float
    rho_gb: float
    rho_gs: float

    def __post_init__(self):
        object.__setattr__(self, "buyers", tuple(self.buyers))
        object.__setattr__(self, "sellers", tuple(self.sellers))
        loss = np.array(self.loss, dtype=np.float64).reshape(
            len(self.sellers), len(self.buyers)
        )
        loss.setflags(write=False)
        object.__setattr__(self, "loss", loss)
        self._validate()

    def _validate(self):
        if not 0 < self.rho_gb < self.rho_gs:
            raise ValidationError(
                f"Grid prices must satisfy 0 < rho_gb < rho_gs, "
                f"got {self.rho_gb} and {self.rho_gs}."
            )
        bounds = (self.rho_gb - TOLERANCE, self.rho_gs + TOLERANCE)
        for profile, demand in self.buyers:
            if not demand > 0:
                raise ValidationError(f"Buyer {profile.id} has demand {demand} <= 0.")
        for profile, surplus, price in self.sellers:
            if not surplus > 0:
                raise ValidationError(
                    f"Seller {profile.id} has surplus {surplus} <= 0."
                )
            if not bounds[0] <= price <= bounds[1]:
                raise ValidationError(
                    f"Price {price} of seller {profile.id} lies outside "
                    f"[rho_gb, rho_gs]."
                )
        for profile in self.buyer_profiles + self.seller_profiles:
            if not bounds[0] <= profile.ref_price <= bounds[1]:
                raise ValidationError(
                    f"Reference price {profile.ref_price} of prosumer {profile.id} "
                    f"lies outside [rho_gb, rho_gs]."
                )
        ids_b = {p.id for p, _ in self.buyers}
        ids_s = {p.id for p, _, _ in self.sellers}
        if ids_b & ids_s:
            raise ValidationError(
                f"Prosumers {sorted(ids_b & ids_s)} are both buyer and seller in "
                f"period {self.period_index}."
            )
        if B.any(self.loss < 0) or B.any(self.loss >= 1):
            raise ValidationError("Loss fractions must lie in [0, 1).")

    @property
    def n_buyers(self):
        return len(self.buyers)

    @property
    def n_sellers(self):
        return len(self.sellers)

    @property
    def degenerate(self):
        """bool: No trade is possible because a side of the market is empty."""
        return self.n_buyers == 0 or self.n_sellers == 0

    @cached_property
    def demands(self):
        return np.array([w for _, w in self.buyers], dtype=np.float64)

    @cached_property
    def surpluses(self):
        return np.array([r for _, r, _ in self.sellers], dtype=np.float64)

    @cached_property
    def prices(self):
        return np.array([rho for _, _, rho in self.sellers], dtype=np.float64)

    @cached_property
    def buyer_profiles(self):
        return [p for p, _ in self.buyers]

    @cached_property
    def seller_profiles(self):
        return [p for p, _, _ in self.sellers]

    @cached_property
    def excluded(self):
        """matrix: Pairs that cannot trade because of losses."""
        return self.loss >= self.l_max

    @cached_property
    def _buyer_parameters(self):
        profiles = self.buyer_profiles
        return tuple(
            np.array([getattr(p, name) for p in profiles], dtype=np.float64)
            for name in ["ref_price", "k_plus", "k_minus", "zeta_plus", "zeta_minus"]
        )

    def with_prices(self, prices):
        """Copy the period with new seller prices.

        Args:
            prices (vector): New prices in the order of the sellers.

        Returns:
            :class:`.MarketPeriod`: Period with the new prices.
        """
        sellers = tuple(
            (profile, surplus, float(price))
            for (profile, surplus, _), price in zip(self.sellers, prices)
        )
        return replace(self, sellers=sellers)


def empty_allocation(period):
    """All-zero allocation for a period.

    Args:
        period (:class:`.MarketPeriod`): Period.

    Returns:
        matrix: Zero matrix with sellers as rows and buyers as columns.
    """
    return B.zeros(np.float64, period.n_sellers, period.n_buyers)


def _pt_value(d, k_plus, k_minus, zeta_plus, zeta_minus):
    # Gains for `d > 0`; `d = 0` falls in the loss branch, which evaluates to zero.
    magnitude = B.abs(d)
    return np.where(
        d > 0,
        k_plus * magnitude**zeta_plus,
        -k_minus * magnitude**zeta_minus,
    )


def buyer_costs(x, period, prices=None):
    """Total costs of all buyers.

    Args:
        x (matrix): Allocation.
        period (:class:`.MarketPeriod`): Period.
        prices (matrix, optional): Price per transaction. Defaults to the posted
            seller prices.

    Returns:
        vector: Cost `y_j` of every buyer. Unpurchased demand is bought from the grid.
    """
    if prices is None:
        prices = period.prices[:, None]
    local = B.sum(prices * x, axis=0)
    residual = 1 - B.sum(x, axis=0)
    return (local + period.rho_gs * residual) * period.demands


def buyer_total_cost(j, x, period, prices=None):
    """Total cost of buyer `j`.

    Args:
        j (int): Index of the buyer.
        x (matrix): Allocation.
        period (:class:`.MarketPeriod`): Period.
        prices (matrix, optional): Price per transaction. Defaults to the posted
            seller prices.

    Returns:
        float: Cost `y_j`.
    """
    if not 0 <= j < period.n_buyers:
        raise ValueError(f"Buyer index {j} is out of range [0, {period.n_buyers}).")
    column = np.asarray(x)[:, j]
    if B.sum(column) > 1 + TOLERANCE:
        raise ValueError(
            f"Buyer {j} is allocated a fraction {B.sum(column)} of its demand, "
            f"which exceeds one."
        )
    w = period.demands[j]
    price = period.prices if prices is None else np.asarray(prices)[:, j]
    return float(B.sum(price * column) * w + period.rho_gs * (1 - B.sum(column)) * w)


def buyer_value(y, w, profile):
    """Perceived value of a buyer paying `y` for `w` kWh.

    Args:
        y (float): Total cost.
        w (float): Demand.
        profile (:class:`.ProsumerProfile`): Buyer.

    Returns:
        float: Value. Positive when the cost is below the reference cost.
    """
    return float(
        _pt_value(
            profile.ref_price * w - y,
            profile.k_plus,
            profile.k_minus,
            profile.zeta_plus,
            profile.zeta_minus,
        )
    )


def buyer_values(costs, period):
    """Perceived values of all buyers.

    Args:
        costs (vector): Costs as computed by :func:`.buyer_costs`.
        period (:class:`.MarketPeriod`): Period.

    Returns:
        vector: Value of every buyer.
    """
    ref_price, k_plus, k_minus, zeta_plus, zeta_minus = period._buyer_parameters
    return _pt_value(
        ref_price * period.demands - costs, k_plus, k_minus, zeta_plus, zeta_minus
    )


def seller_value(y, profile):
    """Perceived value of a temporal-difference error of a seller.

    Args:
        y (float): TD error.
        profile (:class:`.ProsumerProfile`): Seller.

    Returns:
        float: Value.
    """
    return float(
        _pt_value(
            y, profile.k_plus, profile.k_minus, profile.zeta_plus, profile.zeta_minus
        )
    )


def market_fitness(x, period, prices=None):
    """Summed perceived value of all buyers.

    Args:
        x (matrix): Allocation.
        period (:class:`.MarketPeriod`): Period.
        prices (matrix, optional): Price per transaction. Defaults to the posted
            seller prices.

    Returns:
        float: Fitness.
    """
    if period.n_buyers == 0:
        return 0.0
    return float(B.sum(buyer_values(buyer_costs(x, period, prices), period)))


def constraint_violations(x, period):
    """Largest violation of every constraint.

    Args:
        x (matrix): Allocation.
        period (:class:`.MarketPeriod`): Period.

    Returns:
        dict: Violations of the capacity (`"capacity"`), demand (`"demand"`), loss
            (`"loss"`), and box (`"box"`) constraints. Zero means satisfied.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (period.n_sellers, period.n_buyers):
        raise ValueError(
            f"Allocation has shape {x.shape}, but the period has shape "
            f"{(period.n_sellers, period.n_buyers)}."
        )
    if x.size == 0:
        return {"capacity": 0.0, "demand": 0.0, "loss": 0.0, "box": 0.0}
    load = B.sum((1 + period.loss) * x * period.demands[None, :], axis=1)
    return {
        "capacity": float(max(B.max(load - period.surpluses), 0)),
        "demand": float(max(B.max(B.sum(x, axis=0) - 1), 0)),
        "loss": float(B.max(B.abs(np.where(period.excluded, x, 0)))),
        "box": float(max(B.max(-x), B.max(x - 1), 0)),
    }


def feasible(x, period, tol=TOLERANCE):
    """Check whether an allocation satisfies all constraints.

    Args:
        x (matrix): Allocation.
        period (:class:`.MarketPeriod`): Period.
        tol (float, optional): Slack on the capacity and demand constraints.

    Returns:
        bool: `True` if feasible.
    """
    v = constraint_violations(x, period)
    return v["box"] == 0 and v["loss"] == 0 and v["capacity"] <= tol and (
        v["demand"] <= tol
    )


def energy_flows(x, period):
    """Energy flows of an allocation, all in kWh.

    Args:
        x (matrix): Allocation.
        period (:class:`.MarketPeriod`): Period.

    Returns:
        dict: Energy delivered per pair (`"delivered"`), sold per seller (`"sold"`),
            lost in the wires per seller (`"lost"`), surplus left for the grid per
            seller (`"unsold"`), and bought from the grid per buyer (`"imported"`).
    """
    delivered = np.asarray(x) * period.demands[None, :]
    sold = B.sum(delivered, axis=1)
    lost = B.sum(period.loss * delivered, axis=1)
    return {
        "delivered": delivered,
        "sold": sold,
        "lost": lost,
        "unsold": period.surpluses - sold - lost,
        "imported": period.demands - B.sum(delivered, axis=0),
    }


@dataclass(frozen=True)
class ProfileRanges:
    """Ranges from which prosumer parameters are sampled uniformly."""

    k: Tuple[float, float] = (2.10, 2.61)
    zeta_plus: Tuple[float, float] = (0.60, 0.88)
    zeta_minus: Tuple[float, float] = (0.52, 1.0)
    ref_price: Tuple[float, float] = (0.06, 0.10)


def sample_profiles(n, ranges, rng):
    """Sample prosumer profiles in registration order.

    Args:
        n (int): Number of prosumers.
        ranges (:class:`.ProfileRanges`): Parameter ranges.
        rng (:class:`numpy.random.Generator`): Random number generator.

    Returns:
        list[:class:`.ProsumerProfile`]: Profiles with ids `0, ..., n - 1`.
    """
    profiles = []
    for i in range(n):
        k_plus, k_minus = rng.uniform(*ranges.k, size=2)
        profiles.append(
            ProsumerProfile(
                id=i,
                k_plus=float(k_plus),
                k_minus=float(k_minus),
                zeta_plus=float(rng.uniform(*ranges.zeta_plus)),
                zeta_minus=float(rng.uniform(*ranges.zeta_minus)),
                ref_price=float(rng.uniform(*ranges.ref_price)),
            )
        )
    return profiles
