from .market import empty_allocation

__all__ = ["rule_allocate"]

#: Remaining demand fractions below this are considered met.
_EPS = 1e-12


def rule_allocate(period):
    """Greedy baseline: buyers in registration order take energy from the cheapest
    sellers with capacity left, and every transaction is priced at the midpoint of the
    seller's price and the buyer's reference price.

    Pairs with too much loss never trade, and capacities account for the wire losses.
    Seller price ties go to the seller registered first.

    Args:
        period (:class:`.MarketPeriod`): Period.

    Returns:
        tuple[matrix, matrix]: Allocation and price per transaction. Prices of pairs
            that do not trade are zero.
    """
    x = empty_allocation(period)
    prices = empty_allocation(period)
    capacity = period.surpluses.copy()

    sellers = sorted(
        range(period.n_sellers),
        key=lambda i: (period.prices[i], period.seller_profiles[i].id),
    )
    buyers = sorted(range(period.n_buyers), key=lambda j: period.buyer_profiles[j].id)

    for j in buyers:
        profile, w = period.buyers[j]
        need = 1.0
        for i in sellers:
            if need <= _EPS:
                break
            if period.excluded[i, j] or capacity[i] <= 0:
                continue
            per_fraction = (1 + period.loss[i, j]) * w
            take = min(need, capacity[i] / per_fraction)
            x[i, j] = take
            prices[i, j] = 0.5 * (period.prices[i] + profile.ref_price)
            capacity[i] = max(capacity[i] - take * per_fraction, 0)
            need -= take

    return x, prices

