import argparse

from ptmarket import (
    PQRParams,
    PriceAgent,
    PriceGrid,
    greedy_rollout,
    make_rng,
    sample_profiles,
    train_stationary,
)

from util import *

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=5_000)
    parser.add_argument("--alpha", type=float, default=1e-2)
    parser.add_argument("--delta", type=float, default=0.01)
    parser.add_argument("--seeds", type=int, default=5)
    args = parser.parse_args()

    wd = WorkingDirectory("_experiments", "pricing")
    config = default_config()
    grid = PriceGrid(config.rho_gb, config.rho_gs, args.delta)

    # Energy sold falls linearly with the price, so revenue peaks inside the grid.
    sold = np.maximum(32 - 200 * grid.states, 0)
    revenue = grid.states * sold
    optimum = int(np.argmax(revenue))
    out.kv("Revenue-maximising price", grid.price(optimum))

    rows = []
    for decay in [config.epsilon_decay, 1.0]:
        params = PQRParams(
            alpha=args.alpha,
            gamma=config.gamma,
            delta=args.delta,
            epsilon_decay=decay,
        )
        for seed in range(args.seeds):
            rng = make_rng(seed)
            (profile,) = sample_profiles(1, config.profile_ranges, rng)
            agent = PriceAgent(0, profile, grid, params, grid.size - 1, rng)
            train_stationary(agent, sold, args.steps)
            ends = [
                greedy_rollout(agent, s, 2 * grid.size)[-1] for s in range(grid.size)
            ]
            hits = sum(end == optimum for end in ends)
            rows.append({"decay": decay, "seed": seed, "optimal_starts": hits})
            with out.Section(f"Decay {decay}, seed {seed}"):
                out.kv("Greedy price from the top", grid.price(ends[-1]))
                out.kv("Starts reaching the optimum", f"{hits}/{grid.size}")

    results = pd.DataFrame(rows)
    results.to_csv(wd.file("pricing.csv"), index=False)

    # A seed passes when the greedy policy reaches the optimum from every start.
    for decay, group in results.groupby("decay"):
        passed = int((group["optimal_starts"] == grid.size).sum())
        with out.Section(f"Decay {decay}"):
            out.kv("Seeds passing", f"{passed}/{len(group)}")
            out.kv("Verdict", "PASS" if passed == len(group) else "FAIL")
