import argparse

from ptmarket import advantage_by_size, compare, synthetic_traces, write_report

from util import *

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", type=int, nargs="+", default=[5, 10, 15, 20])
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--min-wins", type=int, default=4)
    parser.add_argument("--plot-size", type=int, default=15)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--g-max", type=int)
    args = parser.parse_args()

    wd = WorkingDirectory("_experiments", "comparison")

    rows = []
    shown = None
    for n in args.sizes:
        for seed in range(args.seeds):
            config = default_config(
                n_buyers=n,
                n_sellers=n,
                seed=seed,
                horizon=args.horizon,
                g_max=args.g_max,
            )
            with out.Section(f"Size {n}, seed {seed}"):
                comparison = compare(config, synthetic_traces(config))
                summary = comparison.summary()
                out.kv("Buyer value delta", summary["deltas"]["buyer_value"])
                out.kv("Seller reward delta", summary["deltas"]["seller_reward"])
            rows.append({"size": n, "seed": seed, **comparison.totals})
            for strategy in ["debate_pqr", "rule"]:
                write_report(
                    getattr(comparison, strategy),
                    wd.file(f"size_{n}", f"seed_{seed}", f"{strategy}.json"),
                )
            if shown is None or (n == args.plot_size and seed == 0):
                shown = (n, seed, comparison)

    results = pd.DataFrame(rows)
    results.to_csv(wd.file("comparison.csv"), index=False)

    wins, passed = advantage_by_size(results, args.min_wins)
    wins.to_csv(wd.file("advantage.csv"))
    for n, row in wins.iterrows():
        with out.Section(f"Size {n}"):
            out.kv("Buyer wins", f"{row['buyer_wins']}/{row['runs']}")
            out.kv("Seller wins", f"{row['seller_wins']}/{row['runs']}")
            out.kv("Mean buyer advantage", row["buyer_advantage"])
            out.kv("Mean seller advantage", row["seller_advantage"])
    out.kv(
        f"At least {args.min_wins} wins per size and non-decreasing buyer advantage",
        "PASS" if passed else "FAIL",
    )

    # Advantage against system size.
    plt.figure(figsize=(6, 4))
    plt.plot(wins.index, wins["buyer_advantage"], label="Buyer value", marker="o")
    plt.plot(wins.index, wins["seller_advantage"], label="Seller reward", marker="o")
    plt.xlabel("Buyers (and sellers)")
    plt.ylabel("Advantage over the baseline")
    tweak()
    plt.savefig(wd.file("advantage.pdf"))

    # Moving averages and prices over a year.
    n, seed, comparison = shown
    out.kv("Run over time", f"size {n}, seed {seed}")
    plt.figure(figsize=(18, 4))
    for k, (column, label) in enumerate(
        [("fitness_ma", "Buyer value"), ("cumulative_reward", "Cumulative reward")]
    ):
        plt.subplot(1, 3, k + 1)
        for strategy in ["debate_pqr", "rule"]:
            periods = getattr(comparison, strategy).periods
            plt.plot(periods["period"], periods[column], label=strategy)
        plt.xlabel("Period")
        plt.ylabel(label)
        tweak()
    plt.subplot(1, 3, 3)
    prices = comparison.debate_pqr.price_trajectories
    for prosumer in prices.columns:
        plt.plot(prices.index, prices[prosumer], lw=0.5)
    plt.xlabel("Period")
    plt.ylabel("Posted price")
    tweak(legend=False)
    plt.savefig(wd.file("periods.pdf"))
