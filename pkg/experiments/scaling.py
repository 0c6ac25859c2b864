import argparse

from ptmarket import DebateParams, debate_run, make_rng, sample_period

from util import *

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--g-max", type=int, default=1_000)
    parser.add_argument("--pop-size", type=int, default=20)
    parser.add_argument("--size", type=int, default=10)
    parser.add_argument("--trials", type=int, default=5)
    args = parser.parse_args()

    wd = WorkingDirectory("_experiments", "scaling")
    config = default_config()

    def timed(pop_size, g_max, n_buyers, n_sellers):
        period = sample_period(config, n_buyers, n_sellers, make_rng(0))
        params = DebateParams(pop_size=pop_size, g_max=g_max)
        return median_time(
            lambda: debate_run(period, params, make_rng(1)), trials=args.trials
        )

    n = args.size
    base = timed(args.pop_size, args.g_max, n, n)
    out.kv("Base wall time", base)

    rows = []
    for name, setting in [
        ("G_max", (args.pop_size, 2 * args.g_max, n, n)),
        ("NP", (2 * args.pop_size, args.g_max, n, n)),
        ("|S||B|", (args.pop_size, args.g_max, 2 * n, n)),
    ]:
        ratio = timed(*setting) / base
        rows.append({"doubled": name, "ratio": ratio})
        with out.Section(f"Doubling {name}"):
            out.kv("Ratio", ratio)
            out.kv("In [1.6, 2.6]", 1.6 <= ratio <= 2.6)

    pd.DataFrame(rows).to_csv(wd.file("scaling.csv"), index=False)
