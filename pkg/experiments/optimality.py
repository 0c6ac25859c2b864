import argparse
import time

from ptmarket import DebateParams, debate_run, grid_search, make_rng, sample_period

from util import *

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--instances", type=int, default=20)
    parser.add_argument("--g-max", type=int, default=10_000)
    parser.add_argument("--step", type=float, default=0.01)
    args = parser.parse_args()

    wd = WorkingDirectory("_experiments", "optimality")
    config = default_config()
    params = DebateParams(
        pop_size=config.pop_size, g_max=args.g_max, cr=config.cr, f=config.f
    )

    rows = []
    total_time = 0
    for seed in range(args.instances):
        period = sample_period(config, 2, 2, make_rng(seed, 0))
        start = time.perf_counter()
        _, history = debate_run(period, params, make_rng(seed, 1))
        total_time += time.perf_counter() - start
        _, best = grid_search(period, step=args.step)
        gap = (best - history[-1]) / abs(best)
        rows.append({"seed": seed, "debate": history[-1], "grid": best, "gap": gap})
        with out.Section(f"Instance {seed}"):
            out.kv("DEbATE", history[-1])
            out.kv("Grid search", best)
            out.kv("Relative gap", gap)

    results = pd.DataFrame(rows)
    results.to_csv(wd.file("optimality.csv"), index=False)
    within = int((results["gap"] <= 0.01).sum())
    out.kv("Within 1% of grid search", f"{within}/{len(results)}")
    out.kv("Largest gap", results["gap"].max())
    out.kv("DEbATE wall time", total_time)
    out.kv("Under two minutes", total_time < 120)
